use std::collections::HashMap;

use crate::labeler::{question_template_words, ProximityLabel, SpatialLabel, VqaFormulation};
use crate::sim::{observation_words, Action, Lexicon, TaskTemplate};

use super::PromptError;

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const PAD: &str = "<pad>";
pub const SEP: &str = "<sep>";
/// Fills action chunks past the end of a trajectory.
pub const ACTION_PAD: &str = "<apad>";

pub const MAX_VOCAB: usize = 512;

/// Contiguous id range of one vocabulary block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub start: u32,
    pub end: u32,
}

impl Block {
    pub fn contains(&self, id: u32) -> bool {
        (self.start..self.end).contains(&id)
    }
}

/// Word-level token vocabulary with fixed block order: reserved, observation,
/// lexicon, answer, action, template text.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
    pub reserved: Block,
    pub observation: Block,
    pub lexicon: Block,
    pub answer: Block,
    pub action: Block,
    pub text: Block,
}

pub fn answer_block_words() -> Vec<String> {
    let mut out: Vec<String> = SpatialLabel::ALL.iter().map(|l| l.word().to_string()).collect();
    out.extend([ProximityLabel::Far, ProximityLabel::Middle, ProximityLabel::Near].map(|p| p.word().to_string()));
    out.extend((0..10).map(|d| d.to_string()));
    out.extend(["[", "]", ",", "-"].map(String::from));
    out
}

impl Vocabulary {
    pub fn build(world_size: i32, lexicon: &Lexicon) -> Result<Self, PromptError> {
        let mut words: Vec<String> = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut push_block = |block_words: Vec<String>, dedupe: bool| -> Result<Block, PromptError> {
            let start = words.len() as u32;
            for w in block_words {
                if index.contains_key(&w) {
                    if dedupe {
                        continue;
                    }
                    return Err(PromptError::DuplicateWord(w));
                }
                index.insert(w.clone(), words.len() as u32);
                words.push(w);
            }
            Ok(Block { start, end: words.len() as u32 })
        };
        let reserved = push_block([BOS, EOS, PAD, SEP].map(String::from).to_vec(), false)?;
        let observation = push_block(observation_words(world_size), false)?;
        let lex_words = lexicon.all_names().into_iter().chain(lexicon.all_colors()).map(String::from).collect();
        let lexicon_block = push_block(lex_words, false)?;
        let answer = push_block(answer_block_words(), false)?;
        let mut action_words: Vec<String> = Action::ALL.iter().map(|a| a.word().to_string()).collect();
        action_words.push(ACTION_PAD.into());
        let action = push_block(action_words, false)?;
        // template English shares words such as "up", "the" and "," with other
        // blocks; those keep their earlier id
        let mut text_words: Vec<String> = TaskTemplate::template_words().into_iter().map(String::from).collect();
        text_words.extend(question_template_words());
        let text = push_block(text_words, true)?;
        if words.len() >= MAX_VOCAB {
            return Err(PromptError::VocabularyTooLarge(words.len()));
        }
        Ok(Self { words, index, reserved, observation, lexicon: lexicon_block, answer, action, text })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn bos(&self) -> u32 {
        self.index[BOS]
    }

    pub fn eos(&self) -> u32 {
        self.index[EOS]
    }

    pub fn action_pad(&self) -> u32 {
        self.index[ACTION_PAD]
    }

    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<u32>, PromptError> {
        words
            .iter()
            .map(|w| self.id(w.as_ref()).ok_or_else(|| PromptError::UnknownWord(w.as_ref().to_string())))
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter().map(|&i| self.word(i).unwrap_or("<unk>").to_string()).collect()
    }

    pub fn action_id(&self, action: Action) -> u32 {
        self.index[action.word()]
    }

    pub fn action_of(&self, id: u32) -> Option<Action> {
        self.word(id).and_then(Action::from_word)
    }

    /// Ids a decoded action slot may take: the eight actions and the action pad.
    pub fn action_ids(&self) -> Vec<u32> {
        (self.action.start..self.action.end).collect()
    }

    /// Closed answer alphabet of a formulation.
    pub fn answer_ids(&self, formulation: VqaFormulation) -> Vec<u32> {
        let words: Vec<String> = match formulation {
            VqaFormulation::None => Vec::new(),
            VqaFormulation::Direction1D => SpatialLabel::ALL.iter().map(|l| l.word().into()).collect(),
            VqaFormulation::Direction3D => {
                let mut w: Vec<String> = SpatialLabel::ALL.iter().map(|l| l.word().into()).collect();
                w.extend(["[", "]", ","].map(String::from));
                w
            }
            VqaFormulation::Proximity => ProximityLabel::ALL.iter().map(|l| l.word().into()).collect(),
            VqaFormulation::Location3D => {
                let mut w: Vec<String> = (0..10).map(|d| d.to_string()).collect();
                w.extend(["[", "]", ",", "-"].map(String::from));
                w
            }
            VqaFormulation::Distance => (0..10).map(|d| d.to_string()).collect(),
        };
        let mut ids: Vec<u32> = words.iter().map(|w| self.index[w.as_str()]).collect();
        ids.sort_unstable();
        ids
    }

    /// Words in id order, as a JSON array.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.words).expect("strings serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::build(6, &Lexicon::default()).unwrap()
    }

    #[test]
    fn deterministic_builds() {
        assert_eq!(vocab(), vocab());
        assert!(vocab().len() < MAX_VOCAB);
    }

    #[test]
    fn round_trip_every_word() {
        let v = vocab();
        for (i, w) in v.words().iter().enumerate() {
            assert_eq!(v.id(w), Some(i as u32));
            assert_eq!(v.word(i as u32), Some(w.as_str()));
        }
    }

    #[test]
    fn labels_and_actions_covered() {
        let v = vocab();
        for l in SpatialLabel::ALL {
            assert!(v.answer.contains(v.id(l.word()).unwrap()));
        }
        for a in Action::ALL {
            assert!(v.action.contains(v.action_id(a)));
        }
        for f in VqaFormulation::ALL.into_iter().skip(1) {
            assert!(v.answer_ids(f).iter().all(|&i| v.answer.contains(i)));
        }
    }

    #[test]
    fn duplicate_lexicon_word_fails() {
        let mut lex = Lexicon::default();
        lex.beacon_name = "grasp".into();
        assert!(matches!(Vocabulary::build(6, &lex), Err(PromptError::DuplicateWord(_))));
    }

    #[test]
    fn json_dump_lists_words_in_id_order() {
        let v = vocab();
        let back: Vec<String> = serde_json::from_str(&v.to_json()).unwrap();
        assert_eq!(back, v.words());
    }
}
