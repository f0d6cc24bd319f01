use crate::labeler::{question_words, Answer, VqaFormulation};
use crate::sim::{Action, Lexicon};

use super::vocab::Vocabulary;
use super::PromptError;

/// Question template with the object slot filled, as token ids.
pub fn render_question(
    vocab: &Vocabulary,
    lexicon: &Lexicon,
    formulation: VqaFormulation,
    object: &str,
) -> Result<Vec<u32>, PromptError> {
    let known = object.split(' ').all(|w| lexicon.is_name(w) || lexicon.is_color(w));
    if !known || object.is_empty() {
        return Err(PromptError::UnknownObject(object.to_string()));
    }
    let words = question_words(formulation, object).ok_or(PromptError::NoQuestion)?;
    vocab.encode(&words)
}

pub fn render_answer(vocab: &Vocabulary, answer: &Answer) -> Vec<u32> {
    vocab.encode(&answer.words()).expect("answer words are always in the vocabulary")
}

/// Next `h` actions as tokens, padded with the action pad past the end.
pub fn actions_to_tokens(vocab: &Vocabulary, actions: &[Action], h: usize) -> Vec<u32> {
    (0..h)
        .map(|i| actions.get(i).map_or(vocab.action_pad(), |&a| vocab.action_id(a)))
        .collect()
}

/// Allowed next answer words given the words decoded so far; `None` once the
/// answer is complete.
pub fn answer_continuations<S: AsRef<str>>(formulation: VqaFormulation, prefix: &[S]) -> Option<Vec<&'static str>> {
    const DIRS: [&str; 6] = ["right", "left", "up", "down", "front", "back"];
    const DIGITS: [&str; 10] = ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9"];
    let p: Vec<&str> = prefix.iter().map(AsRef::as_ref).collect();
    match formulation {
        VqaFormulation::None => None,
        VqaFormulation::Direction1D => p.is_empty().then(|| {
            let mut v = DIRS.to_vec();
            v.push("grasped");
            v
        }),
        VqaFormulation::Proximity => p.is_empty().then(|| vec!["far", "middle", "near", "grasped"]),
        VqaFormulation::Distance => p.is_empty().then(|| DIGITS.to_vec()),
        VqaFormulation::Direction3D => match (p.len(), p.first()) {
            (0, _) => Some(vec!["[", "grasped"]),
            (_, Some(&"grasped")) | (7.., _) => None,
            (1 | 3 | 5, _) => Some(DIRS.to_vec()),
            (2 | 4, _) => Some(vec![","]),
            _ => Some(vec!["]"]),
        },
        VqaFormulation::Location3D => {
            if p.is_empty() {
                return Some(vec!["["]);
            }
            if p.last() == Some(&"]") {
                return None;
            }
            let completed = p.iter().filter(|w| **w == ",").count();
            let last = *p.last().expect("nonempty");
            if last == "[" || last == "," {
                let mut v = vec!["-"];
                v.extend(DIGITS);
                Some(v)
            } else if last == "-" {
                Some(DIGITS.to_vec())
            } else if completed < 2 {
                Some(vec![","])
            } else {
                Some(vec!["]"])
            }
        }
    }
}
