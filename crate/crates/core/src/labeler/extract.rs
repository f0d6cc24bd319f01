use crate::sim::{Lexicon, Scene, SceneObject};

use super::LabelError;

/// Lexicon noun phrases ("red cube" or bare "plate") in order of first
/// appearance, duplicates removed. A color directly followed by a name forms
/// one phrase.
pub fn extract_object_names<S: AsRef<str>>(instruction: &[S], lexicon: &Lexicon) -> Result<Vec<String>, LabelError> {
    let words: Vec<&str> = instruction.iter().map(AsRef::as_ref).collect();
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let phrase = if lexicon.is_color(words[i]) && words.get(i + 1).is_some_and(|w| lexicon.is_name(w)) {
            i += 1;
            format!("{} {}", words[i - 1], words[i])
        } else if lexicon.is_name(words[i]) {
            words[i].to_string()
        } else {
            i += 1;
            continue;
        };
        i += 1;
        if !out.contains(&phrase) {
            out.push(phrase);
        }
    }
    if out.is_empty() {
        return Err(LabelError::NoObjectNames(words.join(" ")));
    }
    Ok(out)
}

/// Scene object a phrase refers to: color and name for two-word phrases, name
/// only otherwise. Ties resolve to the lowest id.
pub fn resolve_object<'a>(scene: &'a Scene, phrase: &str) -> Option<&'a SceneObject> {
    let mut candidates: Vec<&SceneObject> = match phrase.split_once(' ') {
        Some((color, name)) => scene.objects.iter().filter(|o| o.color == color && o.name == name).collect(),
        None => scene.objects.iter().filter(|o| o.name == phrase).collect(),
    };
    candidates.sort_by_key(|o| o.id);
    candidates.first().copied()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(s: &str) -> Vec<&str> {
        s.split(' ').collect()
    }

    #[test]
    fn extracts_color_name_and_bare_name() {
        let lex = Lexicon::default();
        let got = extract_object_names(&split("pick up the red cube and place it on the plate"), &lex).unwrap();
        assert_eq!(got, ["red cube", "plate"]);
        assert_eq!(extract_object_names(&split("push the plate"), &lex).unwrap(), ["plate"]);
    }

    #[test]
    fn duplicates_removed_in_order() {
        let lex = Lexicon::default();
        let got = extract_object_names(&split("put the blue ball near the plate then the blue ball again"), &lex).unwrap();
        assert_eq!(got, ["blue ball", "plate"]);
    }

    #[test]
    fn no_lexicon_words_is_error() {
        let lex = Lexicon::default();
        assert!(matches!(extract_object_names(&split("open the door"), &lex), Err(LabelError::NoObjectNames(_))));
    }
}
