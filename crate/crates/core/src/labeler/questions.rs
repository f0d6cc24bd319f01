use super::labels::VqaFormulation;

/// Question words for `object` (a possibly multi-word phrase). `None` for the
/// baseline formulation.
pub fn question_words(formulation: VqaFormulation, object: &str) -> Option<Vec<String>> {
    let text = match formulation {
        VqaFormulation::None => return None,
        VqaFormulation::Direction1D => format!("in which direction is the {object} relative to the robot ?"),
        VqaFormulation::Direction3D => format!("in which direction is {object} relative to the robot ? x , y , z :"),
        VqaFormulation::Proximity => format!("what is the distance between the robot and {object} ?"),
        VqaFormulation::Location3D => {
            format!("what is the accurate posi. of {object} relat. to the robot ? x , y , z :")
        }
        VqaFormulation::Distance => format!("what is the accurate distance between the robot and {object} ?"),
    };
    Some(text.split(' ').map(str::to_string).collect())
}

/// Fixed words of every question template (object slot excluded).
pub fn question_template_words() -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for f in VqaFormulation::ALL {
        for w in question_words(f, "").into_iter().flatten() {
            if !w.is_empty() && !out.contains(&w) {
                out.push(w);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_question_text() {
        let q = question_words(VqaFormulation::Direction1D, "red cube").unwrap().join(" ");
        assert_eq!(q, "in which direction is the red cube relative to the robot ?");
        let q = question_words(VqaFormulation::Proximity, "plate").unwrap().join(" ");
        assert_eq!(q, "what is the distance between the robot and plate ?");
        let q = question_words(VqaFormulation::Distance, "plate").unwrap().join(" ");
        assert_eq!(q, "what is the accurate distance between the robot and plate ?");
        assert!(question_words(VqaFormulation::None, "plate").is_none());
    }

    #[test]
    fn template_words_exclude_empty_slot() {
        let w = question_template_words();
        assert!(w.contains(&"posi.".to_string()));
        assert!(!w.iter().any(String::is_empty));
    }
}
