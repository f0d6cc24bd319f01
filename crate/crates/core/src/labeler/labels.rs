use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Coarse direction answer vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpatialLabel {
    Right,
    Left,
    Up,
    Down,
    Front,
    Back,
    Grasped,
}

impl SpatialLabel {
    pub const ALL: [SpatialLabel; 7] = [
        SpatialLabel::Right,
        SpatialLabel::Left,
        SpatialLabel::Up,
        SpatialLabel::Down,
        SpatialLabel::Front,
        SpatialLabel::Back,
        SpatialLabel::Grasped,
    ];
    pub const DIRECTIONS: [SpatialLabel; 6] = [
        SpatialLabel::Right,
        SpatialLabel::Left,
        SpatialLabel::Up,
        SpatialLabel::Down,
        SpatialLabel::Front,
        SpatialLabel::Back,
    ];

    pub fn word(self) -> &'static str {
        match self {
            SpatialLabel::Right => "right",
            SpatialLabel::Left => "left",
            SpatialLabel::Up => "up",
            SpatialLabel::Down => "down",
            SpatialLabel::Front => "front",
            SpatialLabel::Back => "back",
            SpatialLabel::Grasped => "grasped",
        }
    }

    pub fn from_word(w: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.word() == w)
    }

    /// right <-> left, up <-> down, front <-> back.
    pub fn mirrored(self) -> Self {
        match self {
            SpatialLabel::Right => SpatialLabel::Left,
            SpatialLabel::Left => SpatialLabel::Right,
            SpatialLabel::Up => SpatialLabel::Down,
            SpatialLabel::Down => SpatialLabel::Up,
            SpatialLabel::Front => SpatialLabel::Back,
            SpatialLabel::Back => SpatialLabel::Front,
            SpatialLabel::Grasped => SpatialLabel::Grasped,
        }
    }
}

/// Per-axis direction words in x, y, z order, or grasped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction3D {
    Grasped,
    Toward([SpatialLabel; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProximityLabel {
    Far,
    Middle,
    Near,
    Grasped,
}

impl ProximityLabel {
    pub const ALL: [ProximityLabel; 4] =
        [ProximityLabel::Far, ProximityLabel::Middle, ProximityLabel::Near, ProximityLabel::Grasped];

    pub fn word(self) -> &'static str {
        match self {
            ProximityLabel::Far => "far",
            ProximityLabel::Middle => "middle",
            ProximityLabel::Near => "near",
            ProximityLabel::Grasped => "grasped",
        }
    }

    pub fn from_word(w: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.word() == w)
    }
}

pub const OFFSET_LIMIT: i32 = 9;

/// Object offset from the gripper in location cells, each component in [-9, 9].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantizedOffset(pub [i32; 3]);

/// floor(10 * |d| / diagonal), clamped to 9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DistanceBin(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VqaFormulation {
    /// No question/answer segment (baseline).
    #[default]
    None,
    Direction1D,
    Direction3D,
    Proximity,
    Location3D,
    Distance,
}

impl VqaFormulation {
    pub const ALL: [VqaFormulation; 6] = [
        VqaFormulation::None,
        VqaFormulation::Direction1D,
        VqaFormulation::Direction3D,
        VqaFormulation::Proximity,
        VqaFormulation::Location3D,
        VqaFormulation::Distance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VqaFormulation::None => "none",
            VqaFormulation::Direction1D => "direction1d",
            VqaFormulation::Direction3D => "direction3d",
            VqaFormulation::Proximity => "proximity",
            VqaFormulation::Location3D => "location3d",
            VqaFormulation::Distance => "distance",
        }
    }

    /// Row label in ablation tables.
    pub fn setting(self) -> &'static str {
        match self {
            VqaFormulation::None => "Baseline",
            VqaFormulation::Direction1D => "1D Direct.",
            VqaFormulation::Direction3D => "3D Direct.",
            VqaFormulation::Proximity => "Proximity",
            VqaFormulation::Location3D => "3D Locat.",
            VqaFormulation::Distance => "Distance",
        }
    }

    pub fn is_none(self) -> bool {
        self == VqaFormulation::None
    }
}

impl fmt::Display for VqaFormulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VqaFormulation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown formulation {s:?}"))
    }
}

/// A ground-truth or generated answer of any formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Answer {
    Direction1D(SpatialLabel),
    Direction3D(Direction3D),
    Proximity(ProximityLabel),
    Location3D(QuantizedOffset),
    Distance(DistanceBin),
}

fn bracketed(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = vec!["[".to_string()];
    for (i, item) in items.into_iter().enumerate() {
        if i > 0 {
            out.push(",".into());
        }
        out.push(item);
    }
    out.push("]".into());
    out
}

impl Answer {
    pub fn formulation(&self) -> VqaFormulation {
        match self {
            Answer::Direction1D(_) => VqaFormulation::Direction1D,
            Answer::Direction3D(_) => VqaFormulation::Direction3D,
            Answer::Proximity(_) => VqaFormulation::Proximity,
            Answer::Location3D(_) => VqaFormulation::Location3D,
            Answer::Distance(_) => VqaFormulation::Distance,
        }
    }

    pub fn is_grasped(&self) -> bool {
        matches!(
            self,
            Answer::Direction1D(SpatialLabel::Grasped)
                | Answer::Direction3D(Direction3D::Grasped)
                | Answer::Proximity(ProximityLabel::Grasped)
        )
    }

    /// Token words; bracketed triples are split into brackets, commas, signs and digits.
    pub fn words(&self) -> Vec<String> {
        match *self {
            Answer::Direction1D(l) => vec![l.word().into()],
            Answer::Direction3D(Direction3D::Grasped) => vec!["grasped".into()],
            Answer::Direction3D(Direction3D::Toward(ls)) => bracketed(ls.map(|l| l.word().to_string())),
            Answer::Proximity(p) => vec![p.word().into()],
            Answer::Location3D(QuantizedOffset(c)) => {
                let mut out = vec!["[".to_string()];
                for (i, v) in c.into_iter().enumerate() {
                    if i > 0 {
                        out.push(",".into());
                    }
                    if v < 0 {
                        out.push("-".into());
                    }
                    out.push(v.abs().to_string());
                }
                out.push("]".into());
                out
            }
            Answer::Distance(DistanceBin(b)) => vec![b.to_string()],
        }
    }

    /// Inverse of [`Answer::words`]; `None` for anything malformed.
    pub fn from_words<S: AsRef<str>>(formulation: VqaFormulation, words: &[S]) -> Option<Answer> {
        let w: Vec<&str> = words.iter().map(AsRef::as_ref).collect();
        match formulation {
            VqaFormulation::None => None,
            VqaFormulation::Direction1D => match w.as_slice() {
                [x] => SpatialLabel::from_word(x).map(Answer::Direction1D),
                _ => None,
            },
            VqaFormulation::Direction3D => match w.as_slice() {
                ["grasped"] => Some(Answer::Direction3D(Direction3D::Grasped)),
                ["[", a, ",", b, ",", c, "]"] => {
                    let parse = |s: &str| SpatialLabel::from_word(s).filter(|l| *l != SpatialLabel::Grasped);
                    Some(Answer::Direction3D(Direction3D::Toward([parse(a)?, parse(b)?, parse(c)?])))
                }
                _ => None,
            },
            VqaFormulation::Proximity => match w.as_slice() {
                [x] => ProximityLabel::from_word(x).map(Answer::Proximity),
                _ => None,
            },
            VqaFormulation::Location3D => {
                let inner = w.strip_prefix(&["["])?.strip_suffix(&["]"])?;
                let mut vals = Vec::new();
                for part in inner.split(|t| *t == ",") {
                    let v = match part {
                        ["-", d] => -parse_digit(d)?,
                        [d] => parse_digit(d)?,
                        _ => return None,
                    };
                    vals.push(v);
                }
                let c: [i32; 3] = vals.try_into().ok()?;
                Some(Answer::Location3D(QuantizedOffset(c)))
            }
            VqaFormulation::Distance => match w.as_slice() {
                [d] => parse_digit(d).map(|v| Answer::Distance(DistanceBin(v as u8))),
                _ => None,
            },
        }
    }

    /// Parses the compact text form written into annotated datasets.
    pub fn parse(formulation: VqaFormulation, text: &str) -> Option<Answer> {
        Self::from_words(formulation, &split_answer_text(text))
    }
}

fn parse_digit(s: &str) -> Option<i32> {
    match s.as_bytes() {
        [b @ b'0'..=b'9'] => Some(i32::from(b - b'0')),
        _ => None,
    }
}

/// Alphabetic runs become words; every other non-space character is its own token.
pub fn split_answer_text(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_ascii_alphabetic() {
            word.push(ch);
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

impl fmt::Display for Answer {
    /// Compact form: `right`, `[right,front,up]`, `[1,-3,4]`, `near`, `3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.words().concat())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_text_round_trip() {
        let cases = [
            Answer::Direction1D(SpatialLabel::Grasped),
            Answer::Direction3D(Direction3D::Toward([SpatialLabel::Right, SpatialLabel::Front, SpatialLabel::Up])),
            Answer::Direction3D(Direction3D::Grasped),
            Answer::Proximity(ProximityLabel::Middle),
            Answer::Location3D(QuantizedOffset([1, -3, 4])),
            Answer::Distance(DistanceBin(7)),
        ];
        for a in cases {
            let text = a.to_string();
            assert_eq!(Answer::parse(a.formulation(), &text), Some(a), "{text}");
        }
        assert_eq!(Answer::Location3D(QuantizedOffset([1, -3, 4])).to_string(), "[1,-3,4]");
        assert_eq!(
            Answer::Location3D(QuantizedOffset([1, -3, 4])).words(),
            ["[", "1", ",", "-", "3", ",", "4", "]"]
        );
    }

    #[test]
    fn malformed_answers_rejected() {
        assert_eq!(Answer::from_words(VqaFormulation::Direction1D, &["near"]), None);
        assert_eq!(Answer::from_words(VqaFormulation::Location3D, &["[", "1", ",", "2", "]"]), None);
        assert_eq!(Answer::from_words(VqaFormulation::Distance, &["10"]), None);
        assert_eq!(Answer::from_words(VqaFormulation::None, &["right"]), None);
    }

    #[test]
    fn formulation_names_parse() {
        for f in VqaFormulation::ALL {
            assert_eq!(f.name().parse::<VqaFormulation>().unwrap(), f);
        }
        assert!("sideways".parse::<VqaFormulation>().is_err());
    }
}
