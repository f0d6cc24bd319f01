//! Rule-based spatial-relation labels for every step of a demonstration.

mod annotate;
mod extract;
mod labels;
mod questions;
mod rules;

use thiserror::Error;

pub use annotate::{
    annotate_trajectory, label_for, proxy_object_positions, AnnotatedStep, AnnotatedTrajectory, PositionSource,
    ProxyPositions, QaRecord, ANNOTATED_FORMAT,
};
pub use extract::{extract_object_names, resolve_object};
pub use labels::{
    split_answer_text, Answer, Direction3D, DistanceBin, ProximityLabel, QuantizedOffset, SpatialLabel, VqaFormulation,
    OFFSET_LIMIT,
};
pub use questions::{question_template_words, question_words};
pub use rules::{
    label_direction_1d, label_direction_3d, label_distance, label_location_3d, label_proximity, position_difference,
    LabelRuleConfig,
};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("no lexicon object names in instruction {0:?}")]
    NoObjectNames(String),
    #[error("object {0:?} not found in scene")]
    UnresolvedObject(String),
    #[error("no gripper-event proxy position for {0:?}")]
    NoProxyPosition(String),
    #[error("invalid label config: {0}")]
    InvalidConfig(String),
}
