use serde::{Deserialize, Serialize};

use super::labels::{Direction3D, DistanceBin, ProximityLabel, QuantizedOffset, SpatialLabel, OFFSET_LIMIT};
use super::LabelError;
use crate::sim::Vec3;

/// Constants of the rule-based labeler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelRuleConfig {
    /// `[axis] = [positive word, negative word]`, axes in x, y, z order.
    pub axis_labels: [[SpatialLabel; 2]; 3],
    /// Axis order used to break ties between equal magnitudes.
    pub axis_priority: [usize; 3],
    /// Fractions of the workspace diagonal.
    pub near_threshold: f64,
    pub middle_threshold: f64,
    /// Grid cells per unit of quantized offset.
    pub location_cell: i32,
    pub workspace_diagonal: f64,
}

impl Default for LabelRuleConfig {
    fn default() -> Self {
        Self::for_world(6)
    }
}

impl LabelRuleConfig {
    pub fn for_world(world_size: i32) -> Self {
        Self {
            axis_labels: [
                [SpatialLabel::Right, SpatialLabel::Left],
                [SpatialLabel::Front, SpatialLabel::Back],
                [SpatialLabel::Up, SpatialLabel::Down],
            ],
            axis_priority: [0, 1, 2],
            near_threshold: 0.15,
            middle_threshold: 0.40,
            location_cell: 1,
            workspace_diagonal: f64::from(world_size - 1) * 3f64.sqrt(),
        }
    }

    pub fn validate(&self) -> Result<(), LabelError> {
        let mut words: Vec<SpatialLabel> = self.axis_labels.iter().flatten().copied().collect();
        words.sort();
        words.dedup();
        if words.len() != 6 || words.contains(&SpatialLabel::Grasped) {
            return Err(LabelError::InvalidConfig("axis labels must map onto the six direction words".into()));
        }
        let mut prio = self.axis_priority;
        prio.sort_unstable();
        if prio != [0, 1, 2] {
            return Err(LabelError::InvalidConfig("axis priority must be a permutation of 0,1,2".into()));
        }
        if !(0.0 < self.near_threshold && self.near_threshold < self.middle_threshold) {
            return Err(LabelError::InvalidConfig("proximity thresholds must be strictly increasing".into()));
        }
        if self.location_cell <= 0 || self.workspace_diagonal <= 0.0 {
            return Err(LabelError::InvalidConfig("location cell and diagonal must be positive".into()));
        }
        Ok(())
    }

    fn word(&self, axis: usize, value: i32) -> SpatialLabel {
        self.axis_labels[axis][usize::from(value < 0)]
    }
}

/// `gripper - object`, componentwise.
pub fn position_difference(gripper: Vec3, object: Vec3) -> Vec3 {
    gripper - object
}

/// Direction of the object relative to the gripper along the dominant axis of `d`.
///
/// The object's offset is `-d`; a zero component maps to the positive word.
pub fn label_direction_1d(d: Vec3, grasped: bool, config: &LabelRuleConfig) -> SpatialLabel {
    if grasped {
        return SpatialLabel::Grasped;
    }
    let offset = (-d).components();
    let mut best = config.axis_priority[0];
    for &axis in &config.axis_priority[1..] {
        if offset[axis].abs() > offset[best].abs() {
            best = axis;
        }
    }
    config.word(best, offset[best])
}

pub fn label_direction_3d(d: Vec3, grasped: bool, config: &LabelRuleConfig) -> Direction3D {
    if grasped {
        return Direction3D::Grasped;
    }
    let offset = (-d).components();
    Direction3D::Toward([0, 1, 2].map(|axis| config.word(axis, offset[axis])))
}

pub fn label_proximity(d: Vec3, grasped: bool, config: &LabelRuleConfig) -> ProximityLabel {
    if grasped {
        return ProximityLabel::Grasped;
    }
    let frac = d.norm() / config.workspace_diagonal;
    if frac < config.near_threshold {
        ProximityLabel::Near
    } else if frac < config.middle_threshold {
        ProximityLabel::Middle
    } else {
        ProximityLabel::Far
    }
}

/// `round((object - gripper) / h)` per axis, saturating at +-9.
pub fn label_location_3d(d: Vec3, config: &LabelRuleConfig) -> QuantizedOffset {
    let h = f64::from(config.location_cell);
    QuantizedOffset((-d).components().map(|c| {
        let q = (f64::from(c) / h).round() as i32;
        q.clamp(-OFFSET_LIMIT, OFFSET_LIMIT)
    }))
}

pub fn label_distance(d: Vec3, config: &LabelRuleConfig) -> DistanceBin {
    let bin = (10.0 * d.norm() / config.workspace_diagonal).floor();
    DistanceBin(bin.clamp(0.0, 9.0) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> LabelRuleConfig {
        LabelRuleConfig::default()
    }

    #[test]
    fn difference_examples() {
        assert_eq!(position_difference(Vec3::new(1, 2, 3), Vec3::new(1, 2, 3)), Vec3::ZERO);
        assert_eq!(position_difference(Vec3::new(5, 0, 0), Vec3::new(1, 0, 0)), Vec3::new(4, 0, 0));
    }

    #[test]
    fn direction_1d_examples() {
        assert_eq!(label_direction_1d(Vec3::new(7, 7, 7), true, &cfg()), SpatialLabel::Grasped);
        assert_eq!(label_direction_1d(Vec3::new(0, 0, -3), false, &cfg()), SpatialLabel::Up);
        assert_eq!(label_direction_1d(Vec3::new(2, -2, 0), false, &cfg()), SpatialLabel::Left);
        assert_eq!(label_direction_1d(Vec3::ZERO, false, &cfg()), SpatialLabel::Right);
    }

    #[test]
    fn direction_3d_examples() {
        let expected = Direction3D::Toward([SpatialLabel::Right, SpatialLabel::Front, SpatialLabel::Up]);
        assert_eq!(label_direction_3d(Vec3::new(-1, -1, -1), false, &cfg()), expected);
        assert_eq!(label_direction_3d(Vec3::new(-1, -1, -1), true, &cfg()), Direction3D::Grasped);
        let zero = Direction3D::Toward([SpatialLabel::Right, SpatialLabel::Front, SpatialLabel::Up]);
        assert_eq!(label_direction_3d(Vec3::ZERO, false, &cfg()), zero);
    }

    #[test]
    fn proximity_examples() {
        let c = cfg();
        assert_eq!(label_proximity(Vec3::ZERO, false, &c), ProximityLabel::Near);
        assert_eq!(label_proximity(Vec3::new(5, 5, 5), false, &c), ProximityLabel::Far);
        assert_eq!(label_proximity(Vec3::new(1, 1, 1), true, &c), ProximityLabel::Grasped);
    }

    #[test]
    fn location_examples() {
        let c = cfg();
        assert_eq!(label_location_3d(Vec3::ZERO, &c), QuantizedOffset([0, 0, 0]));
        assert_eq!(label_location_3d(Vec3::new(-1, 3, -4), &c), QuantizedOffset([1, -3, 4]));
        assert_eq!(label_location_3d(Vec3::new(-40, 25, 9), &c), QuantizedOffset([9, -9, -9]));
    }

    #[test]
    fn distance_examples() {
        let c = cfg();
        assert_eq!(label_distance(Vec3::ZERO, &c), DistanceBin(0));
        assert_eq!(label_distance(Vec3::new(5, 5, 5), &c), DistanceBin(9));
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.axis_labels[0] = [SpatialLabel::Up, SpatialLabel::Left];
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.middle_threshold = 0.1;
        assert!(c.validate().is_err());
        cfg().validate().unwrap();
    }

    fn small_vec() -> impl Strategy<Value = Vec3> {
        (-12i32..=12, -12i32..=12, -12i32..=12).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn difference_is_antisymmetric(a in small_vec(), b in small_vec()) {
            prop_assert_eq!(position_difference(a, b), -position_difference(b, a));
        }

        #[test]
        fn projection_consistency(d in small_vec()) {
            let [x, y, z] = d.components();
            prop_assume!(x.abs() > y.abs() && x.abs() > z.abs());
            let Direction3D::Toward(words) = label_direction_3d(d, false, &cfg()) else { unreachable!() };
            prop_assert_eq!(words[0], label_direction_1d(d, false, &cfg()));
        }

        #[test]
        fn proximity_and_distance_monotone(a in small_vec(), b in small_vec()) {
            let c = cfg();
            let (lo, hi) = if a.norm() <= b.norm() { (a, b) } else { (b, a) };
            let rank = |p: ProximityLabel| match p { ProximityLabel::Near => 0, ProximityLabel::Middle => 1, _ => 2 };
            prop_assert!(rank(label_proximity(lo, false, &c)) <= rank(label_proximity(hi, false, &c)));
            prop_assert!(label_distance(lo, &c) <= label_distance(hi, &c));
        }

        #[test]
        fn grasp_dominates(d in small_vec()) {
            let c = cfg();
            prop_assert_eq!(label_direction_1d(d, true, &c), SpatialLabel::Grasped);
            prop_assert_eq!(label_direction_3d(d, true, &c), Direction3D::Grasped);
            prop_assert_eq!(label_proximity(d, true, &c), ProximityLabel::Grasped);
        }
    }
}
