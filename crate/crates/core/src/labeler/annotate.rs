use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::extract::{extract_object_names, resolve_object};
use super::labels::{Answer, VqaFormulation};
use super::questions::question_words;
use super::rules::{
    label_direction_1d, label_direction_3d, label_distance, label_location_3d, label_proximity, position_difference,
    LabelRuleConfig,
};
use super::LabelError;
use crate::sim::{Action, Lexicon, Scene, Task, Trajectory, Vec3};

pub const ANNOTATED_FORMAT: &str = "inspire-annotated";

/// Ground-truth answer of `formulation` for an object at `object` seen from `gripper`.
pub fn label_for(
    formulation: VqaFormulation,
    gripper: Vec3,
    object: Vec3,
    grasped: bool,
    config: &LabelRuleConfig,
) -> Option<Answer> {
    let d = position_difference(gripper, object);
    Some(match formulation {
        VqaFormulation::None => return None,
        VqaFormulation::Direction1D => Answer::Direction1D(label_direction_1d(d, grasped, config)),
        VqaFormulation::Direction3D => Answer::Direction3D(label_direction_3d(d, grasped, config)),
        VqaFormulation::Proximity => Answer::Proximity(label_proximity(d, grasped, config)),
        VqaFormulation::Location3D => Answer::Location3D(label_location_3d(d, config)),
        VqaFormulation::Distance => Answer::Distance(label_distance(d, config)),
    })
}

/// Where object positions come from when labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositionSource {
    /// Simulator object poses.
    #[default]
    GroundTruth,
    /// Gripper position at the gripper closing/opening instants.
    GraspProxy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub object: String,
    pub question: String,
    pub answer: String,
}

impl QaRecord {
    pub fn question_words(&self) -> Vec<String> {
        self.question.split(' ').map(str::to_string).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedStep {
    pub scene: Scene,
    pub action: Action,
    pub qa: Vec<QaRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedTrajectory {
    pub task: Task,
    pub steps: Vec<AnnotatedStep>,
    pub final_scene: Scene,
}

impl AnnotatedTrajectory {
    /// Trajectory without the QA annotations.
    pub fn trajectory(&self) -> Trajectory {
        Trajectory {
            task: self.task.clone(),
            steps: self
                .steps
                .iter()
                .map(|s| crate::sim::TrajectoryStep { scene: s.scene.clone(), action: s.action })
                .collect(),
            final_scene: self.final_scene.clone(),
        }
    }

    /// Empty QA lists on every step (baseline formulation).
    pub fn unannotated(traj: &Trajectory) -> Self {
        Self {
            task: traj.task.clone(),
            steps: traj
                .steps
                .iter()
                .map(|s| AnnotatedStep { scene: s.scene.clone(), action: s.action, qa: Vec::new() })
                .collect(),
            final_scene: traj.final_scene.clone(),
        }
    }
}

/// Gripper-event proxy positions keyed by object phrase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProxyPositions {
    pub positions: BTreeMap<String, Vec3>,
    /// Phrase of the object the first closing event is attributed to.
    pub grasped_object: Option<String>,
    pub warnings: Vec<String>,
}

/// Object positions estimated from gripper events only, ignoring object poses.
///
/// The first closing event (open -> closed) is attributed to the first object
/// named in the instruction, the first opening event after it to the second.
pub fn proxy_object_positions(traj: &Trajectory, lexicon: &Lexicon) -> ProxyPositions {
    let mut out = ProxyPositions::default();
    let names = match extract_object_names(&traj.task.instruction, lexicon) {
        Ok(n) => n,
        Err(e) => {
            out.warnings.push(e.to_string());
            return out;
        }
    };
    let scenes: Vec<&Scene> = traj.steps.iter().map(|s| &s.scene).chain(std::iter::once(&traj.final_scene)).collect();
    let mut grasp_at = None;
    let mut release_at = None;
    for pair in scenes.windows(2) {
        let (before, after) = (pair[0], pair[1]);
        if !before.gripper_closed && after.gripper_closed && grasp_at.is_none() {
            grasp_at = Some(after.gripper_position);
        } else if before.gripper_closed && !after.gripper_closed && grasp_at.is_some() && release_at.is_none() {
            release_at = Some(after.gripper_position);
        }
    }
    if grasp_at.is_none() && release_at.is_none() {
        let msg = format!("no gripper transitions in trajectory {:?}", traj.task.instruction_text());
        log::warn!("{msg}");
        out.warnings.push(msg);
        return out;
    }
    if let (Some(p), Some(name)) = (grasp_at, names.first()) {
        out.positions.insert(name.clone(), p);
        out.grasped_object = Some(name.clone());
    }
    if let (Some(p), Some(name)) = (release_at, names.get(1)) {
        out.positions.insert(name.clone(), p);
    }
    out
}

/// Per-step QA for every object named in the instruction.
pub fn annotate_trajectory(
    traj: &Trajectory,
    formulation: VqaFormulation,
    config: &LabelRuleConfig,
    lexicon: &Lexicon,
    source: PositionSource,
) -> Result<AnnotatedTrajectory, LabelError> {
    if formulation.is_none() {
        return Ok(AnnotatedTrajectory::unannotated(traj));
    }
    let names = extract_object_names(&traj.task.instruction, lexicon)?;
    let proxy = match source {
        PositionSource::GroundTruth => None,
        PositionSource::GraspProxy => Some(proxy_object_positions(traj, lexicon)),
    };
    let mut steps = Vec::with_capacity(traj.steps.len());
    for step in &traj.steps {
        let scene = &step.scene;
        let mut qa = Vec::with_capacity(names.len());
        for name in &names {
            let (position, grasped) = match &proxy {
                None => {
                    let obj = resolve_object(scene, name).ok_or_else(|| LabelError::UnresolvedObject(name.clone()))?;
                    (obj.position, scene.held_object == Some(obj.id))
                }
                Some(p) => {
                    let pos = *p.positions.get(name).ok_or_else(|| LabelError::NoProxyPosition(name.clone()))?;
                    // a held object travels with the gripper
                    let held = scene.gripper_closed && p.grasped_object.as_ref() == Some(name);
                    (if held { scene.gripper_position } else { pos }, held)
                }
            };
            let answer = label_for(formulation, scene.gripper_position, position, grasped, config)
                .expect("formulation is not None");
            let question = question_words(formulation, name).expect("formulation is not None").join(" ");
            qa.push(QaRecord { object: name.clone(), question, answer: answer.to_string() });
        }
        steps.push(AnnotatedStep { scene: scene.clone(), action: step.action, qa });
    }
    Ok(AnnotatedTrajectory { task: traj.task.clone(), steps, final_scene: traj.final_scene.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeler::labels::SpatialLabel;
    use crate::sim::{generate_demonstrations, SceneGenConfig, TrajectoryStep};

    fn demos(n: usize) -> Vec<Trajectory> {
        generate_demonstrations(n, &SceneGenConfig { seed: 5, ..Default::default() }).unwrap()
    }

    #[test]
    fn one_pair_per_object_per_step() {
        let lex = Lexicon::default();
        let cfg = LabelRuleConfig::default();
        for traj in demos(20) {
            let names = extract_object_names(&traj.task.instruction, &lex).unwrap();
            let ann = annotate_trajectory(&traj, VqaFormulation::Direction1D, &cfg, &lex, PositionSource::GroundTruth)
                .unwrap();
            let total: usize = ann.steps.iter().map(|s| s.qa.len()).sum();
            assert_eq!(total, names.len() * traj.len());
        }
    }

    #[test]
    fn grasp_override_only_for_held_object() {
        let lex = Lexicon::default();
        let cfg = LabelRuleConfig::default();
        let traj = demos(30).into_iter().find(|t| t.task.destination_object_id.is_some()).unwrap();
        let ann =
            annotate_trajectory(&traj, VqaFormulation::Direction1D, &cfg, &lex, PositionSource::GroundTruth).unwrap();
        let held = ann.steps.iter().find(|s| s.scene.held_object.is_some()).expect("a holding step");
        assert_eq!(held.qa[0].answer, "grasped");
        assert_ne!(held.qa[1].answer, "grasped");
    }

    #[test]
    fn answers_rederivable_from_snapshots() {
        let lex = Lexicon::default();
        let cfg = LabelRuleConfig::default();
        for f in VqaFormulation::ALL.into_iter().skip(1) {
            for traj in demos(10) {
                let ann = annotate_trajectory(&traj, f, &cfg, &lex, PositionSource::GroundTruth).unwrap();
                for step in &ann.steps {
                    for qa in &step.qa {
                        let obj = resolve_object(&step.scene, &qa.object).unwrap();
                        let grasped = step.scene.held_object == Some(obj.id);
                        let d = position_difference(step.scene.gripper_position, obj.position);
                        let expected = match f {
                            VqaFormulation::Direction1D => Answer::Direction1D(label_direction_1d(d, grasped, &cfg)),
                            VqaFormulation::Direction3D => Answer::Direction3D(label_direction_3d(d, grasped, &cfg)),
                            VqaFormulation::Proximity => Answer::Proximity(label_proximity(d, grasped, &cfg)),
                            VqaFormulation::Location3D => Answer::Location3D(label_location_3d(d, &cfg)),
                            VqaFormulation::Distance => Answer::Distance(label_distance(d, &cfg)),
                            VqaFormulation::None => unreachable!(),
                        };
                        assert_eq!(Answer::parse(f, &qa.answer), Some(expected));
                    }
                }
            }
        }
    }

    #[test]
    fn proxy_matches_true_position_at_grasp() {
        let lex = Lexicon::default();
        for traj in demos(100) {
            let proxy = proxy_object_positions(&traj, &lex);
            let name = proxy.grasped_object.clone().unwrap();
            let target = traj.steps[0].scene.object(traj.task.target_object_id).unwrap();
            assert_eq!(name, target.phrase());
            assert_eq!(proxy.positions[&name], target.position);
        }
    }

    #[test]
    fn no_transitions_gives_empty_map_and_warning() {
        let lex = Lexicon::default();
        let mut traj = demos(1).remove(0);
        let s0 = traj.steps[0].scene.clone();
        traj.steps = vec![TrajectoryStep { scene: s0.clone(), action: crate::sim::Action::MoveXPos }];
        traj.final_scene = s0;
        let proxy = proxy_object_positions(&traj, &lex);
        assert!(proxy.positions.is_empty());
        assert_eq!(proxy.warnings.len(), 1);
    }

    #[test]
    fn baseline_formulation_has_no_qa() {
        let lex = Lexicon::default();
        let traj = demos(1).remove(0);
        let ann = annotate_trajectory(&traj, VqaFormulation::None, &LabelRuleConfig::default(), &lex, PositionSource::GroundTruth)
            .unwrap();
        assert!(ann.steps.iter().all(|s| s.qa.is_empty()));
        assert_eq!(ann.trajectory(), traj);
    }

    #[test]
    fn proxy_grasped_label_is_grasped() {
        let lex = Lexicon::default();
        let cfg = LabelRuleConfig::default();
        let traj = demos(3).remove(0);
        let ann =
            annotate_trajectory(&traj, VqaFormulation::Direction1D, &cfg, &lex, PositionSource::GraspProxy).unwrap();
        let held = ann.steps.iter().find(|s| s.scene.gripper_closed).unwrap();
        assert_eq!(held.qa[0].answer, SpatialLabel::Grasped.word());
    }

    #[test]
    fn proxy_tracks_held_object_for_offset_formulations() {
        let lex = Lexicon::default();
        let cfg = LabelRuleConfig::default();
        for traj in demos(20) {
            let grasp = traj.steps.iter().position(|s| s.action == crate::sim::Action::Grasp).unwrap();
            for f in [VqaFormulation::Location3D, VqaFormulation::Distance] {
                let truth = annotate_trajectory(&traj, f, &cfg, &lex, PositionSource::GroundTruth).unwrap();
                let proxy = annotate_trajectory(&traj, f, &cfg, &lex, PositionSource::GraspProxy).unwrap();
                for (a, b) in truth.steps[grasp..].iter().zip(&proxy.steps[grasp..]) {
                    assert_eq!(a.qa[0], b.qa[0]);
                }
            }
        }
    }
}
