use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::SimError;

/// Integer grid coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0, y: 0, z: 0 };

    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn components(self) -> [i32; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_components(c: [i32; 3]) -> Self {
        Self::new(c[0], c[1], c[2])
    }

    pub fn manhattan(self, other: Vec3) -> i32 {
        let d = self - other;
        d.x.abs() + d.y.abs() + d.z.abs()
    }

    pub fn chebyshev(self, other: Vec3) -> i32 {
        let d = self - other;
        d.x.abs().max(d.y.abs()).max(d.z.abs())
    }

    pub fn norm(self) -> f64 {
        let [x, y, z] = self.components().map(f64::from);
        (x * x + y * y + z * z).sqrt()
    }

    pub fn in_bounds(self, world_size: i32) -> bool {
        self.components().iter().all(|&c| (0..world_size).contains(&c))
    }

    pub fn clamped(self, world_size: i32) -> Self {
        Self::from_components(self.components().map(|c| c.clamp(0, world_size - 1)))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub name: String,
    pub color: String,
    pub position: Vec3,
    pub is_beacon: bool,
}

impl SceneObject {
    /// "red cube" style phrase used by instructions and annotations.
    pub fn phrase(&self) -> String {
        format!("{} {}", self.color, self.name)
    }
}

/// Inclusive axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub min: Vec3,
    pub max: Vec3,
}

impl GoalRegion {
    pub fn cell(p: Vec3) -> Self {
        Self { min: p, max: p }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }

    /// Integer center, rounding toward `min` on even extents.
    pub fn center(&self) -> Vec3 {
        Vec3::new(
            (self.min.x + self.max.x).div_euclid(2),
            (self.min.y + self.max.y).div_euclid(2),
            (self.min.z + self.max.z).div_euclid(2),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub world_size: i32,
    pub objects: Vec<SceneObject>,
    pub gripper_position: Vec3,
    pub gripper_closed: bool,
    pub held_object: Option<u32>,
    pub goal_region: GoalRegion,
}

impl Scene {
    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn beacon(&self) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.is_beacon)
    }

    /// The resting (not held) object occupying `cell`, if any.
    pub fn resting_object_at(&self, cell: Vec3) -> Option<&SceneObject> {
        self.objects
            .iter()
            .find(|o| o.position == cell && Some(o.id) != self.held_object)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidScene(msg));
        if self.world_size < 4 {
            return bad(format!("world_size {} < 4", self.world_size));
        }
        if !self.gripper_position.in_bounds(self.world_size) {
            return bad(format!("gripper {} out of bounds", self.gripper_position));
        }
        if self.objects.iter().filter(|o| o.is_beacon).count() > 1 {
            return bad("more than one beacon".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !o.position.in_bounds(self.world_size) {
                return bad(format!("object {} at {} out of bounds", o.id, o.position));
            }
            for p in &self.objects[i + 1..] {
                if p.id == o.id {
                    return bad(format!("duplicate object id {}", o.id));
                }
                let one_held = Some(o.id) == self.held_object || Some(p.id) == self.held_object;
                if p.position == o.position && !one_held {
                    return bad(format!("objects {} and {} share cell {}", o.id, p.id, o.position));
                }
            }
        }
        if let Some(h) = self.held_object {
            let Some(obj) = self.object(h) else {
                return bad(format!("held object {h} missing"));
            };
            if !self.gripper_closed {
                return bad("held object with open gripper".into());
            }
            if obj.position != self.gripper_position {
                return bad(format!("held object {h} detached from gripper"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub instruction: Vec<String>,
    pub target_object_id: u32,
    pub destination_object_id: Option<u32>,
}

impl Task {
    pub fn instruction_text(&self) -> String {
        self.instruction.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    MoveXPos,
    MoveXNeg,
    MoveYPos,
    MoveYNeg,
    MoveZPos,
    MoveZNeg,
    Grasp,
    Release,
}

impl Action {
    pub const ALL: [Action; 8] = [
        Action::MoveXPos,
        Action::MoveXNeg,
        Action::MoveYPos,
        Action::MoveYNeg,
        Action::MoveZPos,
        Action::MoveZNeg,
        Action::Grasp,
        Action::Release,
    ];

    /// Lower-case token word.
    pub fn word(self) -> &'static str {
        match self {
            Action::MoveXPos => "movexpos",
            Action::MoveXNeg => "movexneg",
            Action::MoveYPos => "moveypos",
            Action::MoveYNeg => "moveyneg",
            Action::MoveZPos => "movezpos",
            Action::MoveZNeg => "movezneg",
            Action::Grasp => "grasp",
            Action::Release => "release",
        }
    }

    pub fn from_word(word: &str) -> Option<Action> {
        Self::ALL.into_iter().find(|a| a.word() == word)
    }

    pub fn delta(self) -> Option<Vec3> {
        Some(match self {
            Action::MoveXPos => Vec3::new(1, 0, 0),
            Action::MoveXNeg => Vec3::new(-1, 0, 0),
            Action::MoveYPos => Vec3::new(0, 1, 0),
            Action::MoveYNeg => Vec3::new(0, -1, 0),
            Action::MoveZPos => Vec3::new(0, 0, 1),
            Action::MoveZNeg => Vec3::new(0, 0, -1),
            Action::Grasp | Action::Release => return None,
        })
    }

    /// Unit move along `axis` (0 = x, 1 = y, 2 = z) in the direction of `sign`.
    pub fn toward(axis: usize, positive: bool) -> Action {
        match (axis, positive) {
            (0, true) => Action::MoveXPos,
            (0, false) => Action::MoveXNeg,
            (1, true) => Action::MoveYPos,
            (1, false) => Action::MoveYNeg,
            (2, true) => Action::MoveZPos,
            (2, false) => Action::MoveZNeg,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub scene: Scene,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task: Task,
    pub steps: Vec<TrajectoryStep>,
    pub final_scene: Scene,
}

impl Trajectory {
    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.steps.iter().map(|s| s.action)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec3_metrics() {
        let a = Vec3::new(1, -2, 3);
        let b = Vec3::new(4, 0, 3);
        assert_eq!(a.manhattan(b), 5);
        assert_eq!(a.chebyshev(b), 3);
        assert_eq!(-(a - b), b - a);
    }

    #[test]
    fn action_words_round_trip() {
        for a in Action::ALL {
            assert_eq!(Action::from_word(a.word()), Some(a));
        }
        assert_eq!(serde_json::to_string(&Action::MoveXPos).unwrap(), "\"MoveXPos\"");
    }

    #[test]
    fn goal_center_of_single_cell() {
        let g = GoalRegion::cell(Vec3::new(2, 3, 1));
        assert_eq!(g.center(), Vec3::new(2, 3, 1));
        assert!(g.contains(Vec3::new(2, 3, 1)));
        assert!(!g.contains(Vec3::new(2, 3, 2)));
    }
}
