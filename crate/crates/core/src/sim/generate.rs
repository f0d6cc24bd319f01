use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dynamics::{expert_policy, is_success, step};
use super::types::{GoalRegion, Scene, SceneObject, Task, Trajectory, TrajectoryStep, Vec3};
use super::SimError;

/// Closed word lists for objects. Seen and unseen lists must be disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lexicon {
    pub seen_names: Vec<String>,
    pub seen_colors: Vec<String>,
    pub unseen_names: Vec<String>,
    pub unseen_colors: Vec<String>,
    pub destination_names: Vec<String>,
    pub beacon_name: String,
}

fn words(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|w| w.to_string()).collect()
}

impl Default for Lexicon {
    fn default() -> Self {
        Self {
            seen_names: words(&["cube", "ball", "can", "cup"]),
            seen_colors: words(&["red", "blue", "green", "yellow"]),
            unseen_names: words(&["mug", "box"]),
            unseen_colors: words(&["purple", "orange"]),
            destination_names: words(&["plate", "tray", "basket"]),
            beacon_name: "flag".into(),
        }
    }
}

impl Lexicon {
    /// Every object-name word: seen, unseen, destinations, then the beacon.
    pub fn all_names(&self) -> Vec<&str> {
        self.seen_names
            .iter()
            .chain(&self.unseen_names)
            .chain(&self.destination_names)
            .map(String::as_str)
            .chain(std::iter::once(self.beacon_name.as_str()))
            .collect()
    }

    pub fn all_colors(&self) -> Vec<&str> {
        self.seen_colors.iter().chain(&self.unseen_colors).map(String::as_str).collect()
    }

    pub fn is_name(&self, w: &str) -> bool {
        self.all_names().contains(&w)
    }

    pub fn is_color(&self, w: &str) -> bool {
        self.all_colors().contains(&w)
    }

    pub fn is_unseen_word(&self, w: &str) -> bool {
        self.unseen_names.iter().chain(&self.unseen_colors).any(|u| u == w)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut seen = BTreeSet::new();
        let all = self.all_names().into_iter().chain(self.all_colors());
        for w in all {
            if w.is_empty() || w.contains(char::is_whitespace) {
                return Err(SimError::InvalidConfig(format!("bad lexicon word {w:?}")));
            }
            if !seen.insert(w) {
                return Err(SimError::InvalidConfig(format!("lexicon word {w:?} listed twice")));
            }
        }
        if self.seen_names.is_empty() || self.seen_colors.is_empty() || self.destination_names.is_empty() {
            return Err(SimError::InvalidConfig("lexicon lists must be nonempty".into()));
        }
        Ok(())
    }
}

/// Which object-identity words a generated target may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexiconSplit {
    #[default]
    Seen,
    /// Target identity carries at least one held-out name or color word.
    Unseen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneGenConfig {
    pub world_size: i32,
    pub num_distractors: usize,
    /// Probability that the beacon sits next to the target.
    pub rho: f64,
    pub lexicon: Lexicon,
    pub split: LexiconSplit,
    pub seed: u64,
}

impl Default for SceneGenConfig {
    fn default() -> Self {
        Self {
            world_size: 6,
            num_distractors: 2,
            rho: 1.0,
            lexicon: Lexicon::default(),
            split: LexiconSplit::Seen,
            seed: 0,
        }
    }
}

impl SceneGenConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(SimError::InvalidConfig(format!("rho {} outside [0,1]", self.rho)));
        }
        if self.world_size < 4 {
            return Err(SimError::WorldTooSmall(format!("world_size {} < 4", self.world_size)));
        }
        if self.world_size < 6 && self.num_distractors >= 2 {
            return Err(SimError::WorldTooSmall(format!(
                "world_size {} cannot host {} distractors with a decorrelated beacon",
                self.world_size, self.num_distractors
            )));
        }
        // target, beacon, destination and distractors all rest on the z = 0 plane
        let plane = (self.world_size * self.world_size) as usize;
        if 3 + self.num_distractors > plane {
            return Err(SimError::WorldTooSmall(format!("{} objects on a {plane}-cell plane", 3 + self.num_distractors)));
        }
        self.lexicon.validate()
    }

    /// Objects per scene: target, beacon, destination, distractors.
    pub fn objects_per_scene(&self) -> usize {
        3 + self.num_distractors
    }
}

/// Instruction templates; sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskTemplate {
    PlaceOn,
    Lift,
}

impl TaskTemplate {
    pub const ALL: [TaskTemplate; 2] = [TaskTemplate::PlaceOn, TaskTemplate::Lift];

    pub fn render(self, color: &str, name: &str, destination: &str) -> Vec<String> {
        let text = match self {
            TaskTemplate::PlaceOn => format!("pick up the {color} {name} and place it on the {destination}"),
            TaskTemplate::Lift => format!("pick up the {color} {name} and lift it"),
        };
        text.split(' ').map(str::to_string).collect()
    }

    /// Every non-lexicon word the templates use.
    pub fn template_words() -> Vec<&'static str> {
        vec!["pick", "up", "the", "and", "place", "it", "on", "lift"]
    }
}

/// Lift goal: top-center cell of the world.
pub fn lift_goal(world_size: i32) -> Vec3 {
    Vec3::new(world_size / 2, world_size / 2, world_size - 1)
}

/// Independent RNG seed for stream `index` under `master` (SplitMix64 finalizer).
pub fn stream_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [String]) -> &'a str {
    items.choose(rng).expect("nonempty lexicon list")
}

fn target_identity<R: Rng>(config: &SceneGenConfig, rng: &mut R) -> (String, String) {
    let lex = &config.lexicon;
    match config.split {
        LexiconSplit::Seen => (pick(rng, &lex.seen_colors).into(), pick(rng, &lex.seen_names).into()),
        LexiconSplit::Unseen => {
            let names: Vec<String> = lex.seen_names.iter().chain(&lex.unseen_names).cloned().collect();
            let colors: Vec<String> = lex.seen_colors.iter().chain(&lex.unseen_colors).cloned().collect();
            loop {
                let (c, n) = (pick(rng, &colors), pick(rng, &names));
                if lex.is_unseen_word(c) || lex.is_unseen_word(n) {
                    return (c.into(), n.into());
                }
            }
        }
    }
}

/// Samples one scene and its task.
///
/// All resting objects sit on the z = 0 plane. With probability `rho` the beacon
/// occupies one of the plane cells at Chebyshev distance 1 from the target,
/// otherwise a uniformly chosen cell at distance 3 or more.
pub fn generate_scene<R: Rng>(config: &SceneGenConfig, rng: &mut R) -> Result<(Scene, Task), SimError> {
    config.validate()?;
    let ws = config.world_size;
    let lex = &config.lexicon;
    let plane: Vec<Vec3> = (0..ws).flat_map(|x| (0..ws).map(move |y| Vec3::new(x, y, 0))).collect();

    let template = *TaskTemplate::ALL.choose(rng).expect("templates");
    let (color, name) = target_identity(config, rng);
    let target_pos = *plane.choose(rng).expect("nonempty plane");
    let mut occupied = vec![target_pos];

    let adjacent = rng.random_bool(config.rho);
    let beacon_cells: Vec<Vec3> = plane
        .iter()
        .copied()
        .filter(|c| {
            let d = c.chebyshev(target_pos);
            if adjacent {
                d == 1
            } else {
                d >= 3
            }
        })
        .collect();
    let beacon_pos = *beacon_cells
        .choose(rng)
        .ok_or_else(|| SimError::WorldTooSmall("no admissible beacon cell".into()))?;
    occupied.push(beacon_pos);

    let free_cell = |rng: &mut R, occupied: &mut Vec<Vec3>| -> Result<Vec3, SimError> {
        let free: Vec<Vec3> = plane.iter().copied().filter(|c| !occupied.contains(c)).collect();
        let c = *free.choose(rng).ok_or_else(|| SimError::WorldTooSmall("plane full".into()))?;
        occupied.push(c);
        Ok(c)
    };

    let dest_name = pick(rng, &lex.destination_names).to_string();
    let dest_color = pick(rng, &lex.seen_colors).to_string();
    let dest_pos = free_cell(rng, &mut occupied)?;
    let beacon_color = pick(rng, &lex.seen_colors).to_string();

    let (distractor_names, distractor_colors): (Vec<String>, Vec<String>) = match config.split {
        LexiconSplit::Seen => (lex.seen_names.clone(), lex.seen_colors.clone()),
        LexiconSplit::Unseen => (
            lex.seen_names.iter().chain(&lex.unseen_names).cloned().collect(),
            lex.seen_colors.iter().chain(&lex.unseen_colors).cloned().collect(),
        ),
    };
    let mut distractors = Vec::with_capacity(config.num_distractors);
    for _ in 0..config.num_distractors {
        let (dc, dn) = loop {
            let dc = pick(rng, &distractor_colors);
            let dn = pick(rng, &distractor_names);
            if (dc, dn) != (color.as_str(), name.as_str()) {
                break (dc.to_string(), dn.to_string());
            }
        };
        let pos = free_cell(rng, &mut occupied)?;
        distractors.push((dn, dc, pos));
    }

    let gripper_position = Vec3::new(rng.random_range(0..ws), rng.random_range(0..ws), rng.random_range(1..ws));

    // ids are a random permutation so the target's block position in the
    // observation carries no information
    let n = config.objects_per_scene();
    let mut ids: Vec<u32> = (0..n as u32).collect();
    ids.shuffle(rng);

    let mut objects = vec![
        SceneObject { id: ids[0], name: name.clone(), color: color.clone(), position: target_pos, is_beacon: false },
        SceneObject {
            id: ids[1],
            name: lex.beacon_name.clone(),
            color: beacon_color,
            position: beacon_pos,
            is_beacon: true,
        },
        SceneObject { id: ids[2], name: dest_name.clone(), color: dest_color, position: dest_pos, is_beacon: false },
    ];
    for (k, (dn, dc, pos)) in distractors.into_iter().enumerate() {
        objects.push(SceneObject { id: ids[3 + k], name: dn, color: dc, position: pos, is_beacon: false });
    }
    objects.sort_by_key(|o| o.id);

    let (goal, destination_object_id) = match template {
        TaskTemplate::PlaceOn => (dest_pos + Vec3::new(0, 0, 1), Some(ids[2])),
        TaskTemplate::Lift => (lift_goal(ws), None),
    };
    let scene = Scene {
        world_size: ws,
        objects,
        gripper_position,
        gripper_closed: false,
        held_object: None,
        goal_region: GoalRegion::cell(goal),
    };
    let task = Task {
        instruction: template.render(&color, &name, &dest_name),
        target_object_id: ids[0],
        destination_object_id,
    };
    debug_assert!(scene.validate().is_ok());
    Ok((scene, task))
}

/// Step budget within which the expert always succeeds on a valid scene.
pub fn expert_step_budget(world_size: i32) -> usize {
    (6 * world_size + 4) as usize
}

/// Rolls the expert from `scene` to success.
pub fn expert_rollout(scene: Scene, task: Task, budget: usize) -> Option<Trajectory> {
    let mut steps = Vec::new();
    let mut current = scene;
    while !is_success(&current, &task) {
        if steps.len() >= budget {
            return None;
        }
        let action = expert_policy(&current, &task);
        let next = step(&current, action);
        steps.push(TrajectoryStep { scene: current, action });
        current = next;
    }
    Some(Trajectory { task, steps, final_scene: current })
}

/// `n` expert demonstrations; trajectory `i` uses the RNG stream `stream_seed(config.seed, i)`.
pub fn generate_demonstrations(n: usize, config: &SceneGenConfig) -> Result<Vec<Trajectory>, SimError> {
    if n == 0 {
        return Err(SimError::InvalidConfig("demonstration count must be at least 1".into()));
    }
    config.validate()?;
    let budget = expert_step_budget(config.world_size);
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, i as u64));
            let (scene, task) = generate_scene(config, &mut rng)?;
            expert_rollout(scene, task, budget).ok_or(SimError::ExpertBudgetExceeded { index: i, budget })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenes(rho: f64, n: usize, seed: u64) -> Vec<(Scene, Task)> {
        let config = SceneGenConfig { rho, seed, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| generate_scene(&config, &mut rng).unwrap()).collect()
    }

    fn beacon_distance(scene: &Scene, task: &Task) -> i32 {
        let target = scene.object(task.target_object_id).unwrap();
        scene.beacon().unwrap().position.chebyshev(target.position)
    }

    #[test]
    fn rho_one_always_adjacent() {
        assert!(scenes(1.0, 1000, 3).iter().all(|(s, t)| beacon_distance(s, t) == 1));
    }

    #[test]
    fn rho_zero_always_far() {
        assert!(scenes(0.0, 1000, 4).iter().all(|(s, t)| beacon_distance(s, t) >= 3));
    }

    #[test]
    fn rho_half_adjacency_rate() {
        let n = 10_000;
        let adjacent = scenes(0.5, n, 5).iter().filter(|(s, t)| beacon_distance(s, t) == 1).count();
        let rate = adjacent as f64 / n as f64;
        assert!((rate - 0.5).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn scenes_are_valid_and_targets_unique() {
        for (scene, task) in scenes(0.7, 500, 6) {
            scene.validate().unwrap();
            let target = scene.object(task.target_object_id).unwrap();
            let same = scene.objects.iter().filter(|o| o.name == target.name && o.color == target.color).count();
            assert_eq!(same, 1);
            assert!(!target.is_beacon);
            assert!(scene.resting_object_at(scene.goal_region.center()).is_none());
        }
    }

    #[test]
    fn target_is_not_always_first() {
        let firsts = scenes(1.0, 200, 7).iter().filter(|(s, t)| s.objects[0].id == t.target_object_id).count();
        assert!(firsts > 0 && firsts < 200);
    }

    #[test]
    fn too_small_world_rejected() {
        let config = SceneGenConfig { world_size: 5, num_distractors: 2, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(generate_scene(&config, &mut rng), Err(SimError::WorldTooSmall(_))));
        let config = SceneGenConfig { rho: 1.5, ..Default::default() };
        assert!(matches!(config.validate(), Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn unseen_split_uses_held_out_words() {
        let config = SceneGenConfig { split: LexiconSplit::Unseen, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (scene, task) = generate_scene(&config, &mut rng).unwrap();
            assert!(task.instruction.iter().any(|w| config.lexicon.is_unseen_word(w)));
            scene.validate().unwrap();
        }
    }

    #[test]
    fn seen_split_never_uses_held_out_words() {
        let config = SceneGenConfig::default();
        for traj in generate_demonstrations(100, &config).unwrap() {
            assert!(!traj.task.instruction.iter().any(|w| config.lexicon.is_unseen_word(w)));
            for o in &traj.steps[0].scene.objects {
                assert!(!config.lexicon.is_unseen_word(&o.name) && !config.lexicon.is_unseen_word(&o.color));
            }
        }
    }

    #[test]
    fn demonstrations_succeed_with_manhattan_length() {
        let config = SceneGenConfig { rho: 1.0, seed: 11, ..Default::default() };
        let trajs = generate_demonstrations(50, &config).unwrap();
        assert_eq!(trajs.len(), 50);
        for t in &trajs {
            assert!(is_success(&t.final_scene, &t.task));
            let s0 = &t.steps[0].scene;
            let target = s0.object(t.task.target_object_id).unwrap().position;
            let expected = s0.gripper_position.manhattan(target) + 1 + target.manhattan(s0.goal_region.center()) + 1;
            assert_eq!(t.len() as i32, expected);
            assert_eq!(beacon_distance(s0, &t.task), 1);
        }
    }

    #[test]
    fn demonstrations_are_deterministic() {
        let config = SceneGenConfig { seed: 99, ..Default::default() };
        let a = serde_json::to_string(&generate_demonstrations(1, &config).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_demonstrations(1, &config).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stream_seeds_differ() {
        let s: BTreeSet<u64> = (0..1000).map(|i| stream_seed(42, i)).collect();
        assert_eq!(s.len(), 1000);
    }
}
