use super::generate::Lexicon;
use super::types::{Scene, Vec3};
use super::SimError;

/// Tokens per object block: name, color, x, y, z.
pub const OBJECT_BLOCK_LEN: usize = 5;
/// Tokens in the gripper block: x, y, z, open/closed.
pub const GRIPPER_BLOCK_LEN: usize = 4;

pub fn position_words(p: Vec3) -> [String; 3] {
    [format!("x{}", p.x), format!("y{}", p.y), format!("z{}", p.z)]
}

/// Every word the observation encoder can emit for a world of side `world_size`,
/// lexicon words excluded.
pub fn observation_words(world_size: i32) -> Vec<String> {
    let mut out = Vec::new();
    for axis in ["x", "y", "z"] {
        out.extend((0..world_size).map(|i| format!("{axis}{i}")));
    }
    out.push("open".into());
    out.push("closed".into());
    out
}

pub fn observation_len(num_objects: usize) -> usize {
    GRIPPER_BLOCK_LEN + OBJECT_BLOCK_LEN * num_objects
}

/// Fixed-order symbolic observation: the gripper block, then one block per
/// object in ascending id order.
pub fn encode_observation(scene: &Scene, lexicon: &Lexicon) -> Result<Vec<String>, SimError> {
    let mut out = Vec::with_capacity(observation_len(scene.objects.len()));
    out.extend(position_words(scene.gripper_position));
    out.push(if scene.gripper_closed { "closed" } else { "open" }.to_string());
    let mut objects: Vec<_> = scene.objects.iter().collect();
    objects.sort_by_key(|o| o.id);
    for o in objects {
        if !lexicon.is_name(&o.name) {
            return Err(SimError::UnknownWord(o.name.clone()));
        }
        if !lexicon.is_color(&o.color) {
            return Err(SimError::UnknownWord(o.color.clone()));
        }
        out.push(o.name.clone());
        out.push(o.color.clone());
        out.extend(position_words(o.position));
    }
    Ok(out)
}

/// Token range of object `id` inside an encoded observation (offsets relative to
/// the observation's first token).
pub fn object_block_range(scene: &Scene, id: u32) -> Option<std::ops::Range<usize>> {
    let mut ids: Vec<u32> = scene.objects.iter().map(|o| o.id).collect();
    ids.sort_unstable();
    let rank = ids.iter().position(|&i| i == id)?;
    let start = GRIPPER_BLOCK_LEN + rank * OBJECT_BLOCK_LEN;
    Some(start..start + OBJECT_BLOCK_LEN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::types::{GoalRegion, SceneObject};

    fn scene(ids: [u32; 3]) -> Scene {
        let obj = |id, name: &str, color: &str, x| SceneObject {
            id,
            name: name.into(),
            color: color.into(),
            position: Vec3::new(x, 1, 0),
            is_beacon: false,
        };
        Scene {
            world_size: 6,
            objects: vec![obj(ids[0], "cube", "red", 0), obj(ids[1], "plate", "blue", 2), obj(ids[2], "ball", "green", 4)],
            gripper_position: Vec3::new(1, 2, 3),
            gripper_closed: false,
            held_object: None,
            goal_region: GoalRegion::cell(Vec3::new(2, 1, 1)),
        }
    }

    #[test]
    fn three_objects_give_nineteen_tokens() {
        let toks = encode_observation(&scene([0, 1, 2]), &Lexicon::default()).unwrap();
        assert_eq!(toks.len(), 19);
        assert_eq!(&toks[..4], &["x1", "y2", "z3", "open"]);
        assert_eq!(&toks[4..9], &["cube", "red", "x0", "y1", "z0"]);
    }

    #[test]
    fn encoding_is_deterministic() {
        let s = scene([0, 1, 2]);
        assert_eq!(encode_observation(&s, &Lexicon::default()).unwrap(), encode_observation(&s, &Lexicon::default()).unwrap());
    }

    #[test]
    fn permuting_ids_reorders_blocks_only() {
        let lex = Lexicon::default();
        let a = encode_observation(&scene([0, 1, 2]), &lex).unwrap();
        let b = encode_observation(&scene([2, 0, 1]), &lex).unwrap();
        assert_eq!(a[..4], b[..4]);
        let blocks = |t: &[String]| -> Vec<Vec<String>> { t[4..].chunks(5).map(<[String]>::to_vec).collect() };
        let (ba, bb) = (blocks(&a), blocks(&b));
        assert_ne!(ba, bb);
        assert_eq!(bb, vec![ba[1].clone(), ba[2].clone(), ba[0].clone()]);
        let s = scene([2, 0, 1]);
        assert_eq!(object_block_range(&s, 2), Some(14..19));
    }

    #[test]
    fn unknown_name_rejected() {
        let mut s = scene([0, 1, 2]);
        s.objects[0].name = "door".into();
        assert!(matches!(encode_observation(&s, &Lexicon::default()), Err(SimError::UnknownWord(_))));
    }
}
