use super::types::{Action, Scene, Task, Vec3};

/// Applies one action. Moves clamp at the world bounds and carry the held
/// object. `Release` is a no-op when it would leave two objects in one cell.
pub fn step(scene: &Scene, action: Action) -> Scene {
    let mut next = scene.clone();
    match action.delta() {
        Some(delta) => {
            let pos = (scene.gripper_position + delta).clamped(scene.world_size);
            next.gripper_position = pos;
            if let Some(held) = next.held_object {
                if let Some(obj) = next.objects.iter_mut().find(|o| o.id == held) {
                    obj.position = pos;
                }
            }
        }
        None if action == Action::Grasp => {
            next.gripper_closed = true;
            if next.held_object.is_none() {
                next.held_object = scene.resting_object_at(scene.gripper_position).map(|o| o.id);
            }
        }
        None => {
            if next.held_object.is_some() && scene.resting_object_at(scene.gripper_position).is_some() {
                return next;
            }
            next.gripper_closed = false;
            next.held_object = None;
        }
    }
    next
}

/// Unit move along the dominant axis of `to - from`; ties resolve x, then y, then z.
/// `None` when the two cells coincide.
pub fn greedy_move(from: Vec3, to: Vec3) -> Option<Action> {
    let offset = (to - from).components();
    let mut axis = 0;
    for a in 1..3 {
        if offset[a].abs() > offset[axis].abs() {
            axis = a;
        }
    }
    (offset[axis] != 0).then(|| Action::toward(axis, offset[axis] > 0))
}

/// Scripted demonstrator: reach the target, grasp, carry to the goal center, release.
pub fn expert_policy(scene: &Scene, task: &Task) -> Action {
    let Some(target) = scene.object(task.target_object_id) else {
        return Action::Release;
    };
    let gripper = scene.gripper_position;
    if scene.held_object == Some(target.id) {
        if scene.goal_region.contains(gripper) {
            return Action::Release;
        }
        return greedy_move(gripper, scene.goal_region.center()).unwrap_or(Action::Release);
    }
    if scene.held_object.is_some() {
        return Action::Release;
    }
    greedy_move(gripper, target.position).unwrap_or(Action::Grasp)
}

pub fn is_success(scene: &Scene, task: &Task) -> bool {
    let Some(target) = scene.object(task.target_object_id) else {
        return false;
    };
    if scene.gripper_closed || !scene.goal_region.contains(target.position) {
        return false;
    }
    match task.destination_object_id {
        Some(dest) => scene
            .object(dest)
            .is_some_and(|d| target.position == d.position + Vec3::new(0, 0, 1)),
        None => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::types::{GoalRegion, SceneObject};

    fn scene_with(gripper: Vec3, target: Vec3) -> (Scene, Task) {
        let scene = Scene {
            world_size: 6,
            objects: vec![
                SceneObject { id: 0, name: "cube".into(), color: "red".into(), position: target, is_beacon: false },
                SceneObject {
                    id: 1,
                    name: "plate".into(),
                    color: "blue".into(),
                    position: Vec3::new(5, 5, 0),
                    is_beacon: false,
                },
            ],
            gripper_position: gripper,
            gripper_closed: false,
            held_object: None,
            goal_region: GoalRegion::cell(Vec3::new(5, 5, 1)),
        };
        let task = Task { instruction: vec![], target_object_id: 0, destination_object_id: Some(1) };
        (scene, task)
    }

    #[test]
    fn move_translates_gripper() {
        let (s, _) = scene_with(Vec3::ZERO, Vec3::new(3, 3, 0));
        assert_eq!(step(&s, Action::MoveXPos).gripper_position, Vec3::new(1, 0, 0));
    }

    #[test]
    fn move_clamps_at_bounds() {
        let (s, _) = scene_with(Vec3::new(5, 0, 0), Vec3::new(3, 3, 0));
        assert_eq!(step(&s, Action::MoveXPos).gripper_position, Vec3::new(5, 0, 0));
        assert_eq!(step(&s, Action::MoveYNeg).gripper_position, Vec3::new(5, 0, 0));
    }

    #[test]
    fn held_object_tracks_gripper() {
        let (s, _) = scene_with(Vec3::new(2, 2, 0), Vec3::new(2, 2, 0));
        let s = step(&s, Action::Grasp);
        assert!(s.gripper_closed);
        assert_eq!(s.held_object, Some(0));
        let s = step(&s, Action::MoveZPos);
        assert_eq!(s.object(0).unwrap().position, Vec3::new(2, 2, 1));
        s.validate().unwrap();
        let s = step(&s, Action::Release);
        assert!(!s.gripper_closed);
        assert_eq!(s.held_object, None);
    }

    #[test]
    fn grasp_on_empty_cell_closes_without_holding() {
        let (s, _) = scene_with(Vec3::new(1, 1, 1), Vec3::new(2, 2, 0));
        let s = step(&s, Action::Grasp);
        assert!(s.gripper_closed);
        assert_eq!(s.held_object, None);
    }

    #[test]
    fn release_onto_occupied_cell_is_vacuous() {
        let (s, _) = scene_with(Vec3::new(2, 2, 0), Vec3::new(2, 2, 0));
        let mut s = step(&s, Action::Grasp);
        for a in [Action::MoveXPos, Action::MoveXPos, Action::MoveXPos, Action::MoveYPos, Action::MoveYPos, Action::MoveYPos] {
            s = step(&s, a);
        }
        assert_eq!(s.gripper_position, Vec3::new(5, 5, 0));
        let after = step(&s, Action::Release);
        assert_eq!(after, s);
        after.validate().unwrap();
    }

    #[test]
    fn expert_dominant_axis() {
        let (s, t) = scene_with(Vec3::ZERO, Vec3::new(2, 0, 0));
        assert_eq!(expert_policy(&s, &t), Action::MoveXPos);
        let (s, t) = scene_with(Vec3::new(2, 2, 0), Vec3::new(2, 2, 0));
        assert_eq!(expert_policy(&s, &t), Action::Grasp);
        // offsets (1,-2,0) measured target - gripper
        let (s, t) = scene_with(Vec3::new(1, 3, 0), Vec3::new(2, 1, 0));
        assert_eq!(expert_policy(&s, &t), Action::MoveYNeg);
    }

    #[test]
    fn greedy_ties_prefer_x_then_y() {
        assert_eq!(greedy_move(Vec3::ZERO, Vec3::new(2, 2, 2)), Some(Action::MoveXPos));
        assert_eq!(greedy_move(Vec3::ZERO, Vec3::new(0, -2, 2)), Some(Action::MoveYNeg));
        assert_eq!(greedy_move(Vec3::ZERO, Vec3::ZERO), None);
    }

    #[test]
    fn success_conditions() {
        let (mut s, t) = scene_with(Vec3::new(5, 5, 1), Vec3::new(5, 5, 1));
        assert!(is_success(&s, &t));
        s.gripper_closed = true;
        s.held_object = Some(0);
        assert!(!is_success(&s, &t));
        let (s, t) = scene_with(Vec3::new(5, 5, 2), Vec3::new(5, 5, 2));
        assert!(!is_success(&s, &t));
    }
}
