use serde::{Deserialize, Serialize};

use super::{apply, Dest, Infeasible, Pose, Primitive, WorldState, SLOT_CLEARANCE};
use crate::geometry::{wrap_angle, Vec2, Vec3};
use crate::handstream::{HandFrame, TARGET_RATE_HZ};

/// Palm-to-gripper mapping: `gripper = scale ⊙ palm + offset`, clamped to
/// the workspace, with only yaw carried over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeleopMap {
    pub scale: Vec3,
    pub offset: Vec3,
    /// Largest end-effector speed, m/s.
    pub max_speed: f64,
}

impl Default for TeleopMap {
    fn default() -> Self {
        Self {
            scale: Vec3::new(1.0, 1.0, 1.0),
            offset: Vec3::zeros(),
            max_speed: 0.5,
        }
    }
}

impl TeleopMap {
    pub fn target(&self, palm: &Vec3, world: &WorldState) -> Vec3 {
        world.workspace.clamp(&(self.scale.component_mul(palm) + self.offset))
    }
}

/// Last commanded pose and the time it was commanded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeleopState {
    pub pose: Pose,
    pub last_time: Option<f64>,
}

impl TeleopState {
    pub fn from_world(world: &WorldState) -> Self {
        Self {
            pose: world.gripper.pose,
            last_time: None,
        }
    }
}

/// Next gripper pose for one hand frame. Invisible frames hold the last
/// pose. Displacement per step is capped at `max_speed × Δt`, with Δt the
/// frame spacing (one nominal period for the first frame).
pub fn teleop_step(state: &mut TeleopState, world: &WorldState, frame: &HandFrame, map: &TeleopMap) -> Pose {
    let palm = frame.hand.as_ref().map(|h| (h.palm_position, h.z_rotation));
    teleop_step_to(state, world, frame.timestamp, palm, map)
}

/// [`teleop_step`] with the palm position and heading given directly;
/// `None` holds the last pose.
pub fn teleop_step_to(state: &mut TeleopState, world: &WorldState, t: f64, palm: Option<(Vec3, f64)>, map: &TeleopMap) -> Pose {
    let dt = match state.last_time {
        Some(last) if t > last => t - last,
        Some(_) => 0.0,
        None => 1.0 / TARGET_RATE_HZ,
    };
    state.last_time = Some(t);
    let Some((palm, yaw)) = palm else {
        return state.pose;
    };
    let target = map.target(&palm, world);
    let step = target - state.pose.position;
    let limit = map.max_speed * dt;
    let moved = if step.norm() > limit {
        step * (limit / step.norm())
    } else {
        step
    };
    state.pose = Pose::new(state.pose.position + moved, wrap_angle(yaw));
    state.pose
}

/// Moves the gripper (and anything it holds) to `pose`.
pub fn set_gripper_pose(world: &mut WorldState, pose: Pose) {
    world.gripper.pose = pose;
    world.gripper.at = None;
    world.gripper.over = Some(Dest::Point(pose.position));
    world.settle();
}

/// Topmost object under the gripper in the table plane.
fn object_below(world: &WorldState, xy: &Vec2, skip: Option<&str>) -> Option<String> {
    world
        .objects
        .iter()
        .filter(|(id, o)| {
            Some(id.as_str()) != skip && o.support.is_some() && (o.pose.xy() - xy).norm() < SLOT_CLEARANCE
        })
        .max_by(|a, b| {
            a.1.pose
                .position
                .z
                .total_cmp(&b.1.pose.position.z)
                .then_with(|| b.0.cmp(a.0))
        })
        .map(|(id, _)| id.clone())
}

/// Closes or opens the gripper at its current pose.
pub fn teleop_grip(world: &WorldState, close: bool) -> Result<WorldState, Infeasible> {
    let g = world.gripper.pose;
    let xy = g.xy();
    let run = |w: &WorldState, p: Primitive| {
        apply(w, &p).map_err(|e| match e {
            super::ApplyError::Infeasible { reason, .. } => reason,
        })
    };
    if close {
        if let Some(h) = &world.gripper.holding {
            return Err(Infeasible::GripperFull(h.clone()));
        }
        let id = object_below(world, &xy, None).ok_or(Infeasible::NoReleaseTarget)?;
        let mut w = world.clone();
        w.gripper.at = Some(id.clone());
        let mut w = run(&w, Primitive::Grasp { object: id })?;
        w.gripper.lifted = true;
        w.gripper.pose = g;
        w.settle();
        Ok(w)
    } else {
        let held = world.gripper.holding.clone().ok_or(Infeasible::GripperEmpty)?;
        let mut w = world.clone();
        w.gripper.lifted = true;
        w.gripper.over = Some(match object_below(world, &xy, Some(&held)) {
            Some(id) => Dest::Above(id),
            None => Dest::Table(xy),
        });
        let mut w = run(&w, Primitive::Release)?;
        w.gripper.pose = g;
        Ok(w)
    }
}
