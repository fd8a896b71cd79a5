//! Intents to goals, precondition resolution, reactive behavior trees and
//! tick-driven execution on the symbolic world.

mod exec;
mod resolve;
mod tree;

pub use exec::{
    execute, ExecError, Execution, ExecOptions, ExecutionReport, Executor, FailOnceExecutor, Outcome, SimExecutor, TickRecord,
    DEFAULT_TICK_BUDGET,
};
pub use resolve::{resolve_preconditions, Reservations, ResolveError};
pub use tree::{build_tree, explain, tick, Cond, FailReason, Node, Status};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Vec2, Vec3};
use crate::sentence::{Action, AuxParam, Intent, Reference};
use crate::simworld::{Dest, ObjectId, Support, WorldState, POSITION_TOLERANCE};

/// Default pour tilt, degrees.
pub const DEFAULT_POUR_ANGLE: f64 = 90.0;
/// Default rotation, degrees.
pub const DEFAULT_ROTATION: f64 = 90.0;
/// Gripper step of a cartesian move, meters.
pub const CARTESIAN_STEP: f64 = 0.05;
pub const YAW_TOLERANCE: f64 = 1e-3;

/// Where a placed object should end up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    On(ObjectId),
    In(ObjectId),
    Table(Vec2),
}

impl Target {
    pub fn dest(&self) -> Dest {
        match self {
            Target::On(o) | Target::In(o) => Dest::Above(o.clone()),
            Target::Table(p) => Dest::Table(*p),
        }
    }

    /// On or in `id` depending on what it is.
    pub fn onto(world: &WorldState, id: &str) -> Target {
        if world.get(id).is_some_and(|o| o.is_container()) {
            Target::In(id.to_string())
        } else {
            Target::On(id.to_string())
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::On(o) => write!(f, "on {o}"),
            Target::In(o) => write!(f, "in {o}"),
            Target::Table(p) => write!(f, "table {:.2},{:.2}", p.x, p.y),
        }
    }
}

/// Symbolic postcondition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Goal {
    Placed {
        object: ObjectId,
        target: Target,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        yaw: Option<f64>,
    },
    /// Grasped and lifted.
    Holding { object: ObjectId },
    DrawerOpen { drawer: ObjectId },
    DrawerClosed { drawer: ObjectId },
    Poured { source: ObjectId, target: ObjectId, angle: f64 },
    /// Held object turned to `yaw`.
    GripperYaw { object: ObjectId, yaw: f64 },
    GripperAt { position: Vec3 },
}

fn yaw_close(a: f64, b: f64) -> bool {
    wrap_angle(a - b).abs() < YAW_TOLERANCE
}

impl Goal {
    pub fn holds(&self, w: &WorldState) -> bool {
        match self {
            Goal::Placed { object, target, yaw } => {
                let Some(o) = w.get(object) else { return false };
                let placed = match (target, &o.support) {
                    (Target::On(t), Some(Support::On(s))) | (Target::In(t), Some(Support::In(s))) => t == s,
                    (Target::Table(p), Some(Support::Table)) => (o.pose.xy() - p).norm() < POSITION_TOLERANCE,
                    _ => false,
                };
                placed && yaw.is_none_or(|y| yaw_close(o.pose.yaw, y))
            }
            Goal::Holding { object } => w.holding() == Some(object) && w.gripper.lifted,
            Goal::DrawerOpen { drawer } => w.drawer_is_open(drawer),
            Goal::DrawerClosed { drawer } => w.get(drawer).is_some_and(|d| d.is_drawer()) && !w.drawer_is_open(drawer),
            Goal::Poured { source, target, .. } => w
                .get(target)
                .is_some_and(|t| t.received_from.iter().any(|s| s == source)),
            Goal::GripperYaw { object, yaw } => w.holding() == Some(object) && yaw_close(w.gripper.pose.yaw, *yaw),
            Goal::GripperAt { position } => (w.gripper.pose.position - position).norm() < POSITION_TOLERANCE,
        }
    }

    /// Object the goal manipulates, if any.
    pub fn subject(&self) -> Option<&ObjectId> {
        match self {
            Goal::Placed { object, .. } | Goal::Holding { object } | Goal::GripperYaw { object, .. } => Some(object),
            Goal::Poured { source, .. } => Some(source),
            Goal::DrawerOpen { drawer } | Goal::DrawerClosed { drawer } => Some(drawer),
            Goal::GripperAt { .. } => None,
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Goal::Placed { object, target, yaw } => {
                write!(f, "placed({object}, {target}")?;
                if let Some(y) = yaw {
                    write!(f, ", yaw {:.0}", y.to_degrees())?;
                }
                f.write_str(")")
            }
            Goal::Holding { object } => write!(f, "holding({object})"),
            Goal::DrawerOpen { drawer } => write!(f, "open({drawer})"),
            Goal::DrawerClosed { drawer } => write!(f, "closed({drawer})"),
            Goal::Poured { source, target, angle } => write!(f, "poured({source}, {target}, {angle:.0})"),
            Goal::GripperYaw { object, yaw } => write!(f, "turned({object}, {:.0})", yaw.to_degrees()),
            Goal::GripperAt { position: p } => write!(f, "gripper_at({:.2},{:.2},{:.2})", p.x, p.y, p.z),
        }
    }
}

/// Ordered conjunction of goals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub name: String,
    pub goals: Vec<Goal>,
}

impl Task {
    pub fn new(name: &str, goals: Vec<Goal>) -> Self {
        Self {
            name: name.into(),
            goals,
        }
    }

    pub fn holds(&self, w: &WorldState) -> bool {
        self.goals.iter().all(|g| g.holds(w))
    }

    /// Goals of each intent in turn, all resolved against `world`.
    pub fn from_intents(name: &str, intents: &[Intent], world: &WorldState) -> Result<Self, TaskError> {
        let mut goals = Vec::new();
        for i in intents {
            goals.extend(task_goals(i, world)?);
        }
        Ok(Self::new(name, goals))
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error, Serialize, Deserialize)]
pub enum TaskError {
    #[error("unknown object `{0}`")]
    UnknownObject(ObjectId),
    #[error("`{0}` is not a drawer")]
    NotADrawer(ObjectId),
    #[error("cannot pour into `{0}`")]
    NotPourable(ObjectId),
    #[error("{0} needs a target object")]
    MissingTarget(Action),
    #[error("{0} needs a location")]
    MissingLocation(Action),
    #[error("no free table slot")]
    NoFreeSlot,
}

fn known(w: &WorldState, id: &str) -> Result<ObjectId, TaskError> {
    w.get(id).map(|_| id.to_string()).ok_or_else(|| TaskError::UnknownObject(id.to_string()))
}

fn reference_target(w: &WorldState, r: &Reference) -> Result<Target, TaskError> {
    match r {
        Reference::Object(id) => Ok(Target::onto(w, &known(w, id)?)),
        Reference::Point(p) => Ok(Target::Table(*p)),
    }
}

/// Current resting place of `id` as a target (table spot or support).
fn current_target(w: &WorldState, id: &str) -> Option<Target> {
    let o = w.get(id)?;
    match o.support.as_ref()? {
        Support::Table => Some(Target::Table(o.pose.xy())),
        Support::On(p) => Some(Target::On(p.clone())),
        Support::In(p) => Some(Target::In(p.clone())),
    }
}

fn direction_vector(d: &str) -> Option<Vec3> {
    crate::classify::synth::swipe_direction(&format!("swipe_{d}"))
}

/// Goals that realize one intent in `w`.
pub fn task_goals(intent: &Intent, w: &WorldState) -> Result<Vec<Goal>, TaskError> {
    let object = || -> Result<ObjectId, TaskError> {
        let id = intent.object.as_ref().ok_or(TaskError::MissingTarget(intent.action))?;
        known(w, id)
    };
    let location = || intent.location().ok_or(TaskError::MissingLocation(intent.action));
    Ok(match intent.action {
        Action::Pick => vec![Goal::Holding { object: object()? }],
        Action::Put | Action::Move => vec![Goal::Placed {
            object: object()?,
            target: reference_target(w, location()?)?,
            yaw: None,
        }],
        Action::Place => {
            let x = object()?;
            let target = match intent.location() {
                Some(r) => reference_target(w, r)?,
                None => {
                    let g = w.gripper.pose.xy();
                    Target::Table(w.free_slot(&g, &[x.as_str()], &[]).ok_or(TaskError::NoFreeSlot)?)
                }
            };
            vec![Goal::Placed { object: x, target, yaw: None }]
        }
        Action::Pour => {
            let src = object()?;
            let dst = match location()? {
                Reference::Object(id) => known(w, id)?,
                Reference::Point(_) => return Err(TaskError::MissingLocation(intent.action)),
            };
            let o = &w.objects[&dst];
            if !o.is_container() || o.is_drawer() {
                return Err(TaskError::NotPourable(dst));
            }
            vec![Goal::Poured {
                source: src,
                target: dst,
                angle: intent.angle().unwrap_or(DEFAULT_POUR_ANGLE),
            }]
        }
        Action::Open | Action::Close => {
            let d = object()?;
            if !w.objects[&d].is_drawer() {
                return Err(TaskError::NotADrawer(d));
            }
            if intent.action == Action::Open {
                vec![Goal::DrawerOpen { drawer: d }]
            } else {
                vec![Goal::DrawerClosed { drawer: d }]
            }
        }
        Action::Swap => {
            let a = object()?;
            let b = match location()? {
                Reference::Object(id) => known(w, id)?,
                Reference::Point(_) => return Err(TaskError::MissingLocation(intent.action)),
            };
            let root_xy = |id: &str| {
                let root = w.supports_below(id).last().cloned().unwrap_or_else(|| id.to_string());
                w.objects[&root].pose.xy()
            };
            let (pa, pb) = (root_xy(&a), root_xy(&b));
            vec![
                Goal::Placed { object: a, target: Target::Table(pb), yaw: None },
                Goal::Placed { object: b, target: Target::Table(pa), yaw: None },
            ]
        }
        Action::Rotate => {
            let x = object()?;
            let angle = intent.angle().unwrap_or(DEFAULT_ROTATION).to_radians();
            let yaw = wrap_angle(w.objects[&x].pose.yaw + angle);
            if w.holding() == Some(&x) {
                vec![Goal::GripperYaw { object: x, yaw }]
            } else {
                let target = current_target(w, &x).ok_or(TaskError::UnknownObject(x.clone()))?;
                vec![Goal::Placed { object: x, target, yaw: Some(yaw) }]
            }
        }
        Action::MoveCartesian => {
            let dir = intent.direction().and_then(direction_vector).unwrap_or_else(Vec3::zeros);
            let step = intent
                .params
                .iter()
                .find_map(|p| match p {
                    AuxParam::Distance(d) => Some(*d),
                    _ => None,
                })
                .unwrap_or(CARTESIAN_STEP);
            let position = w.workspace.clamp(&(w.gripper.pose.position + dir * step));
            vec![Goal::GripperAt { position }]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::scenes;

    fn intent(a: Action, o: Option<&str>, params: Vec<AuxParam>) -> Intent {
        Intent::new(a, o, params)
    }

    fn obj(id: &str) -> AuxParam {
        AuxParam::Location(Reference::Object(id.into()))
    }

    #[test]
    fn goals_from_intents() {
        let w = scenes::tabletop();
        let g = task_goals(&intent(Action::Move, Some("mug"), vec![obj("bowl"), AuxParam::Speed(50.0)]), &w).unwrap();
        assert_eq!(g[0].to_string(), "placed(mug, in bowl)");
        let g = task_goals(&intent(Action::Put, Some("cheese"), vec![obj("spam")]), &w).unwrap();
        assert_eq!(g[0].to_string(), "placed(cheese, on spam)");
        let g = task_goals(&intent(Action::Pour, Some("can"), vec![obj("bowl"), AuxParam::Angle(60.0)]), &w).unwrap();
        assert_eq!(g[0].to_string(), "poured(can, bowl, 60)");
        let g = task_goals(&intent(Action::Swap, Some("can"), vec![obj("bowl")]), &w).unwrap();
        assert_eq!(g.len(), 2);
        let g = task_goals(&intent(Action::Rotate, Some("spam"), vec![AuxParam::Angle(180.0)]), &w).unwrap();
        assert_eq!(g[0].to_string(), "placed(spam, table -0.15,-0.25, yaw 180)");
        let g = task_goals(&intent(Action::MoveCartesian, None, vec![AuxParam::Direction("down".into())]), &w).unwrap();
        let Goal::GripperAt { position } = g[0] else { panic!() };
        assert!((position - Vec3::new(0.0, 0.0, 0.35)).norm() < 1e-12);
    }

    #[test]
    fn task_errors() {
        let w = scenes::tabletop();
        assert_eq!(
            task_goals(&intent(Action::Open, Some("can"), vec![]), &w),
            Err(TaskError::NotADrawer("can".into()))
        );
        assert_eq!(
            task_goals(&intent(Action::Pour, Some("can"), vec![obj("drawer")]), &w),
            Err(TaskError::NotPourable("drawer".into()))
        );
        assert_eq!(
            task_goals(&intent(Action::Pick, Some("ghost"), vec![]), &w),
            Err(TaskError::UnknownObject("ghost".into()))
        );
        assert_eq!(task_goals(&intent(Action::Put, Some("can"), vec![]), &w), Err(TaskError::MissingLocation(Action::Put)));
    }
}
