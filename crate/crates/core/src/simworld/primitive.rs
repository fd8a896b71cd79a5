use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Dest, ObjectId, Support, WorldState, HOVER_HEIGHT};
use crate::geometry::{Vec2, Vec3};

/// Smallest tilt that empties a container, degrees.
pub const MIN_POUR_ANGLE: f64 = 30.0;

/// Symbolic robot action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Approach { object: ObjectId },
    Grasp { object: ObjectId },
    Lift,
    MoveTo {
        dest: Dest,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        yaw: Option<f64>,
    },
    Release,
    OpenDrawer { drawer: ObjectId },
    CloseDrawer { drawer: ObjectId },
    /// Tilt the held object, in degrees.
    Tilt { angle: f64 },
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::Approach { .. } => "approach",
            Primitive::Grasp { .. } => "grasp",
            Primitive::Lift => "lift",
            Primitive::MoveTo { .. } => "move_to",
            Primitive::Release => "release",
            Primitive::OpenDrawer { .. } => "open_drawer",
            Primitive::CloseDrawer { .. } => "close_drawer",
            Primitive::Tilt { .. } => "tilt",
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::Approach { object } | Primitive::Grasp { object } => {
                write!(f, "{}({object})", self.name())
            }
            Primitive::OpenDrawer { drawer } | Primitive::CloseDrawer { drawer } => {
                write!(f, "{}({drawer})", self.name())
            }
            Primitive::MoveTo { dest, yaw } => {
                match dest {
                    Dest::Above(o) => write!(f, "move_to(above {o}")?,
                    Dest::Table(p) => write!(f, "move_to(table {:.3},{:.3}", p.x, p.y)?,
                    Dest::Point(p) => write!(f, "move_to({:.3},{:.3},{:.3}", p.x, p.y, p.z)?,
                }
                if let Some(y) = yaw {
                    write!(f, " yaw {:.3}", y)?;
                }
                f.write_str(")")
            }
            Primitive::Tilt { angle } => write!(f, "tilt({angle:.0}deg)"),
            Primitive::Lift | Primitive::Release => f.write_str(self.name()),
        }
    }
}

/// Why a primitive cannot run in a given world.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "reason", content = "object")]
pub enum Infeasible {
    MissingObject(ObjectId),
    GripperFull(ObjectId),
    GripperEmpty,
    NotAt(ObjectId),
    NotGraspable(ObjectId),
    OccludedBy(ObjectId),
    Contains(ObjectId),
    DrawerClosed(ObjectId),
    ContainerFull(ObjectId),
    OccupiedBy(ObjectId),
    NotLifted,
    OutsideWorkspace,
    NotADrawer(ObjectId),
    NotAContainer(ObjectId),
    Empty(ObjectId),
    NoPhysicalObject(ObjectId),
    NoReleaseTarget,
    SelfTarget,
    AngleTooSmall,
}

impl fmt::Display for Infeasible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Infeasible::*;
        match self {
            MissingObject(o) => write!(f, "missing-object({o})"),
            GripperFull(o) => write!(f, "gripper-full({o})"),
            GripperEmpty => f.write_str("gripper-empty"),
            NotAt(o) => write!(f, "not-at({o})"),
            NotGraspable(o) => write!(f, "not-graspable({o})"),
            OccludedBy(o) => write!(f, "occluded-by({o})"),
            Contains(o) => write!(f, "contains({o})"),
            DrawerClosed(_) => f.write_str("drawer-closed"),
            ContainerFull(o) => write!(f, "container-full({o})"),
            OccupiedBy(o) => write!(f, "occupied-by({o})"),
            NotLifted => f.write_str("not-lifted"),
            OutsideWorkspace => f.write_str("outside-workspace"),
            NotADrawer(o) => write!(f, "not-a-drawer({o})"),
            NotAContainer(o) => write!(f, "not-a-container({o})"),
            Empty(o) => write!(f, "empty({o})"),
            NoPhysicalObject(o) => write!(f, "no-physical-object({o})"),
            NoReleaseTarget => f.write_str("no-release-target"),
            SelfTarget => f.write_str("self-target"),
            AngleTooSmall => f.write_str("angle-too-small"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ApplyError {
    #[error("infeasible primitive {primitive}: {reason}")]
    Infeasible { primitive: String, reason: Infeasible },
}

fn object<'a>(w: &'a WorldState, id: &str) -> Result<&'a super::WorldObject, Infeasible> {
    w.objects
        .get(id)
        .ok_or_else(|| Infeasible::MissingObject(id.to_string()))
}

fn require_empty(w: &WorldState) -> Result<(), Infeasible> {
    match &w.gripper.holding {
        Some(h) => Err(Infeasible::GripperFull(h.clone())),
        None => Ok(()),
    }
}

fn require_lifted(w: &WorldState) -> Result<ObjectId, Infeasible> {
    let h = w.gripper.holding.clone().ok_or(Infeasible::GripperEmpty)?;
    if !w.gripper.lifted {
        return Err(Infeasible::NotLifted);
    }
    Ok(h)
}

fn first_blocker(w: &WorldState, id: &str) -> Option<Infeasible> {
    if let Some(top) = w.on_top_of(id).first() {
        return Some(Infeasible::OccludedBy((*top).clone()));
    }
    w.contents(id)
        .first()
        .map(|c| Infeasible::Contains((*c).clone()))
}

/// Checks preconditions of `p` against `w`.
pub fn feasible(w: &WorldState, p: &Primitive) -> Result<(), Infeasible> {
    match p {
        Primitive::Approach { object: id } => {
            object(w, id)?;
            require_empty(w)
        }
        Primitive::Grasp { object: id } => {
            let o = object(w, id)?;
            require_empty(w)?;
            if w.gripper.at.as_deref() != Some(id.as_str()) {
                return Err(Infeasible::NotAt(id.clone()));
            }
            if !o.is_graspable() {
                return Err(Infeasible::NotGraspable(id.clone()));
            }
            if o.ghost {
                return Err(Infeasible::NoPhysicalObject(id.clone()));
            }
            if let Some(b) = first_blocker(w, id) {
                return Err(b);
            }
            if let Some(d) = w.enclosing_drawer(id) {
                if !w.drawer_is_open(&d) {
                    return Err(Infeasible::DrawerClosed(d));
                }
            }
            Ok(())
        }
        Primitive::Lift => {
            w.gripper.holding.as_ref().ok_or(Infeasible::GripperEmpty)?;
            Ok(())
        }
        Primitive::MoveTo { dest, .. } => {
            if w.gripper.holding.is_some() {
                require_lifted(w)?;
            }
            match dest {
                Dest::Above(id) => {
                    object(w, id)?;
                    if w.gripper.holding.as_deref() == Some(id.as_str()) {
                        return Err(Infeasible::SelfTarget);
                    }
                    Ok(())
                }
                Dest::Table(p) => {
                    if w.workspace.contains_xy(p) {
                        Ok(())
                    } else {
                        Err(Infeasible::OutsideWorkspace)
                    }
                }
                Dest::Point(p) => {
                    if w.workspace.contains(p) {
                        Ok(())
                    } else {
                        Err(Infeasible::OutsideWorkspace)
                    }
                }
            }
        }
        Primitive::Release => {
            let held = require_lifted(w)?;
            release_target(w, &held).map(|_| ())
        }
        Primitive::OpenDrawer { drawer } | Primitive::CloseDrawer { drawer } => {
            let o = object(w, drawer)?;
            if !o.is_drawer() {
                return Err(Infeasible::NotADrawer(drawer.clone()));
            }
            require_empty(w)?;
            if w.gripper.at.as_deref() != Some(drawer.as_str()) {
                return Err(Infeasible::NotAt(drawer.clone()));
            }
            Ok(())
        }
        Primitive::Tilt { angle } => {
            let held = require_lifted(w)?;
            let Some(Dest::Above(target)) = &w.gripper.over else {
                return Err(Infeasible::NoReleaseTarget);
            };
            let t = object(w, target)?;
            if !t.is_container() || t.is_drawer() {
                return Err(Infeasible::NotAContainer(target.clone()));
            }
            if w.objects[&held].fill <= 0.0 {
                return Err(Infeasible::Empty(held));
            }
            if *angle < MIN_POUR_ANGLE {
                return Err(Infeasible::AngleTooSmall);
            }
            Ok(())
        }
    }
}

/// Where releasing `held` would put it.
fn release_target(w: &WorldState, held: &str) -> Result<Support, Infeasible> {
    match &w.gripper.over {
        Some(Dest::Above(id)) => {
            let t = object(w, id)?;
            if id == held {
                return Err(Infeasible::SelfTarget);
            }
            if t.ghost {
                return Err(Infeasible::NoPhysicalObject(id.clone()));
            }
            if t.is_container() {
                if t.is_drawer() && !w.drawer_is_open(id) {
                    return Err(Infeasible::DrawerClosed(id.clone()));
                }
                let inside = w.contents(id);
                if inside.len() >= super::container_capacity(&t.class) {
                    return Err(Infeasible::ContainerFull(inside[0].clone()));
                }
                if let Some(d) = w.enclosing_drawer(id) {
                    if !w.drawer_is_open(&d) {
                        return Err(Infeasible::DrawerClosed(d));
                    }
                }
                Ok(Support::In(id.clone()))
            } else {
                if let Some(top) = w.on_top_of(id).first() {
                    return Err(Infeasible::OccludedBy((*top).clone()));
                }
                if let Some(d) = w.enclosing_drawer(id) {
                    if !w.drawer_is_open(&d) {
                        return Err(Infeasible::DrawerClosed(d));
                    }
                }
                Ok(Support::On(id.clone()))
            }
        }
        Some(Dest::Table(p)) => table_release(w, held, p),
        Some(Dest::Point(p)) => table_release(w, held, &Vec2::new(p.x, p.y)),
        None => Err(Infeasible::NoReleaseTarget),
    }
}

fn table_release(w: &WorldState, held: &str, p: &Vec2) -> Result<Support, Infeasible> {
    if !w.workspace.contains_xy(p) {
        return Err(Infeasible::OutsideWorkspace);
    }
    let blocker = w.objects.iter().find(|(id, o)| {
        id.as_str() != held
            && o.support.is_some()
            && (o.pose.xy() - p).norm() < super::SLOT_CLEARANCE
    });
    match blocker {
        Some((id, _)) => Err(Infeasible::OccupiedBy(id.clone())),
        None => Ok(Support::Table),
    }
}

fn hover_above(w: &WorldState, id: &str) -> Vec3 {
    let o = &w.objects[id];
    let p = o.pose.position;
    Vec3::new(p.x, p.y, p.z + o.height() / 2.0 + HOVER_HEIGHT)
}

/// Applies a feasible primitive and returns the successor world.
pub fn apply(w: &WorldState, p: &Primitive) -> Result<WorldState, ApplyError> {
    feasible(w, p).map_err(|reason| ApplyError::Infeasible {
        primitive: p.to_string(),
        reason,
    })?;
    let mut n = w.clone();
    match p {
        Primitive::Approach { object } => {
            let o = &n.objects[object];
            let top = o.pose.position + Vec3::new(0.0, 0.0, o.height() / 2.0);
            n.gripper.pose.position = top;
            n.gripper.at = Some(object.clone());
            n.gripper.over = None;
        }
        Primitive::Grasp { object } => {
            n.gripper.holding = Some(object.clone());
            n.gripper.lifted = false;
            n.gripper.at = None;
            let o = n.objects.get_mut(object).expect("checked");
            o.support = None;
            n.gripper.pose.yaw = o.pose.yaw;
        }
        Primitive::Lift => {
            let z = (n.gripper.pose.position.z + HOVER_HEIGHT).min(n.workspace.max.z);
            n.gripper.pose.position.z = z;
            n.gripper.lifted = true;
        }
        Primitive::MoveTo { dest, yaw } => {
            let table = n.workspace.table_height();
            let held_h = n
                .gripper
                .holding
                .as_ref()
                .map(|h| n.objects[h].height())
                .unwrap_or(0.0);
            let target = match dest {
                Dest::Above(id) => hover_above(&n, id) + Vec3::new(0.0, 0.0, held_h),
                Dest::Table(xy) => Vec3::new(xy.x, xy.y, table + HOVER_HEIGHT + held_h),
                Dest::Point(pt) => *pt,
            };
            n.gripper.pose.position = n.workspace.clamp(&target);
            if let Some(y) = yaw {
                n.gripper.pose.yaw = *y;
            }
            n.gripper.at = None;
            n.gripper.over = Some(dest.clone());
        }
        Primitive::Release => {
            let held = n.gripper.holding.clone().expect("checked");
            let support = release_target(&n, &held).expect("checked");
            let g = n.gripper.pose;
            let o = n.objects.get_mut(&held).expect("checked");
            o.support = Some(support);
            o.pose.position.x = g.position.x;
            o.pose.position.y = g.position.y;
            o.pose.yaw = g.yaw;
            n.gripper.holding = None;
            n.gripper.lifted = false;
            n.gripper.over = None;
        }
        Primitive::OpenDrawer { drawer } => {
            n.objects.get_mut(drawer).expect("checked").open_fraction = Some(1.0);
        }
        Primitive::CloseDrawer { drawer } => {
            n.objects.get_mut(drawer).expect("checked").open_fraction = Some(0.0);
        }
        Primitive::Tilt { .. } => {
            let held = n.gripper.holding.clone().expect("checked");
            let Some(Dest::Above(target)) = n.gripper.over.clone() else {
                unreachable!("checked")
            };
            let amount = std::mem::take(&mut n.objects.get_mut(&held).expect("checked").fill);
            let t = n.objects.get_mut(&target).expect("checked");
            t.fill += amount;
            t.received_from.push(held);
        }
    }
    n.settle();
    Ok(n)
}
