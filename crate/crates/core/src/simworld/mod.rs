//! Symbolic tabletop world: objects with support relations, a drawer, a
//! parallel gripper, primitive actions with preconditions, perturbations and
//! direct teleoperation.

mod perturb;
mod primitive;
mod scene;
pub mod scenes;
mod teleop;

pub use perturb::{
    perturb, random_perturbation, PerturbError, Perturbation, PerturbationScript, Placement, TimedPerturbation,
};
pub use primitive::{apply, feasible, ApplyError, Infeasible, Primitive};
pub use scene::{
    load_scene, scene_document, GripperEntry, ObjectEntry, SceneDocument, SceneError, SCENE_SCHEMA, SCENE_VERSION,
};
pub use teleop::{set_gripper_pose, teleop_grip, teleop_step, teleop_step_to, TeleopMap, TeleopState};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Vec2, Vec3};

pub type ObjectId = String;

/// Opening above which a drawer accepts and releases objects.
pub const DRAWER_OPEN_THRESHOLD: f64 = 0.9;
/// Objects closer than this in the table plane occupy the same spot, meters.
pub const SLOT_CLEARANCE: f64 = 0.06;
/// Position tolerance for "gripper is at" and "object is at" checks, meters.
pub const POSITION_TOLERANCE: f64 = 0.02;
/// Spacing of the free-slot search grid, meters.
pub const SLOT_SPACING: f64 = 0.1;
/// Height of the gripper above a target when lifted or hovering, meters.
pub const HOVER_HEIGHT: f64 = 0.15;

/// Target of a gripper motion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dest {
    /// Hover above an object (to stack on it or drop into it).
    Above(ObjectId),
    /// Hover above a table location.
    Table(Vec2),
    /// Free-space gripper position.
    Point(Vec3),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
}

impl Pose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self { position, yaw }
    }

    pub fn xy(&self) -> Vec2 {
        Vec2::new(self.position.x, self.position.y)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Table,
    On(ObjectId),
    In(ObjectId),
}

impl Support {
    pub fn parent(&self) -> Option<&ObjectId> {
        match self {
            Support::Table => None,
            Support::On(p) | Support::In(p) => Some(p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub class: String,
    pub pose: Pose,
    /// `None` exactly when the gripper holds the object.
    pub support: Option<Support>,
    /// Pourable contents, arbitrary units.
    #[serde(default)]
    pub fill: f64,
    /// Sources that have been poured into this object, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub received_from: Vec<ObjectId>,
    /// Inserted by a perception fault rather than present in the scene.
    #[serde(default)]
    pub ghost: bool,
    /// Drawer opening in [0, 1]; `None` for everything that is not a drawer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_fraction: Option<f64>,
}

impl WorldObject {
    pub fn new(class: &str, position: Vec3) -> Self {
        let open_fraction = (class == "drawer").then_some(0.0);
        Self {
            class: class.to_string(),
            pose: Pose::new(position, 0.0),
            support: Some(Support::Table),
            fill: 0.0,
            received_from: Vec::new(),
            ghost: false,
            open_fraction,
        }
    }

    pub fn is_drawer(&self) -> bool {
        self.class == "drawer"
    }

    pub fn is_container(&self) -> bool {
        is_container_class(&self.class)
    }

    /// Objects that can be picked up.
    pub fn is_graspable(&self) -> bool {
        !self.is_drawer()
    }

    pub fn height(&self) -> f64 {
        class_height(&self.class)
    }
}

pub fn is_container_class(class: &str) -> bool {
    matches!(class, "bowl" | "drawer")
}

/// Containers other than drawers hold at most one object.
pub fn container_capacity(class: &str) -> usize {
    match class {
        "drawer" => usize::MAX,
        "bowl" => 1,
        _ => 0,
    }
}

pub fn class_height(class: &str) -> f64 {
    match class {
        "can" => 0.10,
        "spam" => 0.06,
        "cheese" => 0.08,
        "mug" => 0.09,
        "bowl" => 0.06,
        "drawer" => 0.20,
        "cube" => 0.05,
        _ => 0.06,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gripper {
    pub pose: Pose,
    pub holding: Option<ObjectId>,
    /// Held object has been raised clear of its support.
    pub lifted: bool,
    /// Object the open gripper has been brought to, if any.
    pub at: Option<ObjectId>,
    /// Where the last move put the gripper.
    #[serde(default)]
    pub over: Option<Dest>,
}

impl Default for Gripper {
    fn default() -> Self {
        Self {
            pose: Pose::new(Vec3::new(0.0, 0.0, 0.4), 0.0),
            holding: None,
            lifted: false,
            at: None,
            over: None,
        }
    }
}

/// Axis-aligned reachable box; its bottom face is the table plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: Vec3,
    pub max: Vec3,
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            min: Vec3::new(-0.5, -0.5, 0.0),
            max: Vec3::new(0.5, 0.5, 0.6),
        }
    }
}

impl Workspace {
    pub fn table_height(&self) -> f64 {
        self.min.z
    }

    pub fn contains_xy(&self, p: &Vec2) -> bool {
        p.x >= self.min.x - 1e-12
            && p.x <= self.max.x + 1e-12
            && p.y >= self.min.y - 1e-12
            && p.y <= self.max.y + 1e-12
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.contains_xy(&Vec2::new(p.x, p.y))
            && p.z >= self.min.z - 1e-12
            && p.z <= self.max.z + 1e-12
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub objects: BTreeMap<ObjectId, WorldObject>,
    pub gripper: Gripper,
    pub workspace: Workspace,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct InvariantViolation {
    pub path: String,
    pub message: String,
}

fn violation(path: impl Into<String>, message: impl Into<String>) -> InvariantViolation {
    InvariantViolation {
        path: path.into(),
        message: message.into(),
    }
}

impl WorldState {
    pub fn new(workspace: Workspace) -> Self {
        Self {
            objects: BTreeMap::new(),
            gripper: Gripper::default(),
            workspace,
        }
    }

    pub fn get(&self, id: &str) -> Option<&WorldObject> {
        self.objects.get(id)
    }

    pub fn holding(&self) -> Option<&ObjectId> {
        self.gripper.holding.as_ref()
    }

    /// Objects resting directly on `id`.
    pub fn on_top_of(&self, id: &str) -> Vec<&ObjectId> {
        self.objects
            .iter()
            .filter(|(_, o)| matches!(&o.support, Some(Support::On(p)) if p == id))
            .map(|(k, _)| k)
            .collect()
    }

    /// Objects directly inside container `id`.
    pub fn contents(&self, id: &str) -> Vec<&ObjectId> {
        self.objects
            .iter()
            .filter(|(_, o)| matches!(&o.support, Some(Support::In(p)) if p == id))
            .map(|(k, _)| k)
            .collect()
    }

    /// Whole stack above `id`, nearest first.
    pub fn stack_above(&self, id: &str) -> Vec<ObjectId> {
        let mut out = Vec::new();
        let mut cur = id.to_string();
        while let Some(next) = self.on_top_of(&cur).first() {
            out.push((*next).clone());
            cur = (*next).clone();
        }
        out
    }

    /// Supporting chain below `id`, nearest first (excluding the table).
    pub fn supports_below(&self, id: &str) -> Vec<ObjectId> {
        let mut out = Vec::new();
        let mut cur = self.objects.get(id);
        while let Some(parent) = cur.and_then(|o| o.support.as_ref()).and_then(Support::parent) {
            if out.contains(parent) {
                break;
            }
            out.push(parent.clone());
            cur = self.objects.get(parent);
        }
        out
    }

    /// Drawer containing `id` directly or through its supports.
    pub fn enclosing_drawer(&self, id: &str) -> Option<ObjectId> {
        let mut chain = vec![id.to_string()];
        chain.extend(self.supports_below(id));
        chain
            .iter()
            .find_map(|c| match self.objects.get(c)?.support.as_ref()? {
                Support::In(p) if self.objects.get(p).is_some_and(WorldObject::is_drawer) => {
                    Some(p.clone())
                }
                _ => None,
            })
    }

    pub fn drawer_is_open(&self, id: &str) -> bool {
        self.objects
            .get(id)
            .and_then(|o| o.open_fraction)
            .is_some_and(|f| f > DRAWER_OPEN_THRESHOLD)
    }

    /// Nothing rests on or inside the object.
    pub fn is_clear(&self, id: &str) -> bool {
        self.on_top_of(id).is_empty() && self.contents(id).is_empty()
    }

    /// Table-plane spot is free of every object except `ignore`.
    pub fn spot_is_free(&self, p: &Vec2, ignore: &[&str]) -> bool {
        self.objects.iter().all(|(id, o)| {
            ignore.contains(&id.as_str())
                || o.support.is_none()
                || (o.pose.xy() - p).norm() >= SLOT_CLEARANCE
        })
    }

    /// Nearest unoccupied cell of the slot grid to `near`, skipping
    /// `reserved` spots.
    pub fn free_slot(&self, near: &Vec2, ignore: &[&str], reserved: &[Vec2]) -> Option<Vec2> {
        let ws = &self.workspace;
        let margin = 0.05;
        let nx = ((ws.max.x - ws.min.x - 2.0 * margin) / SLOT_SPACING).floor() as i64;
        let ny = ((ws.max.y - ws.min.y - 2.0 * margin) / SLOT_SPACING).floor() as i64;
        let mut best: Option<(f64, Vec2)> = None;
        for i in 0..=nx {
            for j in 0..=ny {
                let p = Vec2::new(
                    ws.min.x + margin + i as f64 * SLOT_SPACING,
                    ws.min.y + margin + j as f64 * SLOT_SPACING,
                );
                if !self.spot_is_free(&p, ignore)
                    || reserved.iter().any(|r| (r - p).norm() < SLOT_CLEARANCE)
                {
                    continue;
                }
                let d = (p - near).norm();
                if best.is_none_or(|(bd, _)| d < bd - 1e-12) {
                    best = Some((d, p));
                }
            }
        }
        best.map(|(_, p)| p)
    }

    /// Recomputes positions of stacked, contained and held objects from
    /// their supports.
    pub fn settle(&mut self) {
        let table = self.workspace.table_height();
        let ids: Vec<ObjectId> = self.objects.keys().cloned().collect();
        // resolve bottom-up by depth
        let mut order: Vec<(usize, ObjectId)> = ids
            .iter()
            .map(|id| (self.supports_below(id).len(), id.clone()))
            .collect();
        order.sort();
        for (_, id) in order {
            let obj = &self.objects[&id];
            let half = obj.height() / 2.0;
            let new_pos = match obj.support.clone() {
                Some(Support::Table) => {
                    Vec3::new(obj.pose.position.x, obj.pose.position.y, table + half)
                }
                Some(Support::On(p)) => match self.objects.get(&p) {
                    Some(base) => {
                        let b = base.pose.position;
                        Vec3::new(b.x, b.y, b.z + base.height() / 2.0 + half)
                    }
                    None => obj.pose.position,
                },
                Some(Support::In(p)) => match self.objects.get(&p) {
                    Some(c) => {
                        let b = c.pose.position;
                        Vec3::new(b.x, b.y, b.z - c.height() / 2.0 + half)
                    }
                    None => obj.pose.position,
                },
                None => {
                    let g = self.gripper.pose.position;
                    Vec3::new(g.x, g.y, g.z - half)
                }
            };
            let o = self.objects.get_mut(&id).expect("id from keys");
            o.pose.position = new_pos;
            if o.support.is_none() {
                o.pose.yaw = self.gripper.pose.yaw;
            }
        }
    }

    /// Checks every structural invariant; returns the first violation.
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        let mut held = Vec::new();
        for (id, o) in &self.objects {
            let path = format!("objects.{id}");
            match &o.support {
                None => held.push(id.clone()),
                Some(Support::Table) => {
                    if !self.workspace.contains_xy(&o.pose.xy()) {
                        return Err(violation(format!("{path}.position"), "outside workspace"));
                    }
                }
                Some(Support::On(p)) => {
                    let Some(base) = self.objects.get(p) else {
                        return Err(violation(format!("{path}.support"), format!("unknown object `{p}`")));
                    };
                    if base.is_container() {
                        return Err(violation(
                            format!("{path}.support"),
                            format!("cannot rest on container `{p}`; use `in`"),
                        ));
                    }
                }
                Some(Support::In(p)) => {
                    let Some(c) = self.objects.get(p) else {
                        return Err(violation(format!("{path}.support"), format!("unknown object `{p}`")));
                    };
                    if !c.is_container() {
                        return Err(violation(
                            format!("{path}.support"),
                            format!("`{p}` is not a container"),
                        ));
                    }
                }
            }
            if let Some(f) = o.open_fraction {
                if !(0.0..=1.0).contains(&f) {
                    return Err(violation(format!("{path}.open"), "open fraction outside [0, 1]"));
                }
            }
            if o.is_drawer() != o.open_fraction.is_some() {
                return Err(violation(format!("{path}.open"), "only drawers have an opening"));
            }
            if !o.fill.is_finite() || o.fill < 0.0 {
                return Err(violation(format!("{path}.fill"), "fill must be non-negative"));
            }
            // cycle check
            let mut seen = vec![id.clone()];
            let mut cur = o.support.as_ref().and_then(Support::parent).cloned();
            while let Some(p) = cur {
                if seen.contains(&p) {
                    return Err(violation(format!("{path}.support"), "cyclic support"));
                }
                seen.push(p.clone());
                cur = self
                    .objects
                    .get(&p)
                    .and_then(|x| x.support.as_ref())
                    .and_then(Support::parent)
                    .cloned();
            }
            let on = self.on_top_of(id).len();
            if on > 1 {
                return Err(violation(path.clone(), "more than one object rests on it"));
            }
            let inside = self.contents(id).len();
            if inside > container_capacity(&o.class) {
                return Err(violation(path.clone(), "container over capacity"));
            }
        }
        match (&self.gripper.holding, held.as_slice()) {
            (None, []) => {}
            (Some(h), [only]) if h == only => {}
            (Some(h), _) if !self.objects.contains_key(h) => {
                return Err(violation("gripper.holding", format!("unknown object `{h}`")));
            }
            _ => {
                return Err(violation(
                    "gripper.holding",
                    "held object must be exactly the one without support",
                ));
            }
        }
        if let Some(h) = &self.gripper.holding {
            if !self.objects[h].is_graspable() {
                return Err(violation("gripper.holding", "object cannot be held"));
            }
        }
        Ok(())
    }

    /// Simple world features used by intent estimation.
    pub fn any_drawer_open(&self) -> bool {
        self.objects
            .iter()
            .any(|(id, o)| o.is_drawer() && self.drawer_is_open(id))
    }

    pub fn real_object_count(&self) -> usize {
        self.objects.values().filter(|o| !o.ghost).count()
    }
}
