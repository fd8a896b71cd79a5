use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ObjectId, Support, WorldObject, WorldState};
use crate::geometry::{Vec2, Vec3};

/// Where a moved object ends up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Table { position: Vec2, yaw: f64 },
    On(ObjectId),
    In(ObjectId),
}

/// External change to the world that the planner did not cause.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    MoveObject { object: ObjectId, to: Placement },
    GhostObject {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<ObjectId>,
        class: String,
        position: Vec2,
    },
    DropObject { object: ObjectId },
    MisdetectPose { object: ObjectId, offset: Vec2 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedPerturbation {
    /// Applied before this execution tick.
    pub tick: usize,
    pub perturbation: Perturbation,
}

/// Timestamped perturbation list for reproducible fault runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationScript {
    pub schema: String,
    pub version: u32,
    pub perturbations: Vec<TimedPerturbation>,
}

impl PerturbationScript {
    pub const SCHEMA: &'static str = "perturbation-script";

    pub fn new(perturbations: Vec<TimedPerturbation>) -> Self {
        Self {
            schema: Self::SCHEMA.into(),
            version: 1,
            perturbations,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PerturbError> {
        let s: Self =
            serde_json::from_str(text).map_err(|e| PerturbError::Format(e.to_string()))?;
        if s.schema != Self::SCHEMA || s.version != 1 {
            return Err(PerturbError::Format(format!(
                "unsupported script {} v{}",
                s.schema, s.version
            )));
        }
        Ok(s)
    }

    /// Perturbations due before `tick`.
    pub fn due(&self, tick: usize) -> impl Iterator<Item = &Perturbation> {
        self.perturbations
            .iter()
            .filter(move |p| p.tick == tick)
            .map(|p| &p.perturbation)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PerturbError {
    #[error("unknown object `{0}`")]
    UnknownObject(ObjectId),
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("perturbation script: {0}")]
    Format(String),
}

fn release_from_gripper(w: &mut WorldState, id: &str) {
    if w.gripper.holding.as_deref() == Some(id) {
        w.gripper.holding = None;
        w.gripper.lifted = false;
    }
    if w.gripper.at.as_deref() == Some(id) {
        w.gripper.at = None;
    }
    if matches!(&w.gripper.over, Some(super::Dest::Above(o)) if o == id) {
        w.gripper.over = None;
    }
}

/// Applies `p` and returns the new world; the input is left untouched on
/// error.
pub fn perturb(world: &WorldState, p: &Perturbation) -> Result<WorldState, PerturbError> {
    let mut w = world.clone();
    match p {
        Perturbation::MoveObject { object, to } => {
            if !w.objects.contains_key(object) {
                return Err(PerturbError::UnknownObject(object.clone()));
            }
            let support = match to {
                Placement::Table { position, yaw } => {
                    if !w.workspace.contains_xy(position) {
                        return Err(PerturbError::InvalidPlacement("outside workspace".into()));
                    }
                    if !w.spot_is_free(position, &[object.as_str()]) {
                        return Err(PerturbError::InvalidPlacement("spot occupied".into()));
                    }
                    let o = w.objects.get_mut(object).expect("checked");
                    o.pose.position.x = position.x;
                    o.pose.position.y = position.y;
                    o.pose.yaw = *yaw;
                    Support::Table
                }
                Placement::On(t) => Support::On(t.clone()),
                Placement::In(t) => Support::In(t.clone()),
            };
            if let Some(t) = support.parent() {
                if !w.objects.contains_key(t) {
                    return Err(PerturbError::UnknownObject(t.clone()));
                }
                if w.supports_below(t).contains(object) || t == object {
                    return Err(PerturbError::InvalidPlacement("would create a cycle".into()));
                }
                if w.gripper.holding.as_deref() == Some(t.as_str()) {
                    return Err(PerturbError::InvalidPlacement("target is held".into()));
                }
            }
            release_from_gripper(&mut w, object);
            w.objects.get_mut(object).expect("checked").support = Some(support);
        }
        Perturbation::GhostObject { id, class, position } => {
            if !w.workspace.contains_xy(position) {
                return Err(PerturbError::InvalidPlacement("outside workspace".into()));
            }
            let id = match id {
                Some(i) if w.objects.contains_key(i) => {
                    return Err(PerturbError::InvalidPlacement(format!("id `{i}` already in use")));
                }
                Some(i) => i.clone(),
                None => (0..)
                    .map(|k| format!("ghost-{k}"))
                    .find(|k| !w.objects.contains_key(k))
                    .expect("unbounded"),
            };
            let mut o = WorldObject::new(class, Vec3::new(position.x, position.y, 0.0));
            o.ghost = true;
            w.objects.insert(id, o);
        }
        Perturbation::DropObject { object } => {
            if w.objects.remove(object).is_none() {
                return Err(PerturbError::UnknownObject(object.clone()));
            }
            release_from_gripper(&mut w, object);
            for o in w.objects.values_mut() {
                if o.support.as_ref().and_then(Support::parent) == Some(object) {
                    o.support = Some(Support::Table);
                }
            }
        }
        Perturbation::MisdetectPose { object, offset } => {
            if !w.objects.contains_key(object) {
                return Err(PerturbError::UnknownObject(object.clone()));
            }
            let root = w
                .supports_below(object)
                .last()
                .cloned()
                .unwrap_or_else(|| object.clone());
            let ws = w.workspace;
            let o = w.objects.get_mut(&root).expect("exists");
            if o.support != Some(Support::Table) {
                return Err(PerturbError::InvalidPlacement("object is held".into()));
            }
            o.pose.position.x = (o.pose.position.x + offset.x).clamp(ws.min.x, ws.max.x);
            o.pose.position.y = (o.pose.position.y + offset.y).clamp(ws.min.y, ws.max.y);
        }
    }
    w.settle();
    w.validate()
        .map_err(|v| PerturbError::InvalidPlacement(v.to_string()))?;
    Ok(w)
}

/// A random perturbation that is valid for `w`, or `None` when none could
/// be found in a bounded number of tries.
pub fn random_perturbation<R: Rng + ?Sized>(w: &WorldState, rng: &mut R) -> Option<Perturbation> {
    let ids: Vec<&ObjectId> = w.objects.keys().collect();
    let ws = w.workspace;
    for _ in 0..50 {
        let xy = Vec2::new(
            rng.random_range(ws.min.x + 0.05..ws.max.x - 0.05),
            rng.random_range(ws.min.y + 0.05..ws.max.y - 0.05),
        );
        let p = match rng.random_range(0..4) {
            0 if !ids.is_empty() => {
                let object = ids[rng.random_range(0..ids.len())].clone();
                let to = if rng.random_bool(0.5) && ids.len() > 1 {
                    let t = ids[rng.random_range(0..ids.len())].clone();
                    if w.objects[&t].is_container() {
                        Placement::In(t)
                    } else {
                        Placement::On(t)
                    }
                } else {
                    Placement::Table { position: xy, yaw: 0.0 }
                };
                Perturbation::MoveObject { object, to }
            }
            1 => Perturbation::GhostObject {
                id: None,
                class: ["mug", "can", "cube"][rng.random_range(0..3)].into(),
                position: xy,
            },
            2 if !ids.is_empty() => Perturbation::DropObject {
                object: ids[rng.random_range(0..ids.len())].clone(),
            },
            3 if !ids.is_empty() => Perturbation::MisdetectPose {
                object: ids[rng.random_range(0..ids.len())].clone(),
                offset: Vec2::new(rng.random_range(-0.03..0.03), rng.random_range(-0.03..0.03)),
            },
            _ => continue,
        };
        if perturb(w, &p).is_ok() {
            return Some(p);
        }
    }
    None
}
