use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Gripper, Pose, Support, WorldObject, WorldState, Workspace};
use crate::geometry::Vec3;

pub const SCENE_SCHEMA: &str = "gesture-scene";
pub const SCENE_VERSION: u32 = 1;

/// On-disk scene description. Objects reference their support by id
/// through `on` or `in`; positions of supported objects are derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub schema: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workspace: Option<Workspace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gripper: Option<GripperEntry>,
    #[serde(default)]
    pub objects: Vec<ObjectEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperEntry {
    pub position: Vec3,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holding: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectEntry {
    pub id: String,
    pub class: String,
    /// Table-plane position `[x, y]`; ignored for supported or held objects.
    #[serde(default)]
    pub position: [f64; 2],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "in")]
    pub inside: Option<String>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub fill: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open: Option<f64>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("scene document: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

impl SceneDocument {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }
}

/// Builds and validates the world described by `doc`.
pub fn load_scene(doc: &SceneDocument) -> Result<WorldState, SceneError> {
    if doc.schema != SCENE_SCHEMA {
        return Err(invalid("schema", format!("expected `{SCENE_SCHEMA}`, found `{}`", doc.schema)));
    }
    if doc.version != SCENE_VERSION {
        return Err(invalid("version", format!("unsupported version {}", doc.version)));
    }
    let workspace = doc.workspace.unwrap_or_default();
    if (0..3).any(|k| workspace.min[k] >= workspace.max[k]) {
        return Err(invalid("workspace", "min must be below max on every axis"));
    }
    let mut w = WorldState::new(workspace);
    let held = doc.gripper.as_ref().and_then(|g| g.holding.clone());
    let mut index = BTreeMap::new();
    for (k, e) in doc.objects.iter().enumerate() {
        let path = format!("objects[{k}]");
        if e.id.is_empty() {
            return Err(invalid(format!("{path}.id"), "empty id"));
        }
        if index.insert(e.id.clone(), k).is_some() {
            return Err(invalid(format!("{path}.id"), format!("duplicate id `{}`", e.id)));
        }
        if e.position.iter().any(|v| !v.is_finite()) || !e.yaw.is_finite() {
            return Err(invalid(format!("{path}.position"), "non-finite pose"));
        }
        let mut o = WorldObject::new(&e.class, Vec3::new(e.position[0], e.position[1], 0.0));
        o.pose.yaw = e.yaw;
        o.fill = e.fill;
        if let Some(f) = e.open {
            if !o.is_drawer() {
                return Err(invalid(format!("{path}.open"), "only drawers have an opening"));
            }
            if !(0.0..=1.0).contains(&f) {
                return Err(invalid(format!("{path}.open"), "open fraction outside [0, 1]"));
            }
            o.open_fraction = Some(f);
        }
        o.support = match (&e.on, &e.inside) {
            (Some(_), Some(_)) => {
                return Err(invalid(path, "both `on` and `in` given"));
            }
            (Some(p), None) => Some(Support::On(p.clone())),
            (None, Some(p)) => Some(Support::In(p.clone())),
            (None, None) => Some(Support::Table),
        };
        if held.as_deref() == Some(e.id.as_str()) {
            if o.support != Some(Support::Table) {
                return Err(invalid(path, "held object cannot have a support"));
            }
            o.support = None;
        }
        w.objects.insert(e.id.clone(), o);
    }
    // references, before cycle and capacity checks so paths point at the entry
    for (k, e) in doc.objects.iter().enumerate() {
        for (field, r) in [("on", &e.on), ("in", &e.inside)] {
            if let Some(r) = r {
                if !index.contains_key(r) {
                    return Err(invalid(format!("objects[{k}].{field}"), format!("unknown object `{r}`")));
                }
            }
        }
    }
    if let Some(g) = &doc.gripper {
        if let Some(h) = &g.holding {
            if !index.contains_key(h) {
                return Err(invalid("gripper.holding", format!("unknown object `{h}`")));
            }
        }
        if !workspace.contains(&g.position) {
            return Err(invalid("gripper.position", "outside workspace"));
        }
        w.gripper = Gripper {
            pose: Pose::new(g.position, g.yaw),
            holding: g.holding.clone(),
            lifted: g.holding.is_some(),
            ..Gripper::default()
        };
    } else {
        w.gripper.pose.position = workspace.clamp(&w.gripper.pose.position);
    }
    w.settle();
    w.validate().map_err(|v| {
        let path = v
            .path
            .strip_prefix("objects.")
            .and_then(|rest| {
                let (id, tail) = rest.split_once('.').unwrap_or((rest, ""));
                let k = index.get(id)?;
                let field = match tail {
                    "support" => {
                        if doc.objects[*k].inside.is_some() {
                            ".in"
                        } else {
                            ".on"
                        }
                    }
                    "" => "",
                    other => return Some(format!("objects[{k}].{other}")),
                };
                Some(format!("objects[{k}]{field}"))
            })
            .unwrap_or(v.path);
        invalid(path, v.message)
    })?;
    Ok(w)
}

/// Document that loads back to `world`.
pub fn scene_document(world: &WorldState) -> SceneDocument {
    let objects = world
        .objects
        .iter()
        .map(|(id, o)| {
            let (on, inside) = match &o.support {
                Some(Support::On(p)) => (Some(p.clone()), None),
                Some(Support::In(p)) => (None, Some(p.clone())),
                _ => (None, None),
            };
            ObjectEntry {
                id: id.clone(),
                class: o.class.clone(),
                position: [o.pose.position.x, o.pose.position.y],
                yaw: o.pose.yaw,
                on,
                inside,
                fill: o.fill,
                open: o.open_fraction,
            }
        })
        .collect();
    SceneDocument {
        schema: SCENE_SCHEMA.into(),
        version: SCENE_VERSION,
        workspace: Some(world.workspace),
        gripper: Some(GripperEntry {
            position: world.gripper.pose.position,
            yaw: world.gripper.pose.yaw,
            holding: world.gripper.holding.clone(),
        }),
        objects,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(objects: &str) -> String {
        format!(r#"{{"schema":"gesture-scene","version":1,"objects":{objects}}}"#)
    }

    #[test]
    fn empty_scene() {
        let w = load_scene(&SceneDocument::from_json(&doc("[]")).unwrap()).unwrap();
        assert!(w.objects.is_empty());
    }

    #[test]
    fn cycle_reports_path() {
        let text = doc(
            r#"[{"id":"a","class":"cube","on":"b"},{"id":"b","class":"cube","on":"a"}]"#,
        );
        let err = load_scene(&SceneDocument::from_json(&text).unwrap()).unwrap_err();
        match err {
            SceneError::Invalid { path, message } => {
                assert!(path.starts_with("objects["), "{path}");
                assert!(path.ends_with(".on"), "{path}");
                assert!(message.contains("cyclic"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn outside_workspace() {
        let text = doc(r#"[{"id":"a","class":"cube","position":[0.9,0.0]}]"#);
        let err = load_scene(&SceneDocument::from_json(&text).unwrap()).unwrap_err();
        assert_eq!(
            err,
            SceneError::Invalid {
                path: "objects[0].position".into(),
                message: "outside workspace".into()
            }
        );
    }

    #[test]
    fn unknown_reference() {
        let text = doc(r#"[{"id":"a","class":"cube","in":"bowl"}]"#);
        let err = load_scene(&SceneDocument::from_json(&text).unwrap()).unwrap_err();
        assert!(matches!(err, SceneError::Invalid { ref path, .. } if path == "objects[0].in"));
    }

    #[test]
    fn unknown_field_rejected() {
        let text = doc(r#"[{"id":"a","class":"cube","colour":"red"}]"#);
        assert!(matches!(SceneDocument::from_json(&text), Err(SceneError::Parse(_))));
    }

    #[test]
    fn round_trip() {
        let text = doc(
            r#"[{"id":"bowl","class":"bowl","position":[0.1,0.1]},
                {"id":"can","class":"can","in":"bowl","fill":1.0},
                {"id":"drawer","class":"drawer","position":[-0.3,0.3],"open":0.5},
                {"id":"mug","class":"mug","position":[0.2,-0.2]}]"#,
        );
        let w = load_scene(&SceneDocument::from_json(&text).unwrap()).unwrap();
        let again = load_scene(&SceneDocument::from_json(&scene_document(&w).to_json()).unwrap()).unwrap();
        assert_eq!(w, again);
        assert_eq!(w.objects["can"].pose.position.x, 0.1);
    }
}
