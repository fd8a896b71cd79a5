//! Gesture sentences: the gesture→action table, slot specifications,
//! metric parameters, episode-by-episode assembly and intent estimation.

mod assemble;
mod intent;

pub use assemble::{AssemblyOutcome, SentenceAssembler};
pub use intent::{
    action_distribution, estimate_intent, estimate_intent_with_gap, probs_for_event, scene_features, AuxParam, Intent,
    IntentClassifier, IntentContext, IntentEstimator, AMBIGUITY_GAP, SCENE_FEATURES,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::Channel;
use crate::geometry::Vec2;
use crate::handstream::HandFrame;
use crate::simworld::ObjectId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    MoveCartesian,
    Rotate,
    Place,
    Pick,
    Put,
    Pour,
    Open,
    Close,
    Swap,
    Move,
}

impl Action {
    pub const ALL: [Action; 10] = [
        Action::MoveCartesian,
        Action::Rotate,
        Action::Place,
        Action::Pick,
        Action::Put,
        Action::Pour,
        Action::Open,
        Action::Close,
        Action::Swap,
        Action::Move,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::MoveCartesian => "move_cartesian",
            Action::Rotate => "rotate",
            Action::Place => "place",
            Action::Pick => "pick",
            Action::Put => "put",
            Action::Pour => "pour",
            Action::Open => "open",
            Action::Close => "close",
            Action::Swap => "swap",
            Action::Move => "move",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|a| *a == self).expect("listed")
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = SentenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| SentenceError::UnknownAction(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SentenceError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("gesture `{0}` has no action")]
    NotAnAction(String),
    #[error("incomplete sentence for {action}: missing {}", missing.join(", "))]
    Incomplete { action: String, missing: Vec<String> },
    #[error("no hand in the frames for {0}")]
    MissingHand(String),
    #[error("ambiguous action: {first} vs {second} (gap {gap:.3})")]
    Ambiguous { first: Action, second: Action, gap: f64 },
    #[error("sentence has no usable target object")]
    NoTarget,
}

/// Object or table location a slot refers to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reference {
    Object(ObjectId),
    Point(Vec2),
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::Object(id) => f.write_str(id),
            Reference::Point(p) => write!(f, "({:.2}, {:.2})", p.x, p.y),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    PinchDistance,
    HandsDistance,
    PointAngle,
}

/// What a metric parameter controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// Percent of full speed.
    Speed,
    /// Degrees.
    Angle,
    /// Meters.
    Distance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricParam {
    pub kind: MetricKind,
    pub param: ParamKind,
    pub raw: f64,
    pub value: f64,
}

impl fmt::Display for MetricParam {
    /// The raw measurement: "5cm" for a pinch aperture.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MetricKind::PinchDistance => write!(f, "{}cm", fmt_num(self.raw * 100.0)),
            MetricKind::HandsDistance => write!(f, "{}m", fmt_num(self.raw)),
            MetricKind::PointAngle => write!(f, "{}°", fmt_num(self.raw.to_degrees())),
        }
    }
}

/// Integers without a fraction, everything else with up to two decimals.
pub(crate) fn fmt_num(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if (r - r.round()).abs() < 1e-9 {
        format!("{}", r.round() as i64)
    } else {
        format!("{r}")
    }
}

/// (action gesture, object references, metric parameters).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureSentence {
    pub gesture: String,
    pub channel: Channel,
    pub objects: Vec<Reference>,
    pub metrics: Vec<MetricParam>,
}

impl fmt::Display for GestureSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let objs: Vec<String> = self.objects.iter().map(ToString::to_string).collect();
        let mets: Vec<String> = self.metrics.iter().map(ToString::to_string).collect();
        write!(f, "({}, [{}], [{}])", self.gesture, objs.join(", "), mets.join(", "))
    }
}

/// Number of filled non-action slots.
pub fn complexity(sentence: &GestureSentence) -> usize {
    sentence.objects.len() + sentence.metrics.len()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    /// Must name an object.
    Object,
    /// Object or table location.
    Location,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSlotSpec {
    pub action: Action,
    pub required: Vec<SlotKind>,
    /// Optional metric slot with its default value.
    pub metric: Option<(ParamKind, f64)>,
}

impl ActionSlotSpec {
    pub fn object_slots(&self) -> usize {
        self.required.iter().filter(|k| **k == SlotKind::Object).count()
    }

    pub fn location_slots(&self) -> usize {
        self.required.iter().filter(|k| **k == SlotKind::Location).count()
    }
}

/// Slots of `action`. Put, pour, move, rotate and place act on the held
/// object when the gripper holds one, dropping their first object slot.
pub fn required_slots(action: Action, holding: bool) -> ActionSlotSpec {
    use SlotKind::*;
    let held = |full: Vec<SlotKind>| if holding { full[1..].to_vec() } else { full };
    let (required, metric) = match action {
        Action::MoveCartesian => (vec![], None),
        Action::Rotate => (held(vec![Object]), Some((ParamKind::Angle, 90.0))),
        Action::Place => (held(vec![Object]), None),
        Action::Pick => (vec![Object], None),
        Action::Put => (held(vec![Object, Location]), None),
        Action::Pour => (held(vec![Object, Object]), Some((ParamKind::Angle, 90.0))),
        Action::Open | Action::Close => (vec![Object], None),
        Action::Swap => (vec![Object, Object], None),
        Action::Move => (held(vec![Object, Location]), Some((ParamKind::Speed, 100.0))),
    };
    ActionSlotSpec {
        action,
        required,
        metric,
    }
}

pub fn required_slots_named(action: &str, holding: bool) -> Result<ActionSlotSpec, SentenceError> {
    Ok(required_slots(action.parse()?, holding))
}

/// Gesture label → base action. Context picks the final action (put vs
/// move, open vs close) during intent estimation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GestureTable {
    pub actions: BTreeMap<String, Action>,
    /// Gestures that can supply a metric parameter.
    pub metric_gestures: Vec<String>,
}

impl Default for GestureTable {
    fn default() -> Self {
        let actions = [
            ("grab", Action::Pick),
            ("pinch", Action::Place),
            ("thumbsup", Action::Move),
            ("two", Action::Open),
            ("three", Action::Rotate),
            ("four", Action::Pour),
            ("five", Action::Swap),
            ("swipe_up", Action::MoveCartesian),
            ("swipe_down", Action::MoveCartesian),
            ("swipe_left", Action::MoveCartesian),
            ("swipe_right", Action::MoveCartesian),
        ]
        .into_iter()
        .map(|(g, a)| (g.to_string(), a))
        .collect();
        Self {
            actions,
            metric_gestures: vec!["pinch".into()],
        }
    }
}

impl GestureTable {
    pub fn action_of(&self, gesture: &str) -> Option<Action> {
        self.actions.get(gesture).copied()
    }

    pub fn is_metric(&self, gesture: &str) -> bool {
        self.metric_gestures.iter().any(|g| g == gesture)
    }
}

/// Linear map from a raw measurement range onto a parameter range,
/// clamped at both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub from: (f64, f64),
    pub to: (f64, f64),
}

impl LinearMap {
    pub fn apply(&self, raw: f64) -> f64 {
        let (a, b) = self.from;
        let u = ((raw - a) / (b - a)).clamp(0.0, 1.0);
        self.to.0 + u * (self.to.1 - self.to.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricMaps {
    pub speed: LinearMap,
    pub angle: LinearMap,
    pub distance: LinearMap,
}

impl Default for MetricMaps {
    fn default() -> Self {
        Self {
            speed: LinearMap { from: (0.0, 0.10), to: (0.0, 100.0) },
            angle: LinearMap { from: (0.0, 0.10), to: (0.0, 180.0) },
            distance: LinearMap { from: (0.0, 0.10), to: (0.0, 0.10) },
        }
    }
}

impl MetricMaps {
    /// Maps a pinch aperture onto `param`.
    pub fn map_pinch(&self, param: ParamKind, raw: f64) -> f64 {
        match param {
            ParamKind::Speed => self.speed.apply(raw),
            ParamKind::Angle => self.angle.apply(raw),
            ParamKind::Distance => self.distance.apply(raw),
        }
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Metric measurement over visible frames (median over frames).
/// `hands_distance` pairs frames of `frames` and `other` by index.
pub fn metric_value(
    kind: MetricKind,
    param: ParamKind,
    frames: &[HandFrame],
    other: Option<&[HandFrame]>,
    maps: &MetricMaps,
) -> Result<MetricParam, SentenceError> {
    let hands = || frames.iter().filter_map(|f| f.hand.as_ref());
    let raw = match kind {
        MetricKind::PinchDistance => median(hands().map(|h| h.pinch_distance()).collect()),
        MetricKind::PointAngle => median(hands().map(|h| h.z_rotation).collect()),
        MetricKind::HandsDistance => {
            let other = other.ok_or_else(|| SentenceError::MissingHand("hands_distance".into()))?;
            median(
                frames
                    .iter()
                    .zip(other)
                    .filter_map(|(a, b)| Some((a.hand.as_ref()?.palm_position - b.hand.as_ref()?.palm_position).norm()))
                    .collect(),
            )
        }
    }
    .ok_or_else(|| SentenceError::MissingHand(format!("{kind:?}")))?;
    let value = match kind {
        MetricKind::PinchDistance => maps.map_pinch(param, raw),
        MetricKind::PointAngle => raw.to_degrees(),
        MetricKind::HandsDistance => raw,
    };
    Ok(MetricParam { kind, param, raw, value })
}
