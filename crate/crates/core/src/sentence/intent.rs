use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fmt_num, required_slots, Action, GestureSentence, GestureTable, ParamKind, Reference, SentenceError};
use crate::classify::{Channel, GestureProbabilities, GestureSet, NO_GESTURE};
use crate::episode::{DetectionSample, GestureEvent};
use crate::mlp::{Mlp, TrainConfig};
use crate::simworld::{ObjectId, WorldState};

/// Top-two action probabilities closer than this ask for clarification.
pub const AMBIGUITY_GAP: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxParam {
    Location(Reference),
    /// Percent of full speed.
    Speed(f64),
    /// Degrees.
    Angle(f64),
    /// Meters.
    Distance(f64),
    /// `up`, `down`, `left` or `right`.
    Direction(String),
}

impl fmt::Display for AuxParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuxParam::Location(r) => write!(f, "{r}"),
            AuxParam::Speed(v) => write!(f, "{}%", fmt_num(*v)),
            AuxParam::Angle(v) => write!(f, "{}°", fmt_num(*v)),
            AuxParam::Distance(v) => write!(f, "{}m", fmt_num(*v)),
            AuxParam::Direction(d) => f.write_str(d),
        }
    }
}

/// (action, target object, auxiliary parameters).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub action: Action,
    pub object: Option<ObjectId>,
    pub params: Vec<AuxParam>,
    /// Probability of the chosen action.
    pub confidence: f64,
}

impl Intent {
    pub fn new(action: Action, object: Option<&str>, params: Vec<AuxParam>) -> Self {
        Self {
            action,
            object: object.map(String::from),
            params,
            confidence: 1.0,
        }
    }

    pub fn location(&self) -> Option<&Reference> {
        self.params.iter().find_map(|p| match p {
            AuxParam::Location(r) => Some(r),
            _ => None,
        })
    }

    pub fn locations(&self) -> impl Iterator<Item = &Reference> {
        self.params.iter().filter_map(|p| match p {
            AuxParam::Location(r) => Some(r),
            _ => None,
        })
    }

    pub fn angle(&self) -> Option<f64> {
        self.params.iter().find_map(|p| match p {
            AuxParam::Angle(a) => Some(*a),
            _ => None,
        })
    }

    pub fn speed(&self) -> Option<f64> {
        self.params.iter().find_map(|p| match p {
            AuxParam::Speed(a) => Some(*a),
            _ => None,
        })
    }

    pub fn direction(&self) -> Option<&str> {
        self.params.iter().find_map(|p| match p {
            AuxParam::Direction(d) => Some(d.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params.iter().map(ToString::to_string).collect();
        write!(
            f,
            "({}, {}, [{}])",
            self.action,
            self.object.as_deref().unwrap_or("-"),
            params.join(", ")
        )
    }
}

/// Scene facts that decide between context-dependent actions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntentContext {
    pub holding: bool,
    pub any_drawer_open: bool,
    pub object_count: usize,
    /// A referenced location other than the target is a drawer.
    pub dest_is_drawer: bool,
    /// The target is a drawer and it is open.
    pub target_is_open_drawer: bool,
}

pub const SCENE_FEATURES: usize = 5;

impl IntentContext {
    pub fn new(sentence: &GestureSentence, world: &WorldState, table: &GestureTable) -> Self {
        let holding = world.holding().cloned();
        let (target, rest) = split_target(sentence, table.action_of(&sentence.gesture), holding.as_ref());
        let is_drawer = |r: &Reference| matches!(r, Reference::Object(id) if world.get(id).is_some_and(|o| o.is_drawer()));
        Self {
            holding: holding.is_some(),
            any_drawer_open: world.objects.keys().any(|id| world.drawer_is_open(id)),
            object_count: world.objects.len(),
            dest_is_drawer: rest.iter().any(is_drawer),
            target_is_open_drawer: target.as_ref().is_some_and(|t| world.drawer_is_open(t)),
        }
    }

    /// Final action for a gesture's base action.
    pub fn resolve(&self, base: Action) -> Action {
        match base {
            Action::Move if self.holding || self.dest_is_drawer => Action::Put,
            Action::Open if self.target_is_open_drawer => Action::Close,
            a => a,
        }
    }
}

pub fn scene_features(ctx: &IntentContext) -> [f64; SCENE_FEATURES] {
    let b = |v: bool| if v { 1.0 } else { 0.0 };
    [
        b(ctx.holding),
        b(ctx.any_drawer_open),
        ctx.object_count as f64 / 10.0,
        b(ctx.dest_is_drawer),
        b(ctx.target_is_open_drawer),
    ]
}

/// Target and remaining references. Actions that act on the held object
/// take it as the target when the sentence names one object fewer.
fn split_target(
    sentence: &GestureSentence,
    base: Option<Action>,
    holding: Option<&ObjectId>,
) -> (Option<ObjectId>, Vec<Reference>) {
    let objs = &sentence.objects;
    let Some(base) = base else {
        return (None, objs.clone());
    };
    let full = required_slots(base, false).required.len();
    let drops_held = required_slots(base, true).required.len() < full;
    let first_id = |r: Option<&Reference>| match r {
        Some(Reference::Object(id)) => Some(id.clone()),
        _ => None,
    };
    if full == 0 {
        (None, objs.clone())
    } else if objs.len() < full && drops_held && holding.is_some() {
        (holding.cloned(), objs.clone())
    } else {
        (first_id(objs.first()), objs.iter().skip(1).cloned().collect())
    }
}

/// Probabilities of the channel that carries `channel` gestures, with the
/// other channel replaced by its uninformative value.
fn channel_view(probs: &GestureProbabilities, channel: Channel) -> GestureProbabilities {
    let mut p = probs.clone();
    if channel == Channel::Dynamic {
        let n = p.static_probs.len();
        p.static_probs = vec![1.0 / n as f64; n];
    } else {
        for (l, v) in p.dynamic_labels.iter().zip(p.dynamic_probs.iter_mut()) {
            *v = if l == NO_GESTURE { 1.0 } else { 0.0 };
        }
    }
    p
}

/// P(action) = Σ_g P(g) · [action(g, context) = action] over the action
/// gestures of `channel`, normalized. Indexed like [`Action::ALL`].
pub fn action_distribution(
    probs: &GestureProbabilities,
    channel: Channel,
    table: &GestureTable,
    ctx: &IntentContext,
) -> Vec<f64> {
    let mut dist = vec![0.0; Action::ALL.len()];
    let (labels, ps) = match channel {
        Channel::Dynamic => (&probs.dynamic_labels, &probs.dynamic_probs),
        _ => (&probs.static_labels, &probs.static_probs),
    };
    for (l, p) in labels.iter().zip(ps) {
        if let Some(base) = table.action_of(l) {
            dist[ctx.resolve(base).index()] += p;
        }
    }
    let total: f64 = dist.iter().sum();
    if total > 0.0 {
        dist.iter_mut().for_each(|v| *v /= total);
    }
    dist
}

/// MLP over channel probabilities and scene features, trained on a
/// generated corpus labelled by the context rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntentClassifier {
    pub set: GestureSet,
    pub model: Mlp,
}

impl IntentClassifier {
    fn features(probs: &GestureProbabilities, ctx: &IntentContext) -> Vec<f64> {
        let mut f = probs.static_probs.clone();
        f.extend(&probs.dynamic_probs);
        f.extend(scene_features(ctx));
        f
    }

    pub fn train(set: &GestureSet, table: &GestureTable, samples: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gestures: Vec<&String> = table.actions.keys().filter(|g| set.channel_of(g).is_some()).collect();
        let mut xs = Vec::with_capacity(samples);
        let mut ys = Vec::with_capacity(samples);
        for _ in 0..samples {
            let g = gestures[rng.random_range(0..gestures.len())];
            let channel = set.channel_of(g).expect("filtered");
            let peak = rng.random_range(0.6..1.0);
            let probs = channel_view(&GestureProbabilities::peaked(set, g, peak, 0.0), channel);
            let ctx = IntentContext {
                holding: rng.random_bool(0.5),
                any_drawer_open: rng.random_bool(0.3),
                object_count: rng.random_range(1..12),
                dest_is_drawer: rng.random_bool(0.3),
                target_is_open_drawer: rng.random_bool(0.3),
            };
            ys.push(ctx.resolve(table.actions[g]).index());
            xs.push(Self::features(&probs, &ctx));
        }
        let cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        Self {
            set: set.clone(),
            model: Mlp::fit(&xs, &ys, Action::ALL.len(), &cfg),
        }
    }

    pub fn distribution(&self, probs: &GestureProbabilities, channel: Channel, ctx: &IntentContext) -> Vec<f64> {
        self.model.predict(&Self::features(&channel_view(probs, channel), ctx))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntentEstimator {
    #[default]
    Rules,
    Learned { classifier: IntentClassifier },
}

/// Detection sample inside the event span where the event's label is most
/// probable.
pub fn probs_for_event(samples: &[DetectionSample], event: &GestureEvent) -> Option<GestureProbabilities> {
    let score = |s: &DetectionSample| {
        let p = &s.probs;
        p.static_labels
            .iter()
            .zip(&p.static_probs)
            .chain(p.dynamic_labels.iter().zip(&p.dynamic_probs))
            .find(|(l, _)| *l == &event.label)
            .map_or(0.0, |(_, v)| *v)
    };
    samples
        .iter()
        .filter(|s| s.timestamp() >= event.start - 1e-9 && s.timestamp() < event.end - 1e-9)
        .max_by(|a, b| score(a).total_cmp(&score(b)))
        .map(|s| s.probs.clone())
}

/// Intent of a complete sentence in the current world. Without `probs`
/// the sentence's gesture is taken as certain.
pub fn estimate_intent(
    sentence: &GestureSentence,
    probs: Option<&GestureProbabilities>,
    world: &WorldState,
    table: &GestureTable,
    estimator: &IntentEstimator,
) -> Result<Intent, SentenceError> {
    estimate_intent_with_gap(sentence, probs, world, table, estimator, AMBIGUITY_GAP)
}

/// [`estimate_intent`] with a custom ambiguity gap.
pub fn estimate_intent_with_gap(
    sentence: &GestureSentence,
    probs: Option<&GestureProbabilities>,
    world: &WorldState,
    table: &GestureTable,
    estimator: &IntentEstimator,
    gap: f64,
) -> Result<Intent, SentenceError> {
    let base = table
        .action_of(&sentence.gesture)
        .ok_or_else(|| SentenceError::NotAnAction(sentence.gesture.clone()))?;
    let ctx = IntentContext::new(sentence, world, table);
    let dist = match (probs, estimator) {
        (None, _) => {
            let mut d = vec![0.0; Action::ALL.len()];
            d[ctx.resolve(base).index()] = 1.0;
            d
        }
        (Some(p), IntentEstimator::Rules) => action_distribution(p, sentence.channel, table, &ctx),
        (Some(p), IntentEstimator::Learned { classifier }) => classifier.distribution(p, sentence.channel, &ctx),
    };
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|a, b| dist[*b].total_cmp(&dist[*a]).then(a.cmp(b)));
    let (first, second) = (order[0], order[1]);
    if dist[first] - dist[second] < gap {
        return Err(SentenceError::Ambiguous {
            first: Action::ALL[first],
            second: Action::ALL[second],
            gap: dist[first] - dist[second],
        });
    }
    let action = Action::ALL[first];
    let holding = world.holding();
    let full = required_slots(action, false).required.len();
    let held_ok = required_slots(action, true).required.len() < full && holding.is_some();
    let needed = if held_ok { full - 1 } else { full };
    if sentence.objects.len() < needed {
        let spec = required_slots(action, held_ok);
        return Err(SentenceError::Incomplete {
            action: action.to_string(),
            missing: spec.required[sentence.objects.len()..]
                .iter()
                .map(|k| format!("{k:?}").to_lowercase())
                .collect(),
        });
    }
    let (object, rest) = split_target(sentence, Some(action), holding);
    if full > 0 && object.as_ref().is_none_or(|id| world.get(id).is_none()) {
        return Err(SentenceError::NoTarget);
    }
    let mut params: Vec<AuxParam> = rest.into_iter().take(needed.saturating_sub(usize::from(!held_ok))).map(AuxParam::Location).collect();
    for m in &sentence.metrics {
        params.push(match m.param {
            ParamKind::Speed => AuxParam::Speed(m.value),
            ParamKind::Angle => AuxParam::Angle(m.value),
            ParamKind::Distance => AuxParam::Distance(m.value),
        });
    }
    if action == Action::MoveCartesian {
        if let Some(d) = sentence.gesture.strip_prefix("swipe_") {
            params.push(AuxParam::Direction(d.to_string()));
        }
    }
    Ok(Intent {
        action,
        object,
        params,
        confidence: dist[first],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sentence::{MetricKind, MetricParam};
    use crate::simworld::{scenes, Support};

    fn sentence(g: &str, objs: &[&str], metrics: Vec<MetricParam>) -> GestureSentence {
        let set = GestureSet::default();
        GestureSentence {
            gesture: g.into(),
            channel: set.channel_of(g).unwrap(),
            objects: objs.iter().map(|o| Reference::Object(o.to_string())).collect(),
            metrics,
        }
    }

    fn holding(mut w: WorldState, id: &str) -> WorldState {
        w.objects.get_mut(id).unwrap().support = None;
        w.gripper.holding = Some(id.into());
        w.settle();
        w
    }

    fn pinch_metric(param: ParamKind, raw: f64) -> MetricParam {
        MetricParam {
            kind: MetricKind::PinchDistance,
            param,
            raw,
            value: crate::sentence::MetricMaps::default().map_pinch(param, raw),
        }
    }

    fn intent(s: &GestureSentence, w: &WorldState) -> Result<Intent, SentenceError> {
        estimate_intent(s, None, w, &GestureTable::default(), &IntentEstimator::Rules)
    }

    #[test]
    fn thumbsup_with_speed() {
        let w = scenes::tabletop();
        let s = sentence("thumbsup", &["mug", "bowl"], vec![pinch_metric(ParamKind::Speed, 0.05)]);
        assert_eq!(intent(&s, &w).unwrap().to_string(), "(move, mug, [bowl, 50%])");
    }

    #[test]
    fn context_resolution() {
        let w = scenes::tabletop();
        let held = holding(scenes::tabletop(), "spam");
        assert_eq!(intent(&sentence("thumbsup", &["bowl"], vec![]), &held).unwrap().to_string(), "(put, spam, [bowl])");
        assert_eq!(intent(&sentence("thumbsup", &["spam", "drawer"], vec![]), &w).unwrap().action, Action::Put);
        assert_eq!(intent(&sentence("two", &["drawer"], vec![]), &w).unwrap().action, Action::Open);
        let open = scenes::builtin("open-drawer").unwrap();
        assert_eq!(intent(&sentence("two", &["drawer"], vec![]), &open).unwrap().action, Action::Close);
        assert_eq!(intent(&sentence("three", &[], vec![]), &held).unwrap().to_string(), "(rotate, spam, [])");
        assert_eq!(intent(&sentence("pinch", &[], vec![]), &held).unwrap().to_string(), "(place, spam, [])");
        assert_eq!(intent(&sentence("swipe_down", &[], vec![]), &w).unwrap().to_string(), "(move_cartesian, -, [down])");
        let pour = sentence("four", &["can", "bowl"], vec![pinch_metric(ParamKind::Angle, 0.1 / 3.0)]);
        assert_eq!(intent(&pour, &w).unwrap().to_string(), "(pour, can, [bowl, 60°])");
    }

    #[test]
    fn missing_and_bad_targets() {
        let w = scenes::tabletop();
        assert!(matches!(intent(&sentence("grab", &[], vec![]), &w), Err(SentenceError::Incomplete { .. })));
        assert!(matches!(intent(&sentence("three", &[], vec![]), &w), Err(SentenceError::Incomplete { .. })));
        assert_eq!(intent(&sentence("grab", &["ghost"], vec![]), &w), Err(SentenceError::NoTarget));
        assert!(matches!(intent(&sentence("point", &["can"], vec![]), &w), Err(SentenceError::NotAnAction(_))));
    }

    #[test]
    fn ambiguous_when_split() {
        let w = scenes::tabletop();
        let set = GestureSet::default();
        let mut p = GestureProbabilities::one_hot(&set, "grab", 0.0);
        p.static_probs = vec![0.0; 8];
        p.static_probs[set.static_index("grab").unwrap()] = 0.48;
        p.static_probs[set.static_index("five").unwrap()] = 0.52;
        let s = sentence("five", &["can", "bowl"], vec![]);
        let r = estimate_intent(&s, Some(&p), &w, &GestureTable::default(), &IntentEstimator::Rules);
        assert!(matches!(r, Err(SentenceError::Ambiguous { .. })), "{r:?}");
        p.static_probs[set.static_index("grab").unwrap()] = 0.1;
        p.static_probs[set.static_index("five").unwrap()] = 0.9;
        let i = estimate_intent(&s, Some(&p), &w, &GestureTable::default(), &IntentEstimator::Rules).unwrap();
        assert_eq!(i.action, Action::Swap);
        assert!((i.confidence - 0.9).abs() < 1e-9);
    }

    #[test]
    fn point_mass_is_ignored() {
        let set = GestureSet::default();
        let p = GestureProbabilities::peaked(&set, "grab", 0.5, 0.0);
        let d = action_distribution(&p, Channel::Static, &GestureTable::default(), &IntentContext::default());
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(d[Action::Pick.index()] > 0.5);
    }

    #[test]
    fn learned_matches_rules_on_clear_input() {
        let set = GestureSet::default();
        let table = GestureTable::default();
        let c = IntentClassifier::train(&set, &table, 3000, 5);
        let est = IntentEstimator::Learned { classifier: c };
        let w = scenes::tabletop();
        let held = holding(scenes::tabletop(), "spam");
        let open = scenes::builtin("open-drawer").unwrap();
        let cases = [
            (sentence("thumbsup", &["mug", "bowl"], vec![]), &w, Action::Move),
            (sentence("thumbsup", &["bowl"], vec![]), &held, Action::Put),
            (sentence("two", &["drawer"], vec![]), &open, Action::Close),
            (sentence("two", &["drawer"], vec![]), &w, Action::Open),
            (sentence("swipe_left", &[], vec![]), &w, Action::MoveCartesian),
            (sentence("grab", &["can"], vec![]), &w, Action::Pick),
        ];
        for (s, world, want) in cases {
            let p = GestureProbabilities::peaked(&set, &s.gesture, 0.95, 0.0);
            let i = estimate_intent(&s, Some(&p), world, &table, &est).unwrap();
            assert_eq!(i.action, want, "{s}");
        }
    }

    #[test]
    fn held_target_in_drawer_context() {
        let mut w = scenes::builtin("open-drawer").unwrap();
        w.objects.get_mut("can").unwrap().support = Some(Support::In("drawer".into()));
        w.settle();
        let i = intent(&sentence("thumbsup", &["can", "bowl"], vec![]), &w).unwrap();
        assert_eq!(i.to_string(), "(move, can, [bowl])");
    }
}
