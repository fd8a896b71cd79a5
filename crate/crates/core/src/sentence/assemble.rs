use serde::{Deserialize, Serialize};

use super::{required_slots, Action, ActionSlotSpec, GestureSentence, GestureTable, MetricKind, MetricMaps, MetricParam, Reference, SlotKind};
use crate::classify::GestureProbabilities;
use crate::episode::{EpisodeSummary, GestureEvent};
use crate::simworld::WorldState;

/// Result of closing a sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AssemblyOutcome {
    Complete {
        sentence: GestureSentence,
        /// Detection sample of the action gesture, when supplied.
        probs: Option<GestureProbabilities>,
    },
    Incomplete {
        sentence: GestureSentence,
        missing: Vec<SlotKind>,
    },
}

impl AssemblyOutcome {
    pub fn sentence(&self) -> &GestureSentence {
        match self {
            AssemblyOutcome::Complete { sentence, .. } | AssemblyOutcome::Incomplete { sentence, .. } => sentence,
        }
    }

    pub fn is_complete(&self) -> bool {
        matches!(self, AssemblyOutcome::Complete { .. })
    }
}

#[derive(Clone, Debug)]
struct Partial {
    sentence: GestureSentence,
    spec: ActionSlotSpec,
    probs: Option<GestureProbabilities>,
}

impl Partial {
    fn missing(&self) -> Vec<SlotKind> {
        self.spec.required[self.sentence.objects.len().min(self.spec.required.len())..].to_vec()
    }

    fn slots_full(&self) -> bool {
        self.sentence.objects.len() >= self.spec.required.len()
    }

    fn metric_open(&self) -> bool {
        self.spec.metric.is_some() && self.sentence.metrics.is_empty()
    }

    fn done(&self) -> bool {
        self.slots_full() && !self.metric_open()
    }

    fn close(self) -> AssemblyOutcome {
        let missing = self.missing();
        if missing.is_empty() {
            AssemblyOutcome::Complete {
                sentence: self.sentence,
                probs: self.probs,
            }
        } else {
            AssemblyOutcome::Incomplete {
                sentence: self.sentence,
                missing,
            }
        }
    }

    fn offer(&mut self, event: &GestureEvent, world: &WorldState) {
        if self.slots_full() {
            return;
        }
        let kind = self.spec.required[self.sentence.objects.len()];
        let object = event
            .target
            .as_ref()
            .filter(|id| world.get(id).is_some())
            .map(|id| Reference::Object(id.clone()));
        let r = match (kind, object) {
            (_, Some(o)) => o,
            (SlotKind::Location, None) => match event.location {
                Some(p) => Reference::Point(p),
                None => return,
            },
            (SlotKind::Object, None) => return,
        };
        if self.sentence.objects.last() != Some(&r) {
            self.sentence.objects.push(r);
        }
    }
}

/// Builds gesture sentences from consecutive episode summaries.
///
/// The action candidate of an episode opens a sentence. Deictic events of
/// that and later episodes fill its object slots in order. A metric
/// gesture fills an open metric slot instead of starting a sentence. An
/// episode without events closes the sentence, as does a new action.
#[derive(Clone, Debug)]
pub struct SentenceAssembler {
    pub table: GestureTable,
    pub maps: MetricMaps,
    open: Option<Partial>,
}

impl SentenceAssembler {
    pub fn new(table: GestureTable, maps: MetricMaps) -> Self {
        Self { table, maps, open: None }
    }

    pub fn is_open(&self) -> bool {
        self.open.is_some()
    }

    /// Sentence being assembled.
    pub fn pending(&self) -> Option<&GestureSentence> {
        self.open.as_ref().map(|p| &p.sentence)
    }

    /// Slots still unfilled in the open sentence.
    pub fn missing(&self) -> Vec<SlotKind> {
        self.open.as_ref().map(Partial::missing).unwrap_or_default()
    }

    /// Feeds one episode. `probs` is the detection sample of its action
    /// candidate.
    pub fn push(
        &mut self,
        summary: &EpisodeSummary,
        probs: Option<GestureProbabilities>,
        world: &WorldState,
    ) -> Vec<AssemblyOutcome> {
        let mut out = Vec::new();
        if summary.is_empty() {
            out.extend(self.finish());
            return out;
        }
        let action = summary.action_event();
        let is_metric = |p: &Partial, ev: &GestureEvent| p.metric_open() && self.table.is_metric(&ev.label);
        match (action, self.open.as_mut()) {
            (Some(ev), Some(p)) if is_metric(p, ev) => {
                if let (Some(raw), Some((param, _))) = (ev.pinch, p.spec.metric) {
                    p.sentence.metrics.push(MetricParam {
                        kind: MetricKind::PinchDistance,
                        param,
                        raw,
                        value: self.maps.map_pinch(param, raw),
                    });
                }
            }
            (Some(ev), _) => {
                let Some(base) = self.table.action_of(&ev.label) else {
                    return out;
                };
                out.extend(self.finish());
                self.open = Some(Partial {
                    sentence: GestureSentence {
                        gesture: ev.label.clone(),
                        channel: ev.channel,
                        objects: Vec::new(),
                        metrics: Vec::new(),
                    },
                    spec: required_slots(base, world.holding().is_some()),
                    probs,
                });
            }
            (None, _) => {}
        }
        if let Some(p) = self.open.as_mut() {
            for ev in summary.deictic_events() {
                p.offer(ev, world);
            }
            if p.done() {
                out.extend(self.finish());
            }
        }
        out
    }

    /// Closes the open sentence, if any.
    pub fn finish(&mut self) -> Option<AssemblyOutcome> {
        self.open.take().map(Partial::close)
    }

    pub fn base_action(&self, gesture: &str) -> Option<Action> {
        self.table.action_of(gesture)
    }
}

impl Default for SentenceAssembler {
    fn default() -> Self {
        Self::new(GestureTable::default(), MetricMaps::default())
    }
}
