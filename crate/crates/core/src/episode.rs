//! Episodes: hand-visibility windows, threshold activations over
//! probability timelines, and per-episode gesture summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classify::{Channel, GestureProbabilities, NO_GESTURE};
use crate::geometry::Vec2;
use crate::handstream::HandFrame;
use crate::simworld::ObjectId;

const EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    HandLost,
    Timeout,
}

/// Which action gesture of an episode is taken as the action candidate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidatePolicy {
    #[default]
    Last,
    HighestProbability,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeParams {
    /// Invisibility shorter than this does not end an episode, seconds.
    pub debounce: f64,
    /// Longest episode, seconds.
    pub timeout: f64,
    pub threshold: f64,
    /// Activations must last strictly longer than this, seconds.
    pub min_duration: f64,
    /// Spacing of probability samples, seconds.
    pub detection_period: f64,
    pub policy: CandidatePolicy,
    /// Static labels that carry a pointing target instead of an action.
    pub deictic_labels: Vec<String>,
}

impl Default for EpisodeParams {
    fn default() -> Self {
        Self {
            debounce: 0.15,
            timeout: 3.0,
            threshold: 0.9,
            min_duration: 0.3,
            detection_period: 0.1,
            policy: CandidatePolicy::Last,
            deictic_labels: vec!["point".into()],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeBounds {
    pub start: f64,
    pub end: f64,
    pub reason: Termination,
}

impl EpisodeBounds {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start - EPS && t < self.end - EPS
    }
}

/// Incremental visibility tracker. Feed frames in time order; a closed
/// episode is returned once its end is certain.
#[derive(Clone, Debug)]
pub struct Segmenter {
    debounce: f64,
    timeout: f64,
    open: Option<f64>,
    /// Start of the current invisible run inside an open episode.
    gap: Option<f64>,
    last: Option<f64>,
}

impl Segmenter {
    pub fn new(params: &EpisodeParams) -> Self {
        Self {
            debounce: params.debounce,
            timeout: params.timeout,
            open: None,
            gap: None,
            last: None,
        }
    }

    pub fn is_open(&self) -> bool {
        self.open.is_some()
    }

    pub fn open_since(&self) -> Option<f64> {
        self.open
    }

    fn close(&mut self, end: f64, reason: Termination) -> Option<EpisodeBounds> {
        let start = self.open.take()?;
        self.gap = None;
        // flicker: too short to be a deliberate appearance
        (end - start > self.debounce + EPS).then_some(EpisodeBounds { start, end, reason })
    }

    pub fn push(&mut self, t: f64, visible: bool) -> Vec<EpisodeBounds> {
        let mut out = Vec::new();
        self.last = Some(t);
        if let (Some(_), Some(g)) = (self.open, self.gap) {
            if visible && t - g <= self.debounce + EPS {
                self.gap = None;
            } else if t - g > self.debounce + EPS {
                out.extend(self.close(g, Termination::HandLost));
            }
        }
        if let Some(start) = self.open {
            if t - start >= self.timeout - EPS {
                // a pending dropout means the hand was already gone
                let (end, reason) = match self.gap {
                    Some(g) => (g, Termination::HandLost),
                    None => (t, Termination::Timeout),
                };
                out.extend(self.close(end, reason));
            }
        }
        match (self.open, visible) {
            (None, true) => self.open = Some(t),
            (Some(_), false) if self.gap.is_none() => self.gap = Some(t),
            _ => {}
        }
        out
    }

    /// Closes whatever is open at the end of the stream.
    pub fn finish(&mut self) -> Option<EpisodeBounds> {
        let end = self.gap.or(self.last)?;
        self.close(end, Termination::HandLost)
    }
}

/// Episode boundaries of a time-ordered frame list.
pub fn segment(frames: &[HandFrame], params: &EpisodeParams) -> Vec<EpisodeBounds> {
    let mut s = Segmenter::new(params);
    let mut out = Vec::new();
    for f in frames {
        out.extend(s.push(f.timestamp, f.is_visible()));
    }
    out.extend(s.finish());
    out
}

/// A detected gesture activation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureEvent {
    pub label: String,
    pub channel: Channel,
    pub start: f64,
    pub end: f64,
    pub peak: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ObjectId>,
    /// Mean table point under the pointing ray.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Vec2>,
    /// Thumb-index distance over the event, meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinch: Option<f64>,
    /// Palm heading over the event, radians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<f64>,
}

impl GestureEvent {
    pub fn new(label: &str, channel: Channel, start: f64, end: f64, peak: f64) -> Self {
        Self {
            label: label.into(),
            channel,
            start,
            end,
            peak,
            target: None,
            location: None,
            pinch: None,
            heading: None,
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// One merged detection instant: classifier output plus the hand
/// measurements the payloads are drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionSample {
    pub probs: GestureProbabilities,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ObjectId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Vec2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<f64>,
}

impl DetectionSample {
    pub fn bare(probs: GestureProbabilities) -> Self {
        Self {
            probs,
            target: None,
            location: None,
            pinch: None,
            heading: None,
        }
    }

    pub fn timestamp(&self) -> f64 {
        self.probs.timestamp
    }
}

/// One event per maximal run of consecutive samples above `threshold`
/// lasting longer than `min_duration`. A run of `n` samples lasts
/// `n × period`. `no_gesture` never produces events.
pub fn activations(
    labels: &[String],
    samples: &[(f64, &[f64])],
    channel: Channel,
    params: &EpisodeParams,
) -> Vec<GestureEvent> {
    let mut out = Vec::new();
    for (j, label) in labels.iter().enumerate() {
        if label == NO_GESTURE {
            continue;
        }
        let mut run: Option<(usize, f64)> = None;
        let flush = |run: &mut Option<(usize, f64)>, stop: usize, out: &mut Vec<GestureEvent>| {
            if let Some((from, peak)) = run.take() {
                let n = stop - from;
                if n as f64 * params.detection_period > params.min_duration + EPS {
                    let start = samples[from].0;
                    let end = samples[stop - 1].0 + params.detection_period;
                    out.push(GestureEvent::new(label, channel, start, end, peak));
                }
            }
        };
        for (k, (_, p)) in samples.iter().enumerate() {
            let v = p.get(j).copied().unwrap_or(0.0);
            if v > params.threshold {
                run = Some(match run {
                    Some((from, peak)) => (from, peak.max(v)),
                    None => (k, v),
                });
            } else {
                flush(&mut run, k, &mut out);
            }
        }
        flush(&mut run, samples.len(), &mut out);
    }
    out.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.label.cmp(&b.label)));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub start: f64,
    pub end: f64,
    pub reason: Termination,
    pub events: Vec<GestureEvent>,
}

impl Episode {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

fn majority<T: Ord + Clone>(items: impl Iterator<Item = T>) -> Option<T> {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for i in items {
        *counts.entry(i).or_default() += 1;
    }
    // first maximum in key order: ties go to the smallest key
    let mut best: Option<(T, usize)> = None;
    for (k, n) in counts {
        if best.as_ref().is_none_or(|(_, bn)| n > *bn) {
            best = Some((k, n));
        }
    }
    best.map(|(k, _)| k)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Events of both channels for the samples inside `bounds`, with payloads
/// attached from the samples each event spans.
pub fn build_episode(bounds: &EpisodeBounds, samples: &[DetectionSample], params: &EpisodeParams) -> Episode {
    let inside: Vec<&DetectionSample> = samples.iter().filter(|s| bounds.contains(s.timestamp())).collect();
    let mut events = Vec::new();
    if let Some(first) = inside.first() {
        let st: Vec<(f64, &[f64])> = inside.iter().map(|s| (s.timestamp(), s.probs.static_probs.as_slice())).collect();
        let dy: Vec<(f64, &[f64])> = inside.iter().map(|s| (s.timestamp(), s.probs.dynamic_probs.as_slice())).collect();
        events.extend(activations(&first.probs.static_labels, &st, Channel::Static, params));
        events.extend(activations(&first.probs.dynamic_labels, &dy, Channel::Dynamic, params));
    }
    for e in events.iter_mut() {
        let span: Vec<&&DetectionSample> = inside
            .iter()
            .filter(|s| s.timestamp() >= e.start - EPS && s.timestamp() < e.end - EPS)
            .collect();
        if e.channel == Channel::Static && params.deictic_labels.contains(&e.label) {
            e.channel = Channel::Deictic;
            e.target = majority(span.iter().filter_map(|s| s.target.clone()));
            let pts: Vec<Vec2> = span.iter().filter_map(|s| s.location).collect();
            if !pts.is_empty() {
                e.location = Some(pts.iter().sum::<Vec2>() / pts.len() as f64);
            }
        }
        e.pinch = median(span.iter().filter_map(|s| s.pinch).collect());
        e.heading = median(span.iter().filter_map(|s| s.heading).collect());
    }
    events.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.label.cmp(&b.label)));
    Episode {
        start: bounds.start,
        end: bounds.end,
        reason: bounds.reason,
        events,
    }
}

/// Ordered events of an episode with the designated action candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub start: f64,
    pub end: f64,
    pub events: Vec<GestureEvent>,
    /// Index into `events`.
    pub action: Option<usize>,
}

impl EpisodeSummary {
    pub fn action_event(&self) -> Option<&GestureEvent> {
        self.action.map(|i| &self.events[i])
    }

    pub fn deictic_events(&self) -> impl Iterator<Item = &GestureEvent> {
        self.events.iter().filter(|e| e.channel == Channel::Deictic)
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

pub fn episode_summary(episode: &Episode, params: &EpisodeParams) -> EpisodeSummary {
    let mut events = episode.events.clone();
    events.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.label.cmp(&b.label)));
    let actions = events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.channel != Channel::Deictic);
    let action = match params.policy {
        // latest start; among equal starts the later end
        CandidatePolicy::Last => actions
            .max_by(|a, b| {
                a.1.start
                    .total_cmp(&b.1.start)
                    .then_with(|| a.1.end.total_cmp(&b.1.end))
            })
            .map(|(i, _)| i),
        CandidatePolicy::HighestProbability => actions
            .fold(None::<(usize, f64)>, |best, (i, e)| match best {
                Some((_, p)) if p >= e.peak => best,
                _ => Some((i, e.peak)),
            })
            .map(|(i, _)| i),
    };
    EpisodeSummary {
        start: episode.start,
        end: episode.end,
        events,
        action,
    }
}

/// Episodes from a frame list and its detection samples.
pub fn episodes(frames: &[HandFrame], samples: &[DetectionSample], params: &EpisodeParams) -> Vec<Episode> {
    segment(frames, params)
        .iter()
        .map(|b| build_episode(b, samples, params))
        .collect()
}

/// One JSON record per event, tagged with its episode index.
pub fn episode_log(episodes: &[Episode]) -> String {
    #[derive(Serialize)]
    struct Record<'a> {
        episode: usize,
        episode_start: f64,
        episode_end: f64,
        reason: Termination,
        #[serde(flatten)]
        event: &'a GestureEvent,
    }
    let mut out = String::new();
    for (k, ep) in episodes.iter().enumerate() {
        for e in &ep.events {
            let r = Record {
                episode: k,
                episode_start: ep.start,
                episode_end: ep.end,
                reason: ep.reason,
                event: e,
            };
            out.push_str(&serde_json::to_string(&r).expect("event serializes"));
            out.push('\n');
        }
    }
    out
}

/// Tab-separated probability timeline with one column per label and one
/// activation column per label (1 inside an event of that label).
pub fn probability_table(samples: &[DetectionSample], events: &[GestureEvent]) -> String {
    let Some(first) = samples.first() else {
        return String::new();
    };
    let labels: Vec<&String> = first
        .probs
        .static_labels
        .iter()
        .chain(&first.probs.dynamic_labels)
        .collect();
    let mut out = String::from("t");
    for l in &labels {
        let _ = write!(out, "\tp_{l}");
    }
    for l in &labels {
        let _ = write!(out, "\ton_{l}");
    }
    out.push('\n');
    for s in samples {
        let t = s.timestamp();
        let _ = write!(out, "{t:.2}");
        for p in s.probs.static_probs.iter().chain(&s.probs.dynamic_probs) {
            let _ = write!(out, "\t{p:.4}");
        }
        for l in &labels {
            let on = events
                .iter()
                .any(|e| &&e.label == l && t >= e.start - EPS && t < e.end - EPS);
            let _ = write!(out, "\t{}", u8::from(on));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::GestureSet;
    use crate::handstream::synth::{HandPoseKind, PoseGenerator};
    use proptest::prelude::*;

    fn frames(pattern: &[(f64, bool)], dt: f64) -> Vec<HandFrame> {
        let hand = PoseGenerator::noiseless().canonical(HandPoseKind::Five);
        let mut out = Vec::new();
        let mut t = 0.0;
        for (len, vis) in pattern {
            let n = (len / dt).round() as usize;
            for _ in 0..n {
                out.push(if *vis { HandFrame::visible(t, hand.clone()) } else { HandFrame::invisible(t) });
                t = ((t + dt) * 1e9).round() / 1e9;
            }
        }
        out
    }

    #[test]
    fn hand_lost_after_two_seconds() {
        let eps = segment(&frames(&[(2.0, true), (1.0, false)], 0.05), &EpisodeParams::default());
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].reason, Termination::HandLost);
        assert!((eps[0].duration() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn timeout_reopens() {
        let eps = segment(&frames(&[(5.0, true)], 0.05), &EpisodeParams::default());
        assert_eq!(eps.len(), 2);
        assert_eq!(eps[0].reason, Termination::Timeout);
        assert!((eps[0].duration() - 3.0).abs() < 1e-9);
        assert!((eps[1].start - 3.0).abs() < 1e-9);
    }

    #[test]
    fn flicker_is_ignored() {
        let f = frames(&[(1.0, false), (0.05, true), (1.0, false)], 0.05);
        assert!(segment(&f, &EpisodeParams::default()).is_empty());
        // short dropout inside an episode keeps it open
        let f = frames(&[(1.0, true), (0.1, false), (1.0, true), (0.5, false)], 0.05);
        let eps = segment(&f, &EpisodeParams::default());
        assert_eq!(eps.len(), 1);
        assert!((eps[0].duration() - 2.1).abs() < 1e-9);
    }

    fn series(values: &[f64]) -> Vec<(f64, Vec<f64>)> {
        values.iter().enumerate().map(|(k, v)| (k as f64 * 0.1, vec![*v])).collect()
    }

    fn acts(values: &[f64]) -> Vec<GestureEvent> {
        let s = series(values);
        let refs: Vec<(f64, &[f64])> = s.iter().map(|(t, v)| (*t, v.as_slice())).collect();
        activations(&["grab".to_string()], &refs, Channel::Static, &EpisodeParams::default())
    }

    #[test]
    fn activation_runs() {
        assert_eq!(acts(&[0.1, 0.95, 0.95, 0.95, 0.95, 0.1]).len(), 1);
        assert!(acts(&[0.1, 0.95, 0.95, 0.1]).is_empty());
        // exactly 0.3 s is not longer than 0.3 s
        assert!(acts(&[0.95, 0.95, 0.95]).is_empty());
        let two = acts(&[0.95, 0.95, 0.95, 0.95, 0.2, 0.95, 0.95, 0.95, 0.95]);
        assert_eq!(two.len(), 2);
        assert!((two[0].duration() - 0.4).abs() < 1e-9);
        assert!((two[1].start - 0.5).abs() < 1e-9);
    }

    fn sample_with(set: &GestureSet, label: &str, t: f64, target: Option<&str>) -> DetectionSample {
        let mut s = DetectionSample::bare(GestureProbabilities::one_hot(set, label, t));
        s.target = target.map(String::from);
        s
    }

    #[test]
    fn point_grab_swipe_down() {
        let set = GestureSet::default();
        let mut samples = Vec::new();
        for k in 0..30 {
            let t = k as f64 * 0.1;
            let label = match k {
                0..=7 => "point",
                _ => "grab",
            };
            let mut s = sample_with(&set, label, t, (label == "point").then_some("can"));
            if (18..24).contains(&k) {
                let d = GestureProbabilities::one_hot(&set, "swipe_down", t);
                s.probs.dynamic_probs = d.dynamic_probs;
            }
            samples.push(s);
        }
        let b = EpisodeBounds { start: 0.0, end: 3.0, reason: Termination::Timeout };
        let ep = build_episode(&b, &samples, &EpisodeParams::default());
        let labels: Vec<&str> = ep.events.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, vec!["point", "grab", "swipe_down"]);
        assert_eq!(ep.events[0].target.as_deref(), Some("can"));
        let sum = episode_summary(&ep, &EpisodeParams::default());
        assert_eq!(sum.action_event().unwrap().label, "swipe_down");
        let by_p = episode_summary(&ep, &EpisodeParams { policy: CandidatePolicy::HighestProbability, ..Default::default() });
        assert_eq!(by_p.action_event().unwrap().label, "grab");
    }

    #[test]
    fn single_thumbsup_and_empty() {
        let e = Episode {
            start: 0.0,
            end: 1.0,
            reason: Termination::HandLost,
            events: vec![GestureEvent::new("thumbsup", Channel::Static, 0.1, 0.6, 0.99)],
        };
        let s = episode_summary(&e, &EpisodeParams::default());
        assert_eq!(s.action_event().unwrap().label, "thumbsup");
        let empty = Episode { events: vec![], ..e };
        assert!(episode_summary(&empty, &EpisodeParams::default()).action.is_none());
    }

    #[test]
    fn deictic_majority_vote() {
        let set = GestureSet::default();
        let samples: Vec<DetectionSample> = (0..10)
            .map(|k| sample_with(&set, "point", k as f64 * 0.1, Some(if k < 6 { "can" } else { "bowl" })))
            .collect();
        let b = EpisodeBounds { start: 0.0, end: 1.0, reason: Termination::HandLost };
        let ep = build_episode(&b, &samples, &EpisodeParams::default());
        assert_eq!(ep.events.len(), 1);
        assert_eq!(ep.events[0].channel, Channel::Deictic);
        assert_eq!(ep.events[0].target.as_deref(), Some("can"));
        assert_eq!(majority(["b", "a", "b", "a"].into_iter()), Some("a"));
    }

    #[test]
    fn log_and_table() {
        let set = GestureSet::default();
        let samples: Vec<DetectionSample> =
            (0..6).map(|k| sample_with(&set, "five", k as f64 * 0.1, None)).collect();
        let b = EpisodeBounds { start: 0.0, end: 0.6, reason: Termination::HandLost };
        let ep = build_episode(&b, &samples, &EpisodeParams::default());
        let log = episode_log(std::slice::from_ref(&ep));
        assert_eq!(log.lines().count(), 1);
        assert!(log.contains("\"label\":\"five\""));
        let table = probability_table(&samples, &ep.events);
        assert_eq!(table.lines().count(), 7);
        assert!(table.lines().nth(1).unwrap().ends_with('0'));
    }

    /// Reference segmentation over visibility runs: runs joined across
    /// short gaps, cut at the first frame past the timeout (or at the start
    /// of the gap that frame falls in), short pieces dropped.
    fn oracle(frames: &[HandFrame], p: &EpisodeParams) -> Vec<(f64, f64)> {
        // (first visible, first invisible after or last frame)
        let mut runs: Vec<(f64, f64)> = Vec::new();
        let mut cur: Option<f64> = None;
        for f in frames {
            match (cur, f.is_visible()) {
                (None, true) => cur = Some(f.timestamp),
                (Some(s), false) => {
                    runs.push((s, f.timestamp));
                    cur = None;
                }
                _ => {}
            }
        }
        if let (Some(s), Some(l)) = (cur, frames.last()) {
            runs.push((s, l.timestamp));
        }
        // groups of runs separated by short gaps
        let mut groups: Vec<Vec<(f64, f64)>> = Vec::new();
        for r in runs {
            match groups.last_mut() {
                Some(g) if r.0 - g.last().unwrap().1 <= p.debounce + EPS => g.push(r),
                _ => groups.push(vec![r]),
            }
        }
        let times: Vec<f64> = frames.iter().map(|f| f.timestamp).collect();
        let mut out = Vec::new();
        for g in groups {
            let end = g.last().unwrap().1;
            let mut s = g[0].0;
            loop {
                let Some(c) = times.iter().copied().find(|t| *t >= s + p.timeout - EPS) else {
                    out.push((s, end));
                    break;
                };
                if c >= end - EPS {
                    out.push((s, if c <= end + EPS { c } else { end }));
                    break;
                }
                // c inside a run or inside an internal gap
                match g.iter().find(|r| c >= r.0 - EPS && c < r.1 - EPS) {
                    Some(_) => {
                        out.push((s, c));
                        s = c;
                    }
                    None => {
                        let gap_start = g.iter().filter(|r| r.1 <= c + EPS).map(|r| r.1).fold(f64::MIN, f64::max);
                        out.push((s, gap_start));
                        s = g.iter().find(|r| r.0 > c).unwrap().0;
                    }
                }
            }
        }
        out.retain(|(s, e)| e - s > p.debounce + EPS);
        out
    }

    fn arb_frames() -> impl Strategy<Value = Vec<HandFrame>> {
        prop::collection::vec((1usize..80, any::<bool>()), 1..8).prop_map(|runs| {
            let hand = PoseGenerator::noiseless().canonical(HandPoseKind::Five);
            let mut out = Vec::new();
            let mut k = 0usize;
            for (n, vis) in runs {
                for _ in 0..n {
                    let t = k as f64 * 0.05;
                    out.push(if vis { HandFrame::visible(t, hand.clone()) } else { HandFrame::invisible(t) });
                    k += 1;
                }
            }
            out
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn segment_matches_oracle(f in arb_frames()) {
            let p = EpisodeParams::default();
            let got: Vec<(f64, f64)> = segment(&f, &p).iter().map(|b| (b.start, b.end)).collect();
            let want = oracle(&f, &p);
            prop_assert_eq!(got.len(), want.len(), "{:?} vs {:?}", got, want);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g.0 - w.0).abs() < 1e-9 && (g.1 - w.1).abs() < 1e-9, "{:?} vs {:?}", got, want);
            }
        }

        #[test]
        fn episodes_bounded(f in arb_frames()) {
            let p = EpisodeParams::default();
            for b in segment(&f, &p) {
                prop_assert!(b.duration() <= p.timeout + 0.05 + 1e-9);
                prop_assert!(b.duration() > p.debounce);
            }
        }

        #[test]
        fn split_stable(a in arb_frames(), b in arb_frames()) {
            // join with a long invisible gap between the two streams
            let p = EpisodeParams::default();
            let hand_gap = 0.5;
            let offset = a.last().unwrap().timestamp + hand_gap;
            let mut joined = a.clone();
            joined.push(HandFrame::invisible(a.last().unwrap().timestamp + 0.05));
            let mut a_closed = a.clone();
            a_closed.push(HandFrame::invisible(a.last().unwrap().timestamp + 0.05));
            let mut b_shift = Vec::new();
            for fr in &b {
                let mut g = fr.clone();
                g.timestamp += offset;
                b_shift.push(g);
            }
            let mut b_open = vec![HandFrame::invisible(offset - 0.05)];
            b_open.extend(b_shift.iter().cloned());
            joined.extend(b_open.iter().cloned());
            let whole = segment(&joined, &p);
            let mut parts = segment(&a_closed, &p);
            parts.extend(segment(&b_open, &p));
            prop_assert_eq!(whole, parts);
        }

        #[test]
        fn no_short_events(vals in prop::collection::vec(0.0..1.0f64, 0..60)) {
            for e in acts(&vals) {
                prop_assert!(e.duration() > 0.3);
            }
        }

        #[test]
        fn activations_match_run_length(vals in prop::collection::vec(prop::sample::select(vec![0.2, 0.95]), 0..40)) {
            let got = acts(&vals);
            let mut want = 0;
            let mut run = 0;
            for v in vals.iter().chain(std::iter::once(&0.0)) {
                if *v > 0.9 { run += 1 } else { if run >= 4 { want += 1 } run = 0 }
            }
            prop_assert_eq!(got.len(), want);
        }
    }
}
