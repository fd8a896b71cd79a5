//! Frame stream to detection samples: streaming resampling, the two
//! classifier channels at the detection rate, and pointing resolution.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::classify::{
    classify_dynamic, dynamic_probabilities, ClassifyError, DynamicTemplates, GestureProbabilities, GestureSet,
    StaticModel, ThresholdRules, NO_GESTURE,
};
use crate::deictic::{object_distances, ray_from_skeleton, table_point, target_object, DeicticParams};
use crate::episode::DetectionSample;
use crate::handstream::{skeleton_features, trajectory_window, HandFrame, TARGET_RATE_HZ};
use crate::simworld::WorldState;

const EPS: f64 = 1e-9;

/// Nearest-neighbour resampling onto the grid `t0 + k / rate` for frames
/// arriving one at a time. Produces the same frames as
/// [`crate::handstream::resample`] over the same input.
#[derive(Clone, Debug)]
pub struct StreamResampler {
    rate: f64,
    t0: Option<f64>,
    next: usize,
    prev: Option<HandFrame>,
}

impl StreamResampler {
    pub fn new(rate: f64) -> Self {
        Self {
            rate,
            t0: None,
            next: 0,
            prev: None,
        }
    }

    fn grid(&self, k: usize) -> f64 {
        self.t0.unwrap_or(0.0) + k as f64 / self.rate
    }

    pub fn push(&mut self, frame: &HandFrame) -> Vec<HandFrame> {
        if self.t0.is_none() {
            self.t0 = Some(frame.timestamp);
        }
        let mut out = Vec::new();
        loop {
            let g = self.grid(self.next);
            if g > frame.timestamp + EPS {
                break;
            }
            let pick = match &self.prev {
                Some(p) if (g - p.timestamp) <= (frame.timestamp - g) + EPS => p,
                _ => frame,
            };
            let mut f = pick.clone();
            f.timestamp = g;
            out.push(f);
            self.next += 1;
        }
        self.prev = Some(frame.clone());
        out
    }
}

/// Static channel implementation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StaticBackend {
    Model { model: StaticModel },
    /// Threshold rules reported as certain detections.
    Rules { rules: ThresholdRules },
}

impl StaticBackend {
    pub fn probabilities(&self, set: &GestureSet, hand: &crate::handstream::HandSkeleton) -> Result<Vec<f64>, ClassifyError> {
        let f = skeleton_features(hand);
        match self {
            StaticBackend::Model { model } => model.probabilities(&f),
            StaticBackend::Rules { rules } => {
                let label = rules.classify(&f);
                Ok(set
                    .static_labels
                    .iter()
                    .map(|l| if l == label { 1.0 } else { 0.0 })
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detector {
    pub set: GestureSet,
    pub static_backend: StaticBackend,
    pub templates: DynamicTemplates,
    pub deictic: DeicticParams,
    /// Trajectory window for the dynamic channel, seconds.
    pub window: f64,
    /// Every n-th resampled frame is classified.
    pub decimation: usize,
    /// Fewer window points than this give `no_gesture`.
    pub min_window_points: usize,
}

impl Detector {
    pub fn new(set: GestureSet, static_backend: StaticBackend, templates: DynamicTemplates) -> Self {
        Self {
            set,
            static_backend,
            templates,
            deictic: DeicticParams::default(),
            window: 1.0,
            decimation: 2,
            min_window_points: 10,
        }
    }

    /// Rule-based static channel and the default swipe templates.
    pub fn with_rules(set: GestureSet) -> Self {
        let templates = DynamicTemplates::default_swipes(&set).expect("default templates");
        Self::new(set, StaticBackend::Rules { rules: ThresholdRules::default() }, templates)
    }

    pub fn detection_period(&self) -> f64 {
        self.decimation as f64 / TARGET_RATE_HZ
    }

    fn idle(&self, t: f64) -> GestureProbabilities {
        GestureProbabilities::one_hot(&self.set, NO_GESTURE, t)
    }

    /// Detection at the last frame of `history` (resampled, oldest first).
    pub fn sample(&self, history: &[HandFrame], world: Option<&WorldState>) -> Result<DetectionSample, ClassifyError> {
        let now = history.last().expect("non-empty history");
        let t = now.timestamp;
        let Some(hand) = &now.hand else {
            return Ok(DetectionSample::bare(self.idle(t)));
        };
        let mut probs = self.idle(t);
        probs.static_probs = self.static_backend.probabilities(&self.set, hand)?;
        let traj = trajectory_window(history, self.window, t);
        if traj.len() >= self.min_window_points {
            let decision = classify_dynamic(&self.templates, &traj)?;
            let (labels, p) = dynamic_probabilities(&decision, self.templates.no_gesture_cutoff);
            probs.dynamic_labels = labels;
            probs.dynamic_probs = p;
        }
        let mut s = DetectionSample::bare(probs);
        s.pinch = Some(hand.pinch_distance());
        s.heading = Some(hand.z_rotation);
        if let (Some(w), Ok(ray)) = (world, ray_from_skeleton(hand, self.deictic.source)) {
            s.target = target_object(&object_distances(&ray, w, &self.deictic));
            s.location = table_point(&ray, w);
        }
        Ok(s)
    }
}

/// Incremental detector: raw frames in, detection samples out.
#[derive(Clone, Debug)]
pub struct DetectorState {
    resampler: StreamResampler,
    history: VecDeque<HandFrame>,
    count: usize,
}

impl DetectorState {
    pub fn new() -> Self {
        Self {
            resampler: StreamResampler::new(TARGET_RATE_HZ),
            history: VecDeque::new(),
            count: 0,
        }
    }

    /// Resampled frames produced by `frame` and the samples taken at them.
    pub fn push(
        &mut self,
        detector: &Detector,
        frame: &HandFrame,
        world: Option<&WorldState>,
    ) -> Result<(Vec<HandFrame>, Vec<DetectionSample>), ClassifyError> {
        let frames = self.resampler.push(frame);
        let mut samples = Vec::new();
        for f in &frames {
            self.history.push_back(f.clone());
            let horizon = f.timestamp - detector.window - EPS;
            while self.history.front().is_some_and(|h| h.timestamp <= horizon) {
                self.history.pop_front();
            }
            if self.count.is_multiple_of(detector.decimation) {
                samples.push(detector.sample(self.history.make_contiguous(), world)?);
            }
            self.count += 1;
        }
        Ok((frames, samples))
    }
}

impl Default for DetectorState {
    fn default() -> Self {
        Self::new()
    }
}

/// Batch form: resampled frames and detection samples for a whole stream.
pub fn detect_stream(
    detector: &Detector,
    frames: &[HandFrame],
    world: Option<&WorldState>,
) -> Result<(Vec<HandFrame>, Vec<DetectionSample>), ClassifyError> {
    let mut st = DetectorState::new();
    let mut all_frames = Vec::new();
    let mut all_samples = Vec::new();
    for f in frames {
        let (fr, s) = st.push(detector, f, world)?;
        all_frames.extend(fr);
        all_samples.extend(s);
    }
    Ok((all_frames, all_samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handstream::resample;
    use crate::handstream::synth::{HandPoseKind, PoseGenerator};
    use proptest::prelude::*;

    fn stream(times: &[f64], vis: &[bool]) -> Vec<HandFrame> {
        let h = PoseGenerator::noiseless().canonical(HandPoseKind::Five);
        times
            .iter()
            .zip(vis)
            .map(|(t, v)| {
                let mut hh = h.clone();
                hh.palm_position.x = *t;
                if *v { HandFrame::visible(*t, hh) } else { HandFrame::invisible(*t) }
            })
            .collect()
    }

    proptest! {
        #[test]
        fn streaming_matches_batch(steps in prop::collection::vec((0.001..0.05f64, any::<bool>()), 1..200)) {
            let mut t = 0.0;
            let mut times = Vec::new();
            let mut vis = Vec::new();
            for (dt, v) in steps {
                times.push(t);
                vis.push(v);
                t += dt;
            }
            let frames = stream(&times, &vis);
            let batch = resample(&frames, TARGET_RATE_HZ);
            let mut r = StreamResampler::new(TARGET_RATE_HZ);
            let live: Vec<HandFrame> = frames.iter().flat_map(|f| r.push(f)).collect();
            prop_assert_eq!(batch.len(), live.len());
            for (a, b) in batch.iter().zip(&live) {
                prop_assert!((a.timestamp - b.timestamp).abs() < 1e-9);
                prop_assert_eq!(&a.hand, &b.hand);
            }
        }
    }

    #[test]
    fn samples_at_ten_hertz() {
        let times: Vec<f64> = (0..90).map(|k| k as f64 / 90.0).collect();
        let frames = stream(&times, &[true; 90]);
        let d = Detector::with_rules(GestureSet::default());
        let (fr, s) = detect_stream(&d, &frames, None).unwrap();
        assert_eq!(fr.len(), 20);
        assert_eq!(s.len(), 10);
        assert!((s[1].timestamp() - 0.1).abs() < 1e-9);
        let five = d.set.static_index("five").unwrap();
        assert_eq!(s[5].probs.static_probs[five], 1.0);
        // palm slides 1 m/s along x: far beyond any template, never a swipe
        assert!(s.iter().all(|x| x.probs.dynamic_probs.iter().sum::<f64>() > 0.999));
    }
}
