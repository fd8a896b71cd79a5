//! Hand-skeleton frame streams: parsing, resampling, static features and
//! palm trajectories.

mod features;
mod frame;
pub mod synth;

pub use features::{skeleton_features, static_features, FeatureVector, LayoutTag, FEATURE_COUNT, LAYOUT_V1};
pub use frame::{
    parse_frame, read_stream, stream_header, write_stream, Bone, Finger, FrameRecord, HandFrame,
    HandSkeleton, BONES_PER_FINGER, FINGER_COUNT, STREAM_SCHEMA, STREAM_VERSION,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

/// Nominal tracker output rate.
pub const SOURCE_RATE_HZ: f64 = 90.0;
/// Rate the recognizers work at.
pub const TARGET_RATE_HZ: f64 = 20.0;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamp {timestamp} does not increase (previous {previous})")]
    NonMonotonic {
        line: usize,
        previous: f64,
        timestamp: f64,
    },
    #[error("stream has no schema header line")]
    MissingHeader,
    #[error("unsupported stream schema {schema} v{version}")]
    UnsupportedSchema { schema: String, version: u32 },
    #[error("frame at t={0} has no visible hand")]
    InvisibleFrame(f64),
    #[error("io: {0}")]
    Io(String),
}

/// Nearest-neighbour resampling onto a uniform grid starting at the first
/// frame. Output frames are copies of source frames re-stamped with the grid
/// time; ties go to the earlier source frame.
pub fn resample(stream: &[HandFrame], target_rate: f64) -> Vec<HandFrame> {
    let (Some(first), Some(last)) = (stream.first(), stream.last()) else {
        return Vec::new();
    };
    assert!(target_rate > 0.0, "target rate must be positive");
    let t0 = first.timestamp;
    let mut out = Vec::new();
    let mut cursor = 0usize;
    for k in 0.. {
        let t = t0 + k as f64 / target_rate;
        if t > last.timestamp + TIME_EPS {
            break;
        }
        while cursor + 1 < stream.len()
            && (stream[cursor + 1].timestamp - t).abs() < (stream[cursor].timestamp - t).abs()
        {
            cursor += 1;
        }
        let mut frame = stream[cursor].clone();
        frame.timestamp = t;
        out.push(frame);
    }
    out
}

/// Palm-centre trajectory sampled at a fixed rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Vec3>,
    pub rate: f64,
}

impl Trajectory {
    pub fn new(points: Vec<Vec3>, rate: f64) -> Self {
        Self { points, rate }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Copy translated so the first point sits at the origin.
    pub fn anchored(&self) -> Trajectory {
        match self.points.first() {
            Some(&p0) => Trajectory::new(self.points.iter().map(|p| p - p0).collect(), self.rate),
            None => self.clone(),
        }
    }

    /// Largest distance between any two points.
    pub fn extent(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.max((a - b).norm());
            }
        }
        best
    }

    /// Linear re-interpolation to `n` evenly spaced samples over the same
    /// time span.
    pub fn resampled_to(&self, n: usize) -> Trajectory {
        let m = self.points.len();
        if m == 0 || n == 0 {
            return Trajectory::new(Vec::new(), self.rate);
        }
        if m == 1 || n == 1 {
            return Trajectory::new(vec![self.points[0]; n], self.rate);
        }
        let points = (0..n)
            .map(|i| {
                let s = i as f64 * (m - 1) as f64 / (n - 1) as f64;
                let lo = (s.floor() as usize).min(m - 2);
                let frac = s - lo as f64;
                self.points[lo] * (1.0 - frac) + self.points[lo + 1] * frac
            })
            .collect();
        let rate = self.rate * (n - 1) as f64 / (m - 1) as f64;
        Trajectory::new(points, rate)
    }
}

/// Palm positions of visible frames with timestamps in `(now - window, now]`.
pub fn trajectory_window(stream: &[HandFrame], window: f64, now: f64) -> Trajectory {
    let rate = estimate_rate(stream).unwrap_or(TARGET_RATE_HZ);
    if window <= 0.0 {
        return Trajectory::new(Vec::new(), rate);
    }
    let lo = now - window + TIME_EPS;
    let hi = now + TIME_EPS;
    let points = stream
        .iter()
        .filter(|f| f.timestamp > lo && f.timestamp <= hi)
        .filter_map(HandFrame::palm_position)
        .collect();
    Trajectory::new(points, rate)
}

fn estimate_rate(stream: &[HandFrame]) -> Option<f64> {
    if stream.len() < 2 {
        return None;
    }
    let span = stream.last()?.timestamp - stream.first()?.timestamp;
    (span > 0.0).then(|| (stream.len() - 1) as f64 / span)
}
