//! Scripted gesture sessions rendered to hand-frame streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::synth::swipe_direction;
use crate::deictic::pointing_hand;
use crate::geometry::{Vec2, Vec3};
use crate::handstream::synth::{oriented, translate, HandPoseKind, PoseGenerator};
use crate::handstream::{HandFrame, HandSkeleton, SOURCE_RATE_HZ};
use crate::simworld::{ObjectId, WorldState};

/// Palm offset from the pointed spot: above it and slightly towards the
/// operator, so stacked objects stay distinguishable along the line.
pub const POINT_OFFSET: [f64; 3] = [0.0, -0.1, 0.3];
/// Palm position of episodes that do not point.
pub const REST_PALM: [f64; 3] = [0.0, -0.3, 0.25];
/// Stroke length and duration of a scripted swipe.
pub const SWIPE_LENGTH: f64 = 0.3;
pub const SWIPE_STROKE: f64 = 0.5;
/// Length of the completion signal: visible, but too short for any event.
pub const FLASH_SECONDS: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ScriptError {
    #[error("unknown pose `{0}`")]
    UnknownPose(String),
    #[error("unknown swipe `{0}`")]
    UnknownSwipe(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("step duration {0} must be positive")]
    Duration(f64),
}

/// One held pose or motion inside an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    Pose { label: String, seconds: f64 },
    /// Point at an object's base from above.
    Point { target: ObjectId, seconds: f64 },
    /// Point down at a table location.
    PointAt { location: Vec2, seconds: f64 },
    Pinch { aperture: f64, seconds: f64 },
    /// Keeps the previous hand shape while the palm strokes along the swipe
    /// direction, then holds still for the rest of `seconds`.
    Swipe { label: String, seconds: f64 },
}

impl Step {
    pub fn seconds(&self) -> f64 {
        match self {
            Step::Pose { seconds, .. }
            | Step::Point { seconds, .. }
            | Step::PointAt { seconds, .. }
            | Step::Pinch { seconds, .. }
            | Step::Swipe { seconds, .. } => *seconds,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptEpisode {
    pub steps: Vec<Step>,
}

impl ScriptEpisode {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps }
    }

    pub fn pose(label: &str) -> Self {
        Self::new(vec![pose(label, 0.6)])
    }

    /// Action pose followed by pointing at `target`.
    pub fn act_on(label: &str, target: &str) -> Self {
        Self::new(vec![pose(label, 0.6), point(target, 0.6)])
    }

    pub fn point(target: &str) -> Self {
        Self::new(vec![point(target, 0.6)])
    }

    pub fn pinch(aperture: f64) -> Self {
        Self::new(vec![Step::Pinch { aperture, seconds: 0.6 }])
    }

    /// Completion signal.
    pub fn flash() -> Self {
        Self::new(vec![pose("five", FLASH_SECONDS)])
    }

    pub fn seconds(&self) -> f64 {
        self.steps.iter().map(Step::seconds).sum()
    }
}

pub fn pose(label: &str, seconds: f64) -> Step {
    Step::Pose { label: label.into(), seconds }
}

pub fn point(target: &str, seconds: f64) -> Step {
    Step::Point { target: target.into(), seconds }
}

/// Episodes separated by hand-absent gaps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GestureScript {
    pub episodes: Vec<ScriptEpisode>,
    /// Hand-absent time before, between and after episodes, seconds.
    pub gap: f64,
    pub rate: f64,
    /// Joint noise, meters; drawn from the session seed.
    pub noise: f64,
}

impl Default for GestureScript {
    fn default() -> Self {
        Self {
            episodes: Vec::new(),
            gap: 1.2,
            rate: SOURCE_RATE_HZ,
            noise: 0.0,
        }
    }
}

impl GestureScript {
    pub fn new(episodes: Vec<ScriptEpisode>) -> Self {
        Self { episodes, ..Default::default() }
    }

    pub fn duration(&self) -> f64 {
        self.episodes.iter().map(|e| e.seconds() + self.gap).sum::<f64>() + self.gap
    }

    /// Frame stream for the script in `world`, starting at `t0`. Every
    /// episode is rendered against the same world.
    pub fn render(&self, world: &WorldState, t0: f64, seed: u64) -> Result<Vec<HandFrame>, ScriptError> {
        let mut r = Renderer::new(self.rate, self.noise, seed);
        let mut frames = r.gap(t0, self.gap);
        for ep in &self.episodes {
            let next = r.next_time(&frames, t0);
            frames.extend(r.episode(ep, world, next)?);
            let next = r.next_time(&frames, t0);
            frames.extend(r.gap(next, self.gap));
        }
        Ok(frames)
    }
}

/// Frame generator shared by whole-script and episode-at-a-time rendering.
#[derive(Clone, Debug)]
pub struct Renderer {
    pub rate: f64,
    gen: PoseGenerator,
    rng: ChaCha8Rng,
}

impl Renderer {
    pub fn new(rate: f64, noise: f64, seed: u64) -> Self {
        Self {
            rate,
            gen: PoseGenerator {
                joint_noise: noise,
                angle_jitter: 0.0,
                random_placement: false,
                max_aperture: 0.0,
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Time of the frame after the last of `frames`.
    pub fn next_time(&self, frames: &[HandFrame], t0: f64) -> f64 {
        frames.last().map_or(t0, |f| f.timestamp + 1.0 / self.rate)
    }

    fn times(&self, t0: f64, seconds: f64) -> Vec<f64> {
        let n = (seconds * self.rate).round().max(0.0) as usize;
        (0..n).map(|i| t0 + i as f64 / self.rate).collect()
    }

    /// Hand-absent frames.
    pub fn gap(&self, t0: f64, seconds: f64) -> Vec<HandFrame> {
        self.times(t0, seconds).into_iter().map(HandFrame::invisible).collect()
    }

    /// Visible frames of one episode, pointing at objects where they are in
    /// `world`.
    pub fn episode(&mut self, ep: &ScriptEpisode, world: &WorldState, t0: f64) -> Result<Vec<HandFrame>, ScriptError> {
        let mut frames = Vec::new();
        let mut palm = episode_palm(ep, world)?;
        let mut shape: Option<HandSkeleton> = None;
        let mut next = t0;
        for step in &ep.steps {
            if step.seconds() <= 0.0 {
                return Err(ScriptError::Duration(step.seconds()));
            }
            let ts = self.times(next, step.seconds());
            next += ts.len() as f64 / self.rate;
            match step {
                Step::Swipe { label, .. } => {
                    let dir = swipe_direction(label).ok_or_else(|| ScriptError::UnknownSwipe(label.clone()))?;
                    let base = shape
                        .clone()
                        .unwrap_or_else(|| oriented(&self.gen.canonical(HandPoseKind::Grab), palm, Vec3::y()));
                    let from = palm;
                    let start = ts.first().copied().unwrap_or(next);
                    for t in &ts {
                        let u = ((t - start) / SWIPE_STROKE).clamp(0.0, 1.0);
                        frames.push(HandFrame::visible(*t, moved(&base, from + dir * (SWIPE_LENGTH * min_jerk(u)))));
                    }
                    palm = from + dir * SWIPE_LENGTH;
                    shape = Some(moved(&base, palm));
                }
                _ => {
                    let target = step_target(step, world)?;
                    for t in &ts {
                        let h = match (step, target) {
                            (Step::Pose { label, .. }, _) => {
                                let kind = HandPoseKind::from_label(label).ok_or_else(|| ScriptError::UnknownPose(label.clone()))?;
                                oriented(&noisy(&self.gen, kind, &mut self.rng), palm, Vec3::y())
                            }
                            (Step::Pinch { aperture, .. }, _) => oriented(&self.gen.pinch_with_aperture(*aperture), palm, Vec3::y()),
                            (_, Some(target)) => pointing_hand(palm, target),
                            _ => unreachable!("pointing steps have a target"),
                        };
                        shape = Some(h.clone());
                        frames.push(HandFrame::visible(*t, h));
                    }
                }
            }
        }
        Ok(frames)
    }
}

fn moved(hand: &HandSkeleton, palm: Vec3) -> HandSkeleton {
    let mut h = hand.clone();
    translate(&mut h, &(palm - hand.palm_position));
    h
}

fn noisy(gen: &PoseGenerator, kind: HandPoseKind, rng: &mut ChaCha8Rng) -> HandSkeleton {
    if gen.joint_noise > 0.0 {
        gen.sample(kind, rng)
    } else {
        gen.canonical(kind)
    }
}

fn min_jerk(u: f64) -> f64 {
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

fn step_target(step: &Step, world: &WorldState) -> Result<Option<Vec3>, ScriptError> {
    let table = world.workspace.table_height();
    Ok(match step {
        Step::Point { target, .. } => {
            let o = world.get(target).ok_or_else(|| ScriptError::UnknownObject(target.clone()))?;
            Some(o.pose.position)
        }
        Step::PointAt { location, .. } => Some(Vec3::new(location.x, location.y, table)),
        _ => None,
    })
}

/// The palm stays put for a whole episode so pose changes never look like
/// motion: near the first pointed spot, or at the rest position.
fn episode_palm(ep: &ScriptEpisode, world: &WorldState) -> Result<Vec3, ScriptError> {
    for s in &ep.steps {
        if let Some(t) = step_target(s, world)? {
            return Ok(t + Vec3::from(POINT_OFFSET));
        }
    }
    Ok(Vec3::from(REST_PALM))
}
