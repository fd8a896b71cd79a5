//! Synthetic training and evaluation data: posed hands for the static
//! classes and parametric swipes for the dynamic ones.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GestureSet, NO_GESTURE};
use crate::geometry::Vec3;
use crate::handstream::synth::{axis_rotation, HandPoseKind, PoseGenerator};
use crate::handstream::{skeleton_features, FeatureVector, Trajectory, TARGET_RATE_HZ};

/// Joint noise of the bundled static dataset, meters.
pub const STATIC_JOINT_NOISE: f64 = 0.004;
/// Flexion jitter of the bundled static dataset, radians.
pub const STATIC_ANGLE_JITTER: f64 = 0.12;

/// Labelled feature vectors, `per_class` samples of each static label in
/// round-robin order.
pub fn static_dataset<R: Rng + ?Sized>(
    gen: &PoseGenerator,
    set: &GestureSet,
    per_class: usize,
    rng: &mut R,
) -> Vec<(FeatureVector, String)> {
    let kinds: Vec<(HandPoseKind, &String)> = set
        .static_labels
        .iter()
        .filter_map(|l| HandPoseKind::from_label(l).map(|k| (k, l)))
        .collect();
    let mut out = Vec::with_capacity(per_class * kinds.len());
    for _ in 0..per_class {
        for (k, l) in &kinds {
            out.push((skeleton_features(&gen.sample(*k, rng)), (*l).clone()));
        }
    }
    out
}

fn min_jerk(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// Unit direction of a swipe label; `None` for unknown labels.
pub fn swipe_direction(label: &str) -> Option<Vec3> {
    match label {
        "swipe_up" => Some(Vec3::z()),
        "swipe_down" => Some(-Vec3::z()),
        "swipe_left" => Some(-Vec3::x()),
        "swipe_right" => Some(Vec3::x()),
        _ => None,
    }
}

/// Minimum-jerk palm strokes inside a fixed observation window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwipeGenerator {
    pub window: f64,
    pub rate: f64,
    /// Nominal stroke length, meters.
    pub length: f64,
    /// Stroke duration at warp factor 1, seconds.
    pub base_duration: f64,
    /// Per-point Gaussian noise, meters.
    pub noise: f64,
    /// Range of the time-warp factor applied to `base_duration`.
    pub warp_range: (f64, f64),
    /// Relative spread of the stroke length.
    pub length_jitter: f64,
    /// Standard deviation of the stroke direction, radians.
    pub direction_jitter: f64,
    /// Largest net drift of a `no_gesture` sample, meters.
    pub idle_drift: f64,
}

impl Default for SwipeGenerator {
    fn default() -> Self {
        Self {
            window: 1.0,
            rate: TARGET_RATE_HZ,
            length: 0.3,
            base_duration: 0.5,
            noise: 0.004,
            warp_range: (0.5, 2.0),
            length_jitter: 0.15,
            direction_jitter: 0.15,
            idle_drift: 0.02,
        }
    }
}

impl SwipeGenerator {
    fn count(&self) -> usize {
        (self.window * self.rate).round() as usize
    }

    fn stroke(&self, dir: Vec3, length: f64, duration: f64, onset: f64) -> Vec<Vec3> {
        let origin = Vec3::new(0.0, 0.0, 0.25);
        (0..self.count())
            .map(|k| {
                let t = k as f64 / self.rate;
                origin + dir * (length * min_jerk((t - onset) / duration))
            })
            .collect()
    }

    fn noisy<R: Rng + ?Sized>(&self, mut pts: Vec<Vec3>, rng: &mut R) -> Trajectory {
        if self.noise > 0.0 {
            let n = Normal::new(0.0, self.noise).expect("valid sigma");
            for p in &mut pts {
                *p += Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng));
            }
        }
        Trajectory::new(pts, self.rate)
    }

    /// Noise-free stroke at warp 1, centred in the window.
    pub fn template(&self, label: &str) -> Option<Trajectory> {
        let dir = swipe_direction(label)?;
        let d = self.base_duration.min(self.window);
        let pts = self.stroke(dir, self.length, d, 0.5 * (self.window - d));
        Some(Trajectory::new(pts, self.rate))
    }

    /// Stroke with duration `base_duration × warp`, starting at
    /// `onset_frac` of the remaining slack in the window, plus noise.
    pub fn warped<R: Rng + ?Sized>(
        &self,
        label: &str,
        warp: f64,
        onset_frac: f64,
        rng: &mut R,
    ) -> Option<Trajectory> {
        let dir = swipe_direction(label)?;
        let d = (self.base_duration * warp).min(self.window);
        let onset = onset_frac.clamp(0.0, 1.0) * (self.window - d);
        Some(self.noisy(self.stroke(dir, self.length, d, onset), rng))
    }

    /// Random sample of `label`, which may be `no_gesture`.
    pub fn sample<R: Rng + ?Sized>(&self, label: &str, rng: &mut R) -> Option<Trajectory> {
        if label == NO_GESTURE {
            let drift = random_unit(rng) * rng.random_range(0.0..=self.idle_drift);
            let n = self.count();
            let pts = (0..n)
                .map(|k| Vec3::new(0.0, 0.0, 0.25) + drift * (k as f64 / (n - 1).max(1) as f64))
                .collect();
            return Some(self.noisy(pts, rng));
        }
        let base = swipe_direction(label)?;
        let (lo, hi) = self.warp_range;
        let warp = (rng.random_range(lo.ln()..=hi.ln())).exp();
        let d = (self.base_duration * warp).min(self.window);
        let onset = rng.random_range(0.0..=1.0) * (self.window - d);
        let tilt = Normal::new(0.0, self.direction_jitter.max(1e-12))
            .expect("valid sigma")
            .sample(rng);
        let axis = random_unit(rng).cross(&base);
        let dir = if axis.norm() > 1e-9 {
            axis_rotation(&axis, tilt) * base
        } else {
            base
        };
        let length = self.length * (1.0 + rng.random_range(-self.length_jitter..=self.length_jitter));
        Some(self.noisy(self.stroke(dir, length, d, onset), rng))
    }

    /// `per_class` samples of every dynamic label and of `no_gesture`.
    pub fn dataset<R: Rng + ?Sized>(
        &self,
        set: &GestureSet,
        per_class: usize,
        rng: &mut R,
    ) -> Vec<(Trajectory, String)> {
        let labels = set.dynamic_with_none();
        let mut out = Vec::with_capacity(per_class * labels.len());
        for _ in 0..per_class {
            for l in &labels {
                if let Some(t) = self.sample(l, rng) {
                    out.push((t, l.clone()));
                }
            }
        }
        out
    }
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn template_shape() {
        let g = SwipeGenerator::default();
        let t = g.template("swipe_up").unwrap();
        assert_eq!(t.len(), 20);
        let rise = t.points.last().unwrap().z - t.points[0].z;
        assert!((rise - 0.3).abs() < 1e-3, "{rise}");
        assert!(g.template("wave").is_none());
    }

    #[test]
    fn idle_drift_bounded() {
        let g = SwipeGenerator {
            noise: 0.0,
            ..SwipeGenerator::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let t = g.sample(NO_GESTURE, &mut rng).unwrap();
            assert!(t.extent() <= 0.02 + 1e-12);
        }
    }

    #[test]
    fn dataset_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let set = GestureSet::default();
        assert_eq!(SwipeGenerator::default().dataset(&set, 3, &mut rng).len(), 15);
        let st = static_dataset(&PoseGenerator::new(0.004, 0.1), &set, 2, &mut rng);
        assert_eq!(st.len(), 16);
        assert_eq!(st[0].1, "grab");
    }
}
