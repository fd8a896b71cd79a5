//! Pointing-ray resolution: perpendicular distances from the pointing line
//! to object centres, target selection and table-plane intersection.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_or_zero, Vec2, Vec3};
use crate::handstream::synth::{oriented, HandPoseKind, PoseGenerator};
use crate::handstream::{Finger, HandFrame, HandSkeleton};
use crate::simworld::{ObjectId, WorldState};

const MIN_RAY_LENGTH: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaySource {
    Finger,
    #[default]
    Palm,
}

/// Pointing line through two distinct points. The direction runs from `p1`
/// to `p2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub p1: Vec3,
    pub p2: Vec3,
    pub source: RaySource,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DeicticError {
    #[error("frame at t={0} has no visible hand")]
    Invisible(f64),
    #[error("pointing direction has zero length")]
    Degenerate,
}

impl Ray {
    pub fn new(p1: Vec3, p2: Vec3, source: RaySource) -> Result<Self, DeicticError> {
        if (p2 - p1).norm() <= MIN_RAY_LENGTH || !(p1.iter().chain(p2.iter())).all(|v| v.is_finite()) {
            return Err(DeicticError::Degenerate);
        }
        Ok(Self { p1, p2, source })
    }

    pub fn direction(&self) -> Vec3 {
        normalize_or_zero(&(self.p2 - self.p1))
    }

    /// Distance from `s` to the infinite line through `p1` and `p2`.
    pub fn distance_to(&self, s: &Vec3) -> f64 {
        let v = self.p2 - self.p1;
        (v.cross(&(self.p1 - s)).norm_squared() / v.norm_squared()).sqrt()
    }
}

pub fn ray_from_hand(frame: &HandFrame, mode: RaySource) -> Result<Ray, DeicticError> {
    let hand = frame.hand.as_ref().ok_or(DeicticError::Invisible(frame.timestamp))?;
    ray_from_skeleton(hand, mode)
}

pub fn ray_from_skeleton(hand: &HandSkeleton, mode: RaySource) -> Result<Ray, DeicticError> {
    match mode {
        RaySource::Palm => Ray::new(hand.palm_position, hand.palm_position + hand.palm_direction, mode),
        RaySource::Finger => {
            let b = hand.bone(Finger::Index, 3);
            Ray::new(b.start, b.end, mode)
        }
    }
}

/// Probability shaping for target selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeicticParams {
    /// Scale of `exp(−d/σ)`, meters.
    pub sigma: f64,
    /// Objects farther than this from the line are never selected, meters.
    pub cutoff: f64,
    pub source: RaySource,
}

impl Default for DeicticParams {
    fn default() -> Self {
        Self {
            sigma: 0.05,
            cutoff: 0.30,
            source: RaySource::Palm,
        }
    }
}

/// Per-object line distances with derived selection probabilities.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetDistances {
    pub distances: BTreeMap<ObjectId, f64>,
    /// Only objects within the cutoff; empty when none are.
    pub probabilities: BTreeMap<ObjectId, f64>,
    pub cutoff: f64,
}

impl TargetDistances {
    pub fn from_distances(distances: BTreeMap<ObjectId, f64>, params: &DeicticParams) -> Self {
        let within: Vec<(&ObjectId, f64)> = distances
            .iter()
            .filter(|(_, d)| **d <= params.cutoff)
            .map(|(k, d)| (k, *d))
            .collect();
        let mut probabilities = BTreeMap::new();
        if let Some(dmin) = within.iter().map(|(_, d)| *d).min_by(f64::total_cmp) {
            // shifted by the minimum so the nearest object never underflows
            let weights: Vec<f64> = within
                .iter()
                .map(|(_, d)| (-(d - dmin) / params.sigma).exp())
                .collect();
            let total: f64 = weights.iter().sum();
            for ((k, _), w) in within.iter().zip(weights) {
                probabilities.insert((*k).clone(), w / total);
            }
        }
        Self {
            distances,
            probabilities,
            cutoff: params.cutoff,
        }
    }
}

pub fn object_distances(ray: &Ray, world: &WorldState, params: &DeicticParams) -> TargetDistances {
    let distances = world
        .objects
        .iter()
        .map(|(id, o)| (id.clone(), ray.distance_to(&o.pose.position)))
        .collect();
    TargetDistances::from_distances(distances, params)
}

/// Nearest object within the cutoff; ties go to the lowest id.
pub fn target_object(dists: &TargetDistances) -> Option<ObjectId> {
    let mut best: Option<(&ObjectId, f64)> = None;
    for (id, d) in &dists.distances {
        if *d > dists.cutoff {
            continue;
        }
        if best.is_none_or(|(_, bd)| *d < bd) {
            best = Some((id, *d));
        }
    }
    best.map(|(id, _)| id.clone())
}

/// Where the ray meets the table, if it does so in front of `p1` and inside
/// the workspace.
pub fn table_point(ray: &Ray, world: &WorldState) -> Option<Vec2> {
    let v = ray.p2 - ray.p1;
    let z0 = world.workspace.table_height();
    if v.z.abs() < 1e-12 {
        return None;
    }
    let t = (z0 - ray.p1.z) / v.z;
    if t < 0.0 {
        return None;
    }
    let hit = ray.p1 + v * t;
    let xy = Vec2::new(hit.x, hit.y);
    world.workspace.contains_xy(&xy).then_some(xy)
}

/// Rotates the ray direction by a random angle drawn from N(0, σ) about a
/// uniformly random axis perpendicular to it.
pub fn perturb_ray<R: Rng + ?Sized>(ray: &Ray, sigma_deg: f64, rng: &mut R) -> Ray {
    if sigma_deg <= 0.0 {
        return *ray;
    }
    let d = ray.direction();
    let helper = if d.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = normalize_or_zero(&d.cross(&helper));
    let w = d.cross(&u);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let axis = u * phi.cos() + w * phi.sin();
    let angle = Normal::new(0.0, sigma_deg.to_radians())
        .expect("positive sigma")
        .sample(rng);
    let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
    let len = (ray.p2 - ray.p1).norm();
    Ray {
        p1: ray.p1,
        p2: ray.p1 + rot * d * len,
        source: ray.source,
    }
}

/// Noise-free "point" skeleton with the palm at `palm`, aimed at `target`.
pub fn pointing_hand(palm: Vec3, target: Vec3) -> HandSkeleton {
    let base = PoseGenerator::noiseless().canonical(HandPoseKind::Point);
    oriented(&base, palm, target - palm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::scenes::grid9;
    use crate::simworld::Workspace;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ray(p1: [f64; 3], p2: [f64; 3]) -> Ray {
        Ray::new(Vec3::from(p1), Vec3::from(p2), RaySource::Palm).unwrap()
    }

    fn dists(pairs: &[(&str, f64)]) -> TargetDistances {
        TargetDistances::from_distances(
            pairs.iter().map(|(k, d)| (k.to_string(), *d)).collect(),
            &DeicticParams::default(),
        )
    }

    #[test]
    fn palm_ray() {
        let mut hand = PoseGenerator::noiseless().canonical(HandPoseKind::Point);
        hand.palm_position = Vec3::zeros();
        hand.palm_direction = Vec3::x();
        let r = ray_from_hand(&HandFrame::visible(0.0, hand), RaySource::Palm).unwrap();
        assert_eq!((r.p1, r.p2), (Vec3::zeros(), Vec3::x()));
    }

    #[test]
    fn finger_ray_uses_distal_bone() {
        let mut hand = PoseGenerator::noiseless().canonical(HandPoseKind::Point);
        hand.fingers[1][3] = crate::handstream::Bone::new(Vec3::new(0.0, 0.0, 0.1), Vec3::new(0.0, 0.08, 0.1));
        let r = ray_from_skeleton(&hand, RaySource::Finger).unwrap();
        assert_eq!((r.p1, r.p2), (Vec3::new(0.0, 0.0, 0.1), Vec3::new(0.0, 0.08, 0.1)));
    }

    #[test]
    fn degenerate_and_invisible() {
        let mut hand = PoseGenerator::noiseless().canonical(HandPoseKind::Point);
        hand.palm_direction = Vec3::zeros();
        assert_eq!(ray_from_skeleton(&hand, RaySource::Palm), Err(DeicticError::Degenerate));
        assert!(matches!(
            ray_from_hand(&HandFrame::invisible(1.0), RaySource::Palm),
            Err(DeicticError::Invisible(_))
        ));
    }

    #[test]
    fn perpendicular_distance() {
        let r = ray([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        assert!((r.distance_to(&Vec3::new(0.5, 0.2, 0.0)) - 0.2).abs() < 1e-12);
        assert_eq!(r.distance_to(&Vec3::new(-3.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn selection_rules() {
        assert_eq!(target_object(&dists(&[("a", 0.02), ("b", 0.15)])).as_deref(), Some("a"));
        assert_eq!(target_object(&dists(&[("a", 0.31)])), None);
        assert_eq!(target_object(&dists(&[("b", 0.1), ("a", 0.1)])).as_deref(), Some("a"));
        let d = dists(&[("a", 0.02), ("b", 0.15), ("c", 0.5)]);
        let total: f64 = d.probabilities.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(!d.probabilities.contains_key("c"));
        assert!(dists(&[]).probabilities.is_empty());
    }

    #[test]
    fn grid_centre_is_minimal() {
        let w = grid9();
        let r = ray([0.0, 0.0, 0.5], [0.0, 0.0, 0.0]);
        let d = object_distances(&r, &w, &DeicticParams::default());
        let centre = d.distances["cube"];
        assert!(d.distances.iter().all(|(k, v)| k == "cube" || *v > centre));
        assert_eq!(target_object(&d).as_deref(), Some("cube"));
    }

    #[test]
    fn table_intersections() {
        let w = WorldState::new(Workspace::default());
        assert_eq!(table_point(&ray([0.0, 0.0, 0.5], [0.0, 0.0, -0.5]), &w), Some(Vec2::zeros()));
        assert_eq!(table_point(&ray([0.0, 0.0, 0.5], [1.0, 0.0, 0.5]), &w), None);
        let p = table_point(&ray([0.0, 0.0, 0.4], [1.0, 0.0, -0.6]), &w).unwrap();
        assert!((p - Vec2::new(0.4, 0.0)).norm() < 1e-12);
        // pointing up: the plane is behind the hand
        assert_eq!(table_point(&ray([0.0, 0.0, 0.4], [0.1, 0.0, 0.5]), &w), None);
        // lands outside the table
        assert_eq!(table_point(&ray([0.0, 0.0, 0.4], [1.0, 0.0, 0.3]), &w), None);
    }

    #[test]
    fn pointing_hand_hits_target() {
        let w = grid9();
        let target = w.objects["jar"].pose.position;
        let hand = pointing_hand(Vec3::new(0.0, -0.45, 0.35), target);
        let r = ray_from_skeleton(&hand, RaySource::Palm).unwrap();
        assert!(r.distance_to(&target) < 1e-9);
    }

    #[test]
    fn noise_sweep_is_monotone() {
        let w = grid9();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ids: Vec<String> = w.objects.keys().cloned().collect();
        let mut acc = Vec::new();
        for sigma in [0.0, 2.0, 5.0, 10.0] {
            let mut hits = 0;
            let mut n = 0;
            for _ in 0..200 {
                for id in &ids {
                    let t = w.objects[id].pose.position;
                    let palm = Vec3::new(0.0, -0.5, 0.35);
                    let r = perturb_ray(&Ray::new(palm, t, RaySource::Palm).unwrap(), sigma, &mut rng);
                    let d = object_distances(&r, &w, &DeicticParams::default());
                    hits += usize::from(target_object(&d).as_deref() == Some(id));
                    n += 1;
                }
            }
            acc.push(hits as f64 / n as f64);
        }
        assert_eq!(acc[0], 1.0);
        assert!(acc.windows(2).all(|p| p[1] <= p[0]), "{acc:?}");
    }

    fn brute_distance(p1: &Vec3, p2: &Vec3, s: &Vec3) -> f64 {
        // closest point by projection
        let v = p2 - p1;
        let t = (s - p1).dot(&v) / v.dot(&v);
        (p1 + v * t - s).norm()
    }

    proptest! {
        #[test]
        fn distance_matches_projection(
            p in prop::array::uniform3(-1.0..1.0f64),
            v in prop::array::uniform3(-1.0..1.0f64),
            s in prop::array::uniform3(-1.0..1.0f64),
        ) {
            let p1 = Vec3::from(p);
            let v = Vec3::from(v);
            prop_assume!(v.norm() > 1e-3);
            let r = Ray::new(p1, p1 + v, RaySource::Palm).unwrap();
            let s = Vec3::from(s);
            prop_assert!((r.distance_to(&s) - brute_distance(&p1, &(p1 + v), &s)).abs() < 1e-9);
        }

        #[test]
        fn reparameterization_invariant(
            p in prop::array::uniform3(-0.5..0.5f64),
            v in prop::array::uniform3(-1.0..1.0f64),
            a in -2.0..2.0f64,
            b in -2.0..2.0f64,
        ) {
            let v = Vec3::from(v);
            prop_assume!(v.norm() > 1e-2 && (a - b).abs() > 1e-2);
            let p1 = Vec3::from(p);
            let w = grid9();
            let base = object_distances(&Ray::new(p1, p1 + v, RaySource::Palm).unwrap(), &w, &DeicticParams::default());
            let moved = object_distances(
                &Ray::new(p1 + v * a, p1 + v * b, RaySource::Palm).unwrap(),
                &w,
                &DeicticParams::default(),
            );
            for (k, d) in &base.distances {
                prop_assert!((d - moved.distances[k]).abs() < 1e-9);
            }
            prop_assert_eq!(target_object(&base), target_object(&moved));
        }

        #[test]
        fn selection_scale_invariant(ds in prop::collection::vec(0.0..0.2f64, 1..9), k in 0.1..1.0f64) {
            let pairs: Vec<(String, f64)> = ds.iter().enumerate().map(|(i, d)| (format!("o{i}"), *d)).collect();
            let make = |scale: f64| {
                TargetDistances::from_distances(
                    pairs.iter().map(|(i, d)| (i.clone(), d * scale)).collect(),
                    &DeicticParams::default(),
                )
            };
            prop_assert_eq!(target_object(&make(1.0)), target_object(&make(k)));
        }

        #[test]
        fn object_on_ray_is_selected(
            idx in 0usize..9,
            palm in prop::array::uniform3(-0.4..0.4f64),
        ) {
            let w = grid9();
            let id = w.objects.keys().nth(idx).unwrap().clone();
            let target = w.objects[&id].pose.position;
            let palm = Vec3::new(palm[0], palm[1], 0.3 + palm[2].abs());
            let r = Ray::new(palm, target, RaySource::Palm).unwrap();
            let d = object_distances(&r, &w, &DeicticParams::default());
            // another object can only win by also lying on the line
            let sel = target_object(&d).unwrap();
            prop_assert!(sel == id || d.distances[&sel] <= 1e-12);
        }
    }
}
