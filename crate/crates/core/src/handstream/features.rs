use serde::{Deserialize, Serialize};

use super::{Finger, HandFrame, HandSkeleton, StreamError, FINGER_COUNT};
use crate::geometry::{angle_between, Vec3};

pub const FEATURE_COUNT: usize = 57;

/// Identifies the order and meaning of the feature entries. Models record the
/// layout they were trained against.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LayoutTag(pub String);

pub const LAYOUT_V1: &str = "hand57-v1";

impl Default for LayoutTag {
    fn default() -> Self {
        LayoutTag(LAYOUT_V1.to_string())
    }
}

impl std::fmt::Display for LayoutTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout_tag: LayoutTag,
}

impl FeatureVector {
    pub fn zeros() -> Self {
        Self {
            values: vec![0.0; FEATURE_COUNT],
            layout_tag: LayoutTag::default(),
        }
    }
}

/// Static hand features, layout `hand57-v1`:
///
/// | range  | count | content |
/// |--------|-------|---------|
/// | 0–14   | 15 | pairwise distances among thumb, index, middle, ring, pinky tips and palm centre (lexicographic pairs) |
/// | 15–29  | 15 | per finger, angles between consecutive bone directions (0–1, 1–2, 2–3) |
/// | 30–34  | 5  | proximal bone vs palm direction |
/// | 35–39  | 5  | proximal bone vs palm normal |
/// | 40–43  | 4  | adjacent fingers, proximal bones |
/// | 44–47  | 4  | adjacent fingers, intermediate bones |
/// | 48–51  | 4  | adjacent fingers, distal bones |
/// | 52–56  | 5  | distal bone vs palm normal |
pub fn static_features(frame: &HandFrame) -> Result<FeatureVector, StreamError> {
    let hand = frame
        .hand
        .as_ref()
        .ok_or(StreamError::InvisibleFrame(frame.timestamp))?;
    Ok(skeleton_features(hand))
}

pub fn skeleton_features(hand: &HandSkeleton) -> FeatureVector {
    let mut v = Vec::with_capacity(FEATURE_COUNT);

    let mut points: Vec<Vec3> = hand.fingertips.to_vec();
    points.push(hand.palm_position);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            v.push((points[i] - points[j]).norm());
        }
    }

    let dir = |f: Finger, k: usize| hand.bone(f, k).vector();

    for f in Finger::ALL {
        for k in 0..3 {
            v.push(angle_between(&dir(f, k), &dir(f, k + 1)));
        }
    }
    for f in Finger::ALL {
        v.push(angle_between(&dir(f, 1), &hand.palm_direction));
    }
    for f in Finger::ALL {
        v.push(angle_between(&dir(f, 1), &hand.palm_normal));
    }
    for k in 1..=3 {
        for w in Finger::ALL.windows(2) {
            v.push(angle_between(&dir(w[0], k), &dir(w[1], k)));
        }
    }
    for f in Finger::ALL {
        v.push(angle_between(&dir(f, 3), &hand.palm_normal));
    }

    debug_assert_eq!(v.len(), FEATURE_COUNT);
    debug_assert_eq!(FINGER_COUNT, 5);
    FeatureVector {
        values: v,
        layout_tag: LayoutTag::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handstream::synth::{HandPoseKind, PoseGenerator};
    use crate::handstream::Bone;
    use std::f64::consts::PI;

    fn degenerate_hand() -> HandSkeleton {
        let bone = Bone::new(Vec3::zeros(), Vec3::new(0.0, 0.01, 0.0));
        HandSkeleton {
            palm_position: Vec3::zeros(),
            palm_direction: Vec3::y(),
            palm_normal: -Vec3::z(),
            z_rotation: PI / 2.0,
            fingers: [[bone; 4]; 5],
            fingertips: [Vec3::zeros(); 5],
        }
    }

    #[test]
    fn coincident_points_give_zero_distances() {
        let fv = skeleton_features(&degenerate_hand());
        assert_eq!(fv.values.len(), FEATURE_COUNT);
        assert!(fv.values[..15].iter().all(|&d| d == 0.0));
    }

    #[test]
    fn straight_finger_has_zero_joint_angles() {
        let hand = PoseGenerator::noiseless().canonical(HandPoseKind::Five);
        let fv = skeleton_features(&hand);
        // middle finger is straight and unsplayed in the canonical open hand
        let idx = 15 + 3 * Finger::Middle.index();
        for a in &fv.values[idx..idx + 3] {
            assert!(a.abs() < 1e-9, "angle {a}");
        }
    }

    #[test]
    fn invisible_frame_is_an_error() {
        assert!(static_features(&HandFrame::invisible(0.0)).is_err());
    }

    #[test]
    fn ranges() {
        let hand = PoseGenerator::noiseless().canonical(HandPoseKind::Grab);
        let fv = skeleton_features(&hand);
        assert!(fv.values[..15].iter().all(|&d| d >= 0.0));
        assert!(fv.values[15..].iter().all(|&a| (0.0..=PI).contains(&a)));
    }
}
