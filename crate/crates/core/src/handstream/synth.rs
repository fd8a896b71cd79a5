//! Synthetic right-hand skeletons for the static gesture vocabulary.
//!
//! Hands are built in a canonical frame (palm centre at the origin, fingers
//! along +y, palm facing −z, thumb on the −x side) and then optionally
//! jittered and moved by a random rigid transform.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Bone, Finger, HandSkeleton, BONES_PER_FINGER, FINGER_COUNT};
use crate::geometry::{normalize_or_zero, yaw_of, Rotation3, Unit, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandPoseKind {
    Grab,
    Pinch,
    Point,
    Two,
    Three,
    Four,
    Five,
    #[serde(rename = "thumbsup")]
    ThumbsUp,
}

impl HandPoseKind {
    pub const ALL: [HandPoseKind; 8] = [
        HandPoseKind::Grab,
        HandPoseKind::Pinch,
        HandPoseKind::Point,
        HandPoseKind::Two,
        HandPoseKind::Three,
        HandPoseKind::Four,
        HandPoseKind::Five,
        HandPoseKind::ThumbsUp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            HandPoseKind::Grab => "grab",
            HandPoseKind::Pinch => "pinch",
            HandPoseKind::Point => "point",
            HandPoseKind::Two => "two",
            HandPoseKind::Three => "three",
            HandPoseKind::Four => "four",
            HandPoseKind::Five => "five",
            HandPoseKind::ThumbsUp => "thumbsup",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == label)
    }
}

const WRIST_Y: f64 = -0.04;
// index, middle, ring, pinky
const KNUCKLE_X: [f64; 4] = [-0.027, -0.009, 0.009, 0.026];
const KNUCKLE_Y: [f64; 4] = [0.045, 0.048, 0.044, 0.038];
const SPLAY: [f64; 4] = [-0.08, 0.0, 0.08, 0.16];
const LENGTHS: [[f64; 3]; 4] = [
    [0.040, 0.024, 0.018],
    [0.044, 0.028, 0.019],
    [0.041, 0.027, 0.019],
    [0.033, 0.019, 0.017],
];
const THUMB_BASE: [f64; 3] = [-0.015, -0.03, -0.005];
const THUMB_KNUCKLE: [f64; 3] = [-0.04, 0.0, -0.015];
const THUMB_LENGTHS: [f64; 3] = [0.030, 0.028, 0.022];

const STRAIGHT: [f64; 3] = [0.0, 0.0, 0.0];
const CURLED: [f64; 3] = [1.3, 1.6, 1.0];
const PINCH_INDEX: [f64; 3] = [0.5, 0.7, 0.4];

#[derive(Clone, Copy, Debug)]
enum ThumbShape {
    Extended,
    Tucked,
    Up,
    /// Tip this far from the index fingertip, toward the thumb side.
    Pinching(f64),
}

/// Joint-angle description of a pose before noise.
#[derive(Clone, Copy, Debug)]
struct PoseSpec {
    flex: [[f64; 3]; 4],
    thumb: ThumbShape,
}

fn spec(kind: HandPoseKind) -> PoseSpec {
    use HandPoseKind::*;
    let c = CURLED;
    let s = STRAIGHT;
    let (flex, thumb) = match kind {
        Grab => ([c, c, c, c], ThumbShape::Tucked),
        Pinch => ([PINCH_INDEX, s, s, s], ThumbShape::Pinching(0.0)),
        Point => ([s, c, c, c], ThumbShape::Tucked),
        Two => ([s, s, c, c], ThumbShape::Tucked),
        Three => ([s, s, s, c], ThumbShape::Tucked),
        Four => ([s, s, s, s], ThumbShape::Tucked),
        Five => ([s, s, s, s], ThumbShape::Extended),
        ThumbsUp => ([c, c, c, c], ThumbShape::Up),
    };
    PoseSpec { flex, thumb }
}

/// Generator of noisy skeletons.
#[derive(Clone, Debug)]
pub struct PoseGenerator {
    /// Standard deviation of per-joint position noise, meters.
    pub joint_noise: f64,
    /// Standard deviation of per-joint flexion jitter, radians.
    pub angle_jitter: f64,
    /// Apply a random rigid transform to every sample.
    pub random_placement: bool,
    /// Pinch samples open the thumb-index gap uniformly up to this, meters.
    pub max_aperture: f64,
}

impl PoseGenerator {
    pub fn noiseless() -> Self {
        Self {
            joint_noise: 0.0,
            angle_jitter: 0.0,
            random_placement: false,
            max_aperture: 0.0,
        }
    }

    pub fn new(joint_noise: f64, angle_jitter: f64) -> Self {
        Self {
            joint_noise,
            angle_jitter,
            random_placement: true,
            max_aperture: 0.10,
        }
    }

    /// Noise-free pinch with the given thumb-index fingertip gap, meters.
    pub fn pinch_with_aperture(&self, aperture: f64) -> HandSkeleton {
        let mut pose = spec(HandPoseKind::Pinch);
        pose.thumb = ThumbShape::Pinching(aperture.max(0.0));
        build::<rand_chacha::ChaCha8Rng>(pose, [[0.0; 3]; 4], None)
    }

    /// Noise-free skeleton in the canonical frame.
    pub fn canonical(&self, kind: HandPoseKind) -> HandSkeleton {
        build::<rand_chacha::ChaCha8Rng>(spec(kind), [[0.0; 3]; 4], None)
    }

    pub fn sample<R: Rng + ?Sized>(&self, kind: HandPoseKind, rng: &mut R) -> HandSkeleton {
        let jitter = Normal::new(0.0, self.angle_jitter.max(0.0)).expect("valid sigma");
        let mut flex_noise = [[0.0; 3]; 4];
        for f in flex_noise.iter_mut() {
            for a in f.iter_mut() {
                *a = jitter.sample(rng);
            }
        }
        let mut pose = spec(kind);
        if matches!(pose.thumb, ThumbShape::Pinching(_)) && self.max_aperture > 0.0 {
            pose.thumb = ThumbShape::Pinching(rng.random_range(0.0..self.max_aperture));
        }
        let mut hand = build(pose, flex_noise, Some((self.joint_noise, rng)));
        if self.random_placement {
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let pitch = rng.random_range(-0.3..0.3);
            let roll = rng.random_range(-0.3..0.3);
            let rot = Rotation3::from_euler_angles(roll, pitch, yaw);
            let offset = Vec3::new(
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
                rng.random_range(0.15..0.35),
            );
            hand = rigid_transform(&hand, &rot, &offset);
        }
        hand
    }
}

fn finger_dir(heading: f64, flex: f64) -> Vec3 {
    Vec3::new(heading.sin() * flex.cos(), heading.cos() * flex.cos(), -flex.sin())
}

fn chain_from_dirs(start: Vec3, dirs: [Vec3; 3], lengths: [f64; 3]) -> [Vec3; 4] {
    let mut joints = [start; 4];
    for k in 0..3 {
        joints[k + 1] = joints[k] + dirs[k] * lengths[k];
    }
    joints
}

fn build<R: Rng + ?Sized>(
    spec: PoseSpec,
    flex_noise: [[f64; 3]; 4],
    noise: Option<(f64, &mut R)>,
) -> HandSkeleton {
    // joints[f] = 5 points: metacarpal start, knuckle, pip, dip, tip
    let mut joints = [[Vec3::zeros(); 5]; FINGER_COUNT];

    for i in 0..4 {
        let base = Vec3::new(KNUCKLE_X[i], WRIST_Y, 0.0);
        let knuckle = Vec3::new(KNUCKLE_X[i], KNUCKLE_Y[i], 0.0);
        let mut acc = 0.0;
        let mut dirs = [Vec3::zeros(); 3];
        for k in 0..3 {
            acc += spec.flex[i][k] + flex_noise[i][k];
            dirs[k] = finger_dir(SPLAY[i], acc);
        }
        let chain = chain_from_dirs(knuckle, dirs, LENGTHS[i]);
        let f = i + 1;
        joints[f][0] = base;
        joints[f][1..].copy_from_slice(&chain);
    }

    let thumb_base = Vec3::from(THUMB_BASE);
    let thumb_knuckle = Vec3::from(THUMB_KNUCKLE);
    let thumb_dirs = |a: [f64; 3], b: [f64; 3], c: [f64; 3]| {
        [
            normalize_or_zero(&Vec3::from(a)),
            normalize_or_zero(&Vec3::from(b)),
            normalize_or_zero(&Vec3::from(c)),
        ]
    };
    let thumb_chain = match spec.thumb {
        ThumbShape::Extended => chain_from_dirs(
            thumb_knuckle,
            thumb_dirs([-0.55, 0.8, 0.0], [-0.5, 0.85, 0.0], [-0.45, 0.9, 0.0]),
            THUMB_LENGTHS,
        ),
        ThumbShape::Up => chain_from_dirs(
            thumb_knuckle,
            thumb_dirs([-0.9, 0.3, 0.15], [-0.92, 0.2, 0.2], [-0.9, 0.1, 0.25]),
            THUMB_LENGTHS,
        ),
        ThumbShape::Tucked => chain_from_dirs(
            thumb_knuckle,
            thumb_dirs([0.2, 0.9, -0.4], [0.8, 0.4, -0.45], [0.95, -0.1, -0.3]),
            THUMB_LENGTHS,
        ),
        ThumbShape::Pinching(aperture) => {
            let away = normalize_or_zero(&Vec3::new(-1.0, -0.3, 0.0));
            let target = joints[Finger::Index.index()][4] + away * aperture;
            let span = target - thumb_knuckle;
            let axis = normalize_or_zero(&span);
            let side = normalize_or_zero(&axis.cross(&Vec3::z()));
            let beta: f64 = 0.35;
            let d1 = normalize_or_zero(&(axis * beta.cos() + side * beta.sin()));
            let d3 = normalize_or_zero(&(axis * beta.cos() - side * beta.sin()));
            let len = span.norm() / (1.0 + 2.0 * beta.cos());
            let mut c = chain_from_dirs(thumb_knuckle, [d1, axis, d3], [len; 3]);
            c[3] = target;
            c
        }
    };
    joints[0][0] = thumb_base;
    joints[0][1..].copy_from_slice(&thumb_chain);

    let mut palm = Vec3::zeros();
    if let Some((sigma, rng)) = noise {
        if sigma > 0.0 {
            let n = Normal::new(0.0, sigma).expect("valid sigma");
            for f in joints.iter_mut() {
                for p in f.iter_mut() {
                    *p += Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng));
                }
            }
            palm += Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng)) * 0.5;
        }
    }

    let mut fingers = [[Bone::new(Vec3::zeros(), Vec3::zeros()); BONES_PER_FINGER]; FINGER_COUNT];
    let mut tips = [Vec3::zeros(); FINGER_COUNT];
    for f in 0..FINGER_COUNT {
        for k in 0..BONES_PER_FINGER {
            fingers[f][k] = Bone::new(joints[f][k], joints[f][k + 1]);
        }
        tips[f] = joints[f][4];
    }
    let direction = Vec3::y();
    HandSkeleton {
        palm_position: palm,
        palm_direction: direction,
        palm_normal: -Vec3::z(),
        z_rotation: yaw_of(&direction),
        fingers,
        fingertips: tips,
    }
}

pub fn translate(hand: &mut HandSkeleton, offset: &Vec3) {
    hand.palm_position += offset;
    for f in hand.fingers.iter_mut() {
        for b in f.iter_mut() {
            b.start += offset;
            b.end += offset;
        }
    }
    for t in hand.fingertips.iter_mut() {
        *t += offset;
    }
}

/// Rotates about the palm centre, then translates.
pub fn rigid_transform(hand: &HandSkeleton, rot: &Rotation3<f64>, offset: &Vec3) -> HandSkeleton {
    let centre = hand.palm_position;
    let map = |p: &Vec3| rot * (p - centre) + centre + offset;
    let mut out = hand.clone();
    out.palm_position = centre + offset;
    out.palm_direction = rot * hand.palm_direction;
    out.palm_normal = rot * hand.palm_normal;
    out.z_rotation = yaw_of(&out.palm_direction);
    for (f, bones) in out.fingers.iter_mut().enumerate() {
        for (k, b) in bones.iter_mut().enumerate() {
            let src = hand.fingers[f][k];
            b.start = map(&src.start);
            b.end = map(&src.end);
        }
    }
    for (t, src) in out.fingertips.iter_mut().zip(hand.fingertips.iter()) {
        *t = map(src);
    }
    out
}

/// Places a hand so its palm sits at `position` and points along `direction`.
/// The palm normal is kept as close to straight down as the direction allows.
pub fn oriented(hand: &HandSkeleton, position: Vec3, direction: Vec3) -> HandSkeleton {
    let y = normalize_or_zero(&direction);
    let down = -Vec3::z();
    let mut normal = down - y * down.dot(&y);
    if normal.norm() < 1e-6 {
        normal = Vec3::x();
    }
    let normal = normalize_or_zero(&normal);
    let z = -normal;
    let x = y.cross(&z);
    let m = nalgebra::Matrix3::from_columns(&[x, y, z]);
    let rot = Rotation3::from_matrix_unchecked(m);
    rigid_transform(hand, &rot, &(position - hand.palm_position))
}

/// Rotation of `angle` radians about an arbitrary axis.
pub fn axis_rotation(axis: &Vec3, angle: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle)
}
