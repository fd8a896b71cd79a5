//! The synthetic datasets and the static model shipped with the crate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::synth::{static_dataset, SwipeGenerator, STATIC_ANGLE_JITTER, STATIC_JOINT_NOISE};
use super::{
    balanced_accuracy, classify_dynamic, euclidean_baseline, train_static, ClassifyError, DynamicTemplates, GestureSet, StaticModel,
    ThresholdRules,
};
use crate::handstream::synth::PoseGenerator;
use crate::handstream::{FeatureVector, Trajectory};
use crate::mlp::TrainConfig;

pub const BUNDLED_SEED: u64 = 7;
pub const TRAIN_PER_CLASS: usize = 150;
pub const TEST_PER_CLASS: usize = 50;
pub const DYNAMIC_PER_CLASS: usize = 60;

const BUNDLED_MODEL: &str = include_str!("../../data/static_model.json");

pub type StaticData = Vec<(FeatureVector, String)>;

/// Train and held-out static sets drawn from one seeded stream.
pub fn static_split(set: &GestureSet, seed: u64) -> (StaticData, StaticData) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gen = PoseGenerator::new(STATIC_JOINT_NOISE, STATIC_ANGLE_JITTER);
    let train = static_dataset(&gen, set, TRAIN_PER_CLASS, &mut rng);
    let test = static_dataset(&gen, set, TEST_PER_CLASS, &mut rng);
    (train, test)
}

/// Held-out swipe and idle trajectories.
pub fn dynamic_set(set: &GestureSet, seed: u64) -> Vec<(Trajectory, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    SwipeGenerator::default().dataset(set, DYNAMIC_PER_CLASS, &mut rng)
}

/// Trains the static model on the train split for `seed`.
pub fn train_bundled(set: &GestureSet, seed: u64) -> Result<StaticModel, ClassifyError> {
    let (train, _) = static_split(set, seed);
    train_static(&train, set, &TrainConfig::default())
}

/// Model trained with [`train_bundled`] at [`BUNDLED_SEED`] on the default
/// gesture set.
pub fn bundled_static_model() -> StaticModel {
    StaticModel::from_json(BUNDLED_MODEL).expect("bundled model parses")
}

/// Balanced accuracies on the held-out bundled data.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClassifierReport {
    pub static_probabilistic: f64,
    pub static_rules: f64,
    pub dynamic_dtw: f64,
    pub dynamic_euclidean: f64,
}

/// Scores `model`, the threshold rules, DTW and the lock-step baseline on
/// the held-out sets for `seed`.
pub fn evaluate(set: &GestureSet, model: &StaticModel, seed: u64) -> Result<ClassifierReport, ClassifyError> {
    let (_, test) = static_split(set, seed);
    let truth: Vec<&str> = test.iter().map(|(_, l)| l.as_str()).collect();
    let model_pred = test.iter().map(|(f, _)| model.predict_label(f)).collect::<Result<Vec<_>, _>>()?;
    let rules = ThresholdRules::default();
    let rule_pred: Vec<&str> = test.iter().map(|(f, _)| rules.classify(f)).collect();
    let templates = DynamicTemplates::default_swipes(set)?;
    let dyn_set = dynamic_set(set, seed);
    let dyn_truth: Vec<&str> = dyn_set.iter().map(|(_, l)| l.as_str()).collect();
    let mut dtw = Vec::new();
    let mut euc = Vec::new();
    for (traj, _) in &dyn_set {
        dtw.push(classify_dynamic(&templates, traj)?.label);
        euc.push(euclidean_baseline(&templates, traj)?.label);
    }
    let dtw: Vec<&str> = dtw.iter().map(String::as_str).collect();
    let euc: Vec<&str> = euc.iter().map(String::as_str).collect();
    Ok(ClassifierReport {
        static_probabilistic: balanced_accuracy(&model_pred, &truth)?,
        static_rules: balanced_accuracy(&rule_pred, &truth)?,
        dynamic_dtw: balanced_accuracy(&dtw, &dyn_truth)?,
        dynamic_euclidean: balanced_accuracy(&euc, &dyn_truth)?,
    })
}
