//! Static and dynamic gesture classifiers and their evaluation.

pub mod bundled;
mod dtw;
mod dynamic;
mod labels;
mod metrics;
mod rules;
mod static_model;
pub mod synth;

pub use dtw::{dtw_alignment, dtw_distance, DtwAlignment};
pub use dynamic::{
    argmin_label, classify_dynamic, dynamic_probabilities, euclidean_baseline,
    euclidean_distance, DynamicDecision, DynamicTemplates, DEFAULT_NO_GESTURE_CUTOFF,
    EUCLIDEAN_POINTS, TEMPLATE_FORMAT,
};
pub use labels::{Channel, GestureProbabilities, GestureSet, NO_GESTURE};
pub use metrics::balanced_accuracy;
pub use rules::ThresholdRules;
pub use static_model::{classify_static, train_static, StaticModel, MODEL_FORMAT};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("class `{0}` has no training samples")]
    EmptyClass(String),
    #[error("class `{label}` has {count} training samples, at least {min} required")]
    TooFewSamples {
        label: String,
        count: usize,
        min: usize,
    },
    #[error("sample labelled `{0}` is not in the gesture set")]
    UnknownLabel(String),
    #[error("feature layout `{found}` does not match model layout `{expected}`")]
    LayoutMismatch { expected: String, found: String },
    #[error("feature vector has {found} entries, expected {expected}")]
    WrongDimension { expected: usize, found: usize },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("no dynamic templates loaded")]
    NoTemplates,
    #[error("predictions and labels differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("cannot score an empty evaluation set")]
    EmptyEvaluation,
    #[error("model file: {0}")]
    Format(String),
}
