use serde::{Deserialize, Serialize};

use super::{ClassifyError, GestureSet};
use crate::handstream::{FeatureVector, LayoutTag, FEATURE_COUNT};
use crate::mlp::{Mlp, TrainConfig};

pub const MODEL_FORMAT: &str = "gesture-static-model";
const MODEL_VERSION: u32 = 1;
const MIN_SAMPLES_PER_CLASS: usize = 20;

/// Categorical classifier over static feature vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticModel {
    pub labels: Vec<String>,
    pub layout_tag: LayoutTag,
    /// Absent for a single-class model, which always answers that class.
    pub network: Option<Mlp>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: StaticModel,
}

/// Fits the static classifier on labelled features. Every static label of
/// `set` needs at least 20 samples.
pub fn train_static(
    dataset: &[(FeatureVector, String)],
    set: &GestureSet,
    cfg: &TrainConfig,
) -> Result<StaticModel, ClassifyError> {
    let layout = dataset
        .first()
        .map(|(f, _)| f.layout_tag.clone())
        .unwrap_or_default();
    let mut counts = vec![0usize; set.static_labels.len()];
    let mut inputs = Vec::with_capacity(dataset.len());
    let mut targets = Vec::with_capacity(dataset.len());
    for (f, label) in dataset {
        if f.layout_tag != layout {
            return Err(ClassifyError::LayoutMismatch {
                expected: layout.0.clone(),
                found: f.layout_tag.0.clone(),
            });
        }
        if f.values.len() != FEATURE_COUNT {
            return Err(ClassifyError::WrongDimension {
                expected: FEATURE_COUNT,
                found: f.values.len(),
            });
        }
        let idx = set
            .static_index(label)
            .ok_or_else(|| ClassifyError::UnknownLabel(label.clone()))?;
        counts[idx] += 1;
        inputs.push(f.values.clone());
        targets.push(idx);
    }
    for (label, &n) in set.static_labels.iter().zip(&counts) {
        if n == 0 {
            return Err(ClassifyError::EmptyClass(label.clone()));
        }
        if n < MIN_SAMPLES_PER_CLASS {
            return Err(ClassifyError::TooFewSamples {
                label: label.clone(),
                count: n,
                min: MIN_SAMPLES_PER_CLASS,
            });
        }
    }
    let network = (set.static_labels.len() > 1)
        .then(|| Mlp::fit(&inputs, &targets, set.static_labels.len(), cfg));
    Ok(StaticModel {
        labels: set.static_labels.clone(),
        layout_tag: layout,
        network,
    })
}

/// Probability vector over the model's labels.
pub fn classify_static(model: &StaticModel, features: &FeatureVector) -> Result<Vec<f64>, ClassifyError> {
    model.probabilities(features)
}

impl StaticModel {
    pub fn probabilities(&self, features: &FeatureVector) -> Result<Vec<f64>, ClassifyError> {
        if features.layout_tag != self.layout_tag {
            return Err(ClassifyError::LayoutMismatch {
                expected: self.layout_tag.0.clone(),
                found: features.layout_tag.0.clone(),
            });
        }
        if features.values.len() != FEATURE_COUNT {
            return Err(ClassifyError::WrongDimension {
                expected: FEATURE_COUNT,
                found: features.values.len(),
            });
        }
        Ok(match &self.network {
            Some(net) => net.predict(&features.values),
            None => vec![1.0],
        })
    }

    /// Most probable label; ties go to the earlier label.
    pub fn predict_label(&self, features: &FeatureVector) -> Result<&str, ClassifyError> {
        let p = self.probabilities(features)?;
        let mut best = 0;
        for (i, v) in p.iter().enumerate() {
            if *v > p[best] {
                best = i;
            }
        }
        Ok(&self.labels[best])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifyError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| ClassifyError::Format(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(ClassifyError::Format(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                file.format, file.version
            )));
        }
        let m = file.model;
        if let Some(net) = &m.network {
            if net.input_dim() != FEATURE_COUNT || net.output_dim() != m.labels.len() {
                return Err(ClassifyError::Format("network shape does not match labels".into()));
            }
        } else if m.labels.len() != 1 {
            return Err(ClassifyError::Format("multi-class model without network".into()));
        }
        Ok(m)
    }
}
