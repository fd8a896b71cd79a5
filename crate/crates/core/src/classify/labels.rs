use serde::{Deserialize, Serialize};

/// Label of the implicit dynamic class for "no movement".
pub const NO_GESTURE: &str = "no_gesture";

/// Static and dynamic vocabularies. The dynamic list excludes `no_gesture`,
/// which is always implied.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestureSet {
    pub static_labels: Vec<String>,
    pub dynamic_labels: Vec<String>,
}

impl Default for GestureSet {
    fn default() -> Self {
        Self {
            static_labels: ["grab", "pinch", "point", "two", "three", "four", "five", "thumbsup"]
                .map(String::from)
                .to_vec(),
            dynamic_labels: ["swipe_up", "swipe_down", "swipe_left", "swipe_right"]
                .map(String::from)
                .to_vec(),
        }
    }
}

impl GestureSet {
    pub fn new(static_labels: Vec<String>, dynamic_labels: Vec<String>) -> Result<Self, String> {
        let set = Self {
            static_labels,
            dynamic_labels,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut seen = std::collections::BTreeSet::new();
        for l in self.static_labels.iter().chain(&self.dynamic_labels) {
            if l == NO_GESTURE {
                return Err(format!("`{NO_GESTURE}` is implicit and cannot be listed"));
            }
            if !seen.insert(l.as_str()) {
                return Err(format!("duplicate label `{l}`"));
            }
        }
        Ok(())
    }

    /// Dynamic labels followed by `no_gesture`.
    pub fn dynamic_with_none(&self) -> Vec<String> {
        let mut v = self.dynamic_labels.clone();
        v.push(NO_GESTURE.to_string());
        v
    }

    pub fn static_index(&self, label: &str) -> Option<usize> {
        self.static_labels.iter().position(|l| l == label)
    }

    pub fn channel_of(&self, label: &str) -> Option<Channel> {
        if self.static_labels.iter().any(|l| l == label) {
            Some(Channel::Static)
        } else if label == NO_GESTURE || self.dynamic_labels.iter().any(|l| l == label) {
            Some(Channel::Dynamic)
        } else {
            None
        }
    }

    /// Static then dynamic labels, without `no_gesture`.
    pub fn all_labels(&self) -> Vec<String> {
        self.static_labels
            .iter()
            .chain(&self.dynamic_labels)
            .cloned()
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Static,
    Dynamic,
    Deictic,
}

/// Per-label probabilities of both channels at one detection instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureProbabilities {
    pub timestamp: f64,
    pub static_labels: Vec<String>,
    pub static_probs: Vec<f64>,
    /// Includes `no_gesture` as the last entry.
    pub dynamic_labels: Vec<String>,
    pub dynamic_probs: Vec<f64>,
}

impl GestureProbabilities {
    /// Certain detection of `label`; the other channel is put on
    /// `no_gesture` (dynamic) or spread uniformly (static).
    pub fn one_hot(set: &GestureSet, label: &str, timestamp: f64) -> Self {
        Self::peaked(set, label, 1.0, timestamp)
    }

    /// `peak` on `label`, remainder spread uniformly over its channel.
    pub fn peaked(set: &GestureSet, label: &str, peak: f64, timestamp: f64) -> Self {
        let dynamic_labels = set.dynamic_with_none();
        let spread = |labels: &[String], hit: Option<usize>| -> Vec<f64> {
            let n = labels.len();
            match hit {
                Some(i) if n > 1 => (0..n)
                    .map(|j| if j == i { peak } else { (1.0 - peak) / (n - 1) as f64 })
                    .collect(),
                Some(_) => vec![1.0],
                None => vec![1.0 / n as f64; n],
            }
        };
        let s_hit = set.static_labels.iter().position(|l| l == label);
        let d_hit = dynamic_labels.iter().position(|l| l == label);
        let static_probs = spread(&set.static_labels, s_hit);
        let dynamic_probs = if d_hit.is_none() {
            let mut v = vec![0.0; dynamic_labels.len()];
            *v.last_mut().unwrap() = 1.0;
            v
        } else {
            spread(&dynamic_labels, d_hit)
        };
        Self {
            timestamp,
            static_labels: set.static_labels.clone(),
            static_probs,
            dynamic_labels,
            dynamic_probs,
        }
    }

    /// Joint gesture vector over static + dynamic labels (excluding
    /// `no_gesture`), each channel weighted equally and renormalized.
    pub fn joint(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .static_labels
            .iter()
            .cloned()
            .zip(self.static_probs.iter().copied())
            .collect();
        for (l, p) in self.dynamic_labels.iter().zip(&self.dynamic_probs) {
            if l != super::NO_GESTURE {
                out.push((l.clone(), *p));
            }
        }
        out
    }
}
