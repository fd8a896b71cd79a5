use serde::{Deserialize, Serialize};

use crate::handstream::{FeatureVector, FINGER_COUNT};

/// Expected finger state for one label. `None` entries are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleTemplate {
    pub label: String,
    /// Extended flags for thumb, index, middle, ring, pinky.
    pub extended: [Option<bool>; FINGER_COUNT],
    pub pinch: Option<bool>,
}

/// Hand-picked threshold classifier: a finger is extended when the sum of
/// its three joint angles is under a threshold, and the pose is matched to
/// the template agreeing on the most fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRules {
    /// Curl limit for the four fingers, radians.
    pub finger_curl: f64,
    /// Curl limit for the thumb, radians.
    pub thumb_curl: f64,
    /// Thumb-to-index tip distance below which the hand pinches, meters.
    pub pinch_distance: f64,
    pub templates: Vec<RuleTemplate>,
}

fn template(label: &str, ext: [bool; 5]) -> RuleTemplate {
    RuleTemplate {
        label: label.into(),
        extended: ext.map(Some),
        pinch: None,
    }
}

impl Default for ThresholdRules {
    fn default() -> Self {
        const T: bool = true;
        const F: bool = false;
        Self {
            finger_curl: 2.0,
            thumb_curl: 1.35,
            pinch_distance: 0.025,
            templates: vec![
                template("grab", [F, F, F, F, F]),
                RuleTemplate {
                    label: "pinch".into(),
                    extended: [None, None, Some(T), Some(T), Some(T)],
                    pinch: Some(T),
                },
                template("point", [F, T, F, F, F]),
                template("two", [F, T, T, F, F]),
                template("three", [F, T, T, T, F]),
                template("four", [F, T, T, T, T]),
                template("five", [T, T, T, T, T]),
                template("thumbsup", [T, F, F, F, F]),
            ],
        }
    }
}

impl ThresholdRules {
    /// Extended flag per finger and the pinch flag.
    pub fn observe(&self, f: &FeatureVector) -> ([bool; FINGER_COUNT], bool) {
        let v = &f.values;
        let mut ext = [false; FINGER_COUNT];
        for (i, e) in ext.iter_mut().enumerate() {
            let curl: f64 = v[15 + 3 * i..18 + 3 * i].iter().sum();
            let limit = if i == 0 { self.thumb_curl } else { self.finger_curl };
            *e = curl < limit;
        }
        (ext, v[0] < self.pinch_distance)
    }

    /// Best-matching label; ties go to the earlier template.
    pub fn classify(&self, f: &FeatureVector) -> &str {
        let (ext, pinch) = self.observe(f);
        let mut best: Option<(usize, f64)> = None;
        for (i, t) in self.templates.iter().enumerate() {
            let mut hits = 0usize;
            let mut total = 0usize;
            for (want, got) in t.extended.iter().zip(ext) {
                if let Some(w) = want {
                    total += 1;
                    hits += usize::from(*w == got);
                }
            }
            if let Some(w) = t.pinch {
                total += 1;
                hits += usize::from(w == pinch);
            }
            let score = if total == 0 { 0.0 } else { hits as f64 / total as f64 };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        best.map(|(i, _)| self.templates[i].label.as_str())
            .unwrap_or("")
    }

    pub fn covers(&self, labels: &[String]) -> bool {
        labels
            .iter()
            .all(|l| self.templates.iter().any(|t| &t.label == l))
    }
}
