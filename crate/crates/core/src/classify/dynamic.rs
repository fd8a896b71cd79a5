use serde::{Deserialize, Serialize};

use super::{dtw_distance, ClassifyError, GestureSet, NO_GESTURE};
use crate::handstream::Trajectory;

pub const TEMPLATE_FORMAT: &str = "gesture-dynamic-templates";
const TEMPLATE_VERSION: u32 = 1;

/// Mean per-step distance above which a sample counts as `no_gesture`, meters.
pub const DEFAULT_NO_GESTURE_CUTOFF: f64 = 0.08;
/// Points both trajectories are resampled to for the Euclidean baseline.
pub const EUCLIDEAN_POINTS: usize = 20;
/// Softmax temperature turning distances into probabilities, meters.
const PROB_TEMPERATURE: f64 = 0.01;

/// One representative trajectory per dynamic label. Templates are stored
/// anchored at their first point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicTemplates {
    pub labels: Vec<String>,
    pub templates: Vec<Trajectory>,
    pub no_gesture_cutoff: f64,
}

#[derive(Serialize, Deserialize)]
struct TemplateFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    body: DynamicTemplates,
}

/// Label decision plus the distance to every template, in template order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicDecision {
    pub label: String,
    pub distances: Vec<(String, f64)>,
}

impl DynamicTemplates {
    pub fn new(labels: Vec<String>, templates: Vec<Trajectory>) -> Result<Self, ClassifyError> {
        if labels.len() != templates.len() {
            return Err(ClassifyError::Format(format!(
                "{} labels for {} templates",
                labels.len(),
                templates.len()
            )));
        }
        if templates.iter().any(Trajectory::is_empty) {
            return Err(ClassifyError::EmptyTrajectory);
        }
        Ok(Self {
            labels,
            templates: templates.iter().map(Trajectory::anchored).collect(),
            no_gesture_cutoff: DEFAULT_NO_GESTURE_CUTOFF,
        })
    }

    /// Noise-free swipes from the synthetic generator, one per label of the set.
    pub fn default_swipes(set: &GestureSet) -> Result<Self, ClassifyError> {
        let gen = super::synth::SwipeGenerator::default();
        let templates = set
            .dynamic_labels
            .iter()
            .map(|l| {
                gen.template(l)
                    .ok_or_else(|| ClassifyError::UnknownLabel(l.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(set.dynamic_labels.clone(), templates)
    }

    pub fn get(&self, label: &str) -> Option<&Trajectory> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| &self.templates[i])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TemplateFile {
            format: TEMPLATE_FORMAT.into(),
            version: TEMPLATE_VERSION,
            body: self.clone(),
        })
        .expect("templates serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifyError> {
        let file: TemplateFile =
            serde_json::from_str(text).map_err(|e| ClassifyError::Format(e.to_string()))?;
        if file.format != TEMPLATE_FORMAT || file.version != TEMPLATE_VERSION {
            return Err(ClassifyError::Format(format!(
                "expected {TEMPLATE_FORMAT} v{TEMPLATE_VERSION}, found {} v{}",
                file.format, file.version
            )));
        }
        Self::new(file.body.labels, file.body.templates).map(|t| DynamicTemplates {
            no_gesture_cutoff: file.body.no_gesture_cutoff,
            ..t
        })
    }
}

/// Index of the smallest distance; ties go to the earlier entry.
pub fn argmin_label(distances: &[(String, f64)]) -> Option<&str> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (_, d)) in distances.iter().enumerate() {
        if best.is_none_or(|(_, b)| *d < b) {
            best = Some((i, *d));
        }
    }
    best.map(|(i, _)| distances[i].0.as_str())
}

fn decide(
    templates: &DynamicTemplates,
    sample: &Trajectory,
    metric: impl Fn(&Trajectory, &Trajectory) -> Result<f64, ClassifyError>,
) -> Result<DynamicDecision, ClassifyError> {
    if templates.templates.is_empty() {
        return Err(ClassifyError::NoTemplates);
    }
    if sample.is_empty() {
        return Err(ClassifyError::EmptyTrajectory);
    }
    let sample = sample.anchored();
    let distances = templates
        .labels
        .iter()
        .zip(&templates.templates)
        .map(|(l, t)| metric(t, &sample).map(|d| (l.clone(), d)))
        .collect::<Result<Vec<_>, _>>()?;
    let best = argmin_label(&distances).expect("non-empty");
    let min = distances
        .iter()
        .map(|(_, d)| *d)
        .fold(f64::INFINITY, f64::min);
    let label = if min > templates.no_gesture_cutoff {
        NO_GESTURE.to_string()
    } else {
        best.to_string()
    };
    Ok(DynamicDecision { label, distances })
}

/// Nearest template under DTW, or `no_gesture` when nothing is close enough.
pub fn classify_dynamic(
    templates: &DynamicTemplates,
    sample: &Trajectory,
) -> Result<DynamicDecision, ClassifyError> {
    decide(templates, sample, |t, s| dtw_distance(&t.points, &s.points))
}

/// Mean point-wise distance after resampling both to [`EUCLIDEAN_POINTS`].
pub fn euclidean_distance(a: &Trajectory, b: &Trajectory) -> Result<f64, ClassifyError> {
    if a.is_empty() || b.is_empty() {
        return Err(ClassifyError::EmptyTrajectory);
    }
    let ra = a.resampled_to(EUCLIDEAN_POINTS);
    let rb = b.resampled_to(EUCLIDEAN_POINTS);
    let sum: f64 = ra
        .points
        .iter()
        .zip(&rb.points)
        .map(|(p, q)| (p - q).norm())
        .sum();
    Ok(sum / EUCLIDEAN_POINTS as f64)
}

/// Lock-step comparison without warping; same cutoff rule as DTW.
pub fn euclidean_baseline(
    templates: &DynamicTemplates,
    sample: &Trajectory,
) -> Result<DynamicDecision, ClassifyError> {
    decide(templates, sample, euclidean_distance)
}

/// Probability vector over template labels plus `no_gesture` (last),
/// `softmax(-d / T)` with the cutoff standing in as the distance of
/// `no_gesture`.
pub fn dynamic_probabilities(decision: &DynamicDecision, cutoff: f64) -> (Vec<String>, Vec<f64>) {
    let mut labels: Vec<String> = decision.distances.iter().map(|(l, _)| l.clone()).collect();
    labels.push(NO_GESTURE.to_string());
    let logits: Vec<f64> = decision
        .distances
        .iter()
        .map(|(_, d)| -d / PROB_TEMPERATURE)
        .chain(std::iter::once(-cutoff / PROB_TEMPERATURE))
        .collect();
    (labels, crate::mlp::softmax(&logits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::synth::SwipeGenerator;
    use crate::geometry::Vec3;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn templates() -> DynamicTemplates {
        DynamicTemplates::default_swipes(&GestureSet::default()).unwrap()
    }

    #[test]
    fn template_matches_itself() {
        let t = templates();
        let left = t.get("swipe_left").unwrap().clone();
        let d = classify_dynamic(&t, &left).unwrap();
        assert_eq!(d.label, "swipe_left");
        assert_eq!(d.distances[2], ("swipe_left".to_string(), 0.0));
    }

    #[test]
    fn stationary_hand_is_no_gesture() {
        let t = templates();
        let still = Trajectory::new(vec![Vec3::new(0.1, 0.2, 0.3); 20], 20.0);
        let d = classify_dynamic(&t, &still).unwrap();
        assert_eq!(d.label, NO_GESTURE);
        assert!(d.distances.iter().all(|(_, x)| *x > t.no_gesture_cutoff));
    }

    #[test]
    fn warped_noisy_swipe_up() {
        let t = templates();
        let gen = SwipeGenerator {
            noise: 0.005,
            ..SwipeGenerator::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = gen.warped("swipe_up", 1.5, 0.2, &mut rng).unwrap();
        assert_eq!(classify_dynamic(&t, &s).unwrap().label, "swipe_up");
    }

    #[test]
    fn errors() {
        let t = templates();
        assert_eq!(
            classify_dynamic(&t, &Trajectory::new(vec![], 20.0)),
            Err(ClassifyError::EmptyTrajectory)
        );
        let none = DynamicTemplates {
            labels: vec![],
            templates: vec![],
            no_gesture_cutoff: 0.08,
        };
        let s = Trajectory::new(vec![Vec3::zeros()], 20.0);
        assert_eq!(classify_dynamic(&none, &s), Err(ClassifyError::NoTemplates));
    }

    #[test]
    fn euclidean_offset_and_identity() {
        let a = templates().get("swipe_right").unwrap().clone();
        assert_eq!(euclidean_distance(&a, &a).unwrap(), 0.0);
        let b = Trajectory::new(
            a.points.iter().map(|p| p + Vec3::new(0.1, 0.0, 0.0)).collect(),
            a.rate,
        );
        assert!((euclidean_distance(&a, &b).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let t = templates();
        let s = t.get("swipe_down").unwrap().clone();
        let d = classify_dynamic(&t, &s).unwrap();
        let (labels, p) = dynamic_probabilities(&d, t.no_gesture_cutoff);
        assert_eq!(labels.len(), 5);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[1] > 0.9);
    }

    #[test]
    fn json_round_trip() {
        let t = templates();
        assert_eq!(DynamicTemplates::from_json(&t.to_json()).unwrap(), t);
        assert!(DynamicTemplates::from_json("{\"format\":\"x\",\"version\":1}").is_err());
    }

    proptest! {
        #[test]
        fn argmin_invariant_under_scaling(
            ds in prop::collection::vec(0.0..1.0f64, 1..8),
            k in 1e-3..1e3f64,
        ) {
            let named: Vec<(String, f64)> =
                ds.iter().enumerate().map(|(i, d)| (format!("g{i}"), *d)).collect();
            let scaled: Vec<(String, f64)> =
                named.iter().map(|(l, d)| (l.clone(), d * k)).collect();
            prop_assert_eq!(argmin_label(&named), argmin_label(&scaled));
        }
    }
}
