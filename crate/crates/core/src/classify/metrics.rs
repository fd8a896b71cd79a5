use std::collections::BTreeSet;

use super::ClassifyError;

/// Macro-averaged one-vs-rest balanced accuracy over the classes present in
/// `labels`. Each class contributes `½(TP/(TP+FN) + TN/(TN+FP))`; a term
/// whose denominator is zero is dropped and the other taken alone.
pub fn balanced_accuracy<T: Ord>(predictions: &[T], labels: &[T]) -> Result<f64, ClassifyError> {
    if predictions.len() != labels.len() {
        return Err(ClassifyError::LengthMismatch(predictions.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(ClassifyError::EmptyEvaluation);
    }
    let classes: BTreeSet<&T> = labels.iter().collect();
    let mut total = 0.0;
    for c in &classes {
        let (mut tp, mut fneg, mut tn, mut fp) = (0usize, 0usize, 0usize, 0usize);
        for (p, l) in predictions.iter().zip(labels) {
            match (l == *c, p == *c) {
                (true, true) => tp += 1,
                (true, false) => fneg += 1,
                (false, false) => tn += 1,
                (false, true) => fp += 1,
            }
        }
        total += binary_terms(tp, fneg, tn, fp);
    }
    Ok(total / classes.len() as f64)
}

fn binary_terms(tp: usize, fneg: usize, tn: usize, fp: usize) -> f64 {
    let sens = (tp + fneg > 0).then(|| tp as f64 / (tp + fneg) as f64);
    let spec = (tn + fp > 0).then(|| tn as f64 / (tn + fp) as f64);
    match (sens, spec) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => 0.0,
    }
}
