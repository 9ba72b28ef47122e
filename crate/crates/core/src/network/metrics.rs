use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Fraction of rows whose label is among the `k` highest scores. Equal
/// scores rank by class index, so a constant output always predicts class 0.
pub fn top_k_accuracy(scores: ArrayView2<f64>, labels: &[usize], k: usize) -> Result<f64> {
    if labels.len() != scores.nrows() {
        return Err(Error::DimensionMismatch {
            context: "label count",
            expected: scores.nrows(),
            found: labels.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("top-k needs k >= 1".into()));
    }
    let classes = scores.ncols();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidConfig(format!("label {bad} is out of range for {classes} classes")));
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let hits = scores
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, &label)| {
            let s = row[label];
            let ahead = row
                .iter()
                .enumerate()
                .filter(|&(j, &v)| v > s || (v == s && j < label))
                .count();
            ahead < k
        })
        .count();
    Ok(hits as f64 / labels.len() as f64)
}
