//! Test-time decision rules. Ties always go to the smallest class index.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::diagnostics::{macro_accuracy, per_class_accuracy};
use crate::error::{Error, Result};
use crate::linalg::{l2_norm, Matrix};
use crate::model::MlpParams;

/// Index of the first maximal entry in each row.
pub fn argmax_rows(values: &Matrix) -> Vec<usize> {
    values
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// `argmax_c w_c · f(x)`, with no temperature whatever the training objective.
pub fn predict_argmax(params: &MlpParams, x: &Matrix) -> Result<Vec<usize>> {
    Ok(argmax_rows(&params.logits(x)?))
}

/// `argmax_c (w_c · f(x)) / ‖w_c‖^τ`.
pub fn predict_tau_norm(params: &MlpParams, x: &Matrix, tau: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid("tau", format!("must lie in [0, 1], got {tau}")));
    }
    let norms = params.classifier_norms();
    if let Some(c) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::invalid("params", format!("classifier row {c} is zero")));
    }
    let mut logits = params.logits(x)?;
    if tau == 0.0 {
        return Ok(argmax_rows(&logits));
    }
    let scale: Vec<f64> = norms.iter().map(|n| n.powf(tau)).collect();
    for r in 0..logits.rows() {
        for (v, s) in logits.row_mut(r).iter_mut().zip(&scale) {
            *v /= s;
        }
    }
    Ok(argmax_rows(&logits))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCenters {
    /// `C × m`
    pub centers: Matrix,
    /// Whether instances were scaled to unit ℓ2 norm before averaging.
    pub normalized: bool,
    /// Number of zero feature vectors that could not be normalized.
    pub zero_features: usize,
}

fn normalize_rows(features: &Matrix) -> (Matrix, usize) {
    let mut out = features.clone();
    let mut zeros = 0;
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let n = l2_norm(row);
        if n == 0.0 {
            zeros += 1;
        } else {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }
    (out, zeros)
}

/// Rows scaled to unit ℓ2 norm; zero rows are left as they are.
pub fn l2_normalize_rows(features: &Matrix) -> Matrix {
    normalize_rows(features).0
}

pub fn class_means(features: &Matrix, labels: &[usize], num_classes: usize, normalize: bool) -> Result<ClassCenters> {
    if features.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} rows for {} labels",
            features.rows(),
            labels.len()
        )));
    }
    let (feats, zero_features) = if normalize {
        normalize_rows(features)
    } else {
        (features.clone(), 0)
    };
    let mut sums = Matrix::zeros(num_classes, feats.cols());
    let mut counts = vec![0usize; num_classes];
    for (row, &y) in feats.row_iter().zip(labels) {
        if y >= num_classes {
            return Err(Error::invalid("labels", format!("label {y} out of range")));
        }
        counts[y] += 1;
        for (s, v) in sums.row_mut(y).iter_mut().zip(row) {
            *s += v;
        }
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::InsufficientInstances {
            class: c,
            needed: 1,
            available: 0,
        });
    }
    for (c, &n) in counts.iter().enumerate() {
        sums.row_mut(c).iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(ClassCenters {
        centers: sums,
        normalized: normalize,
        zero_features,
    })
}

/// Nearest center in Euclidean distance; features are normalized first when
/// the centers were built from normalized features.
pub fn predict_ncm(centers: &ClassCenters, features: &Matrix) -> Result<Vec<usize>> {
    if features.cols() != centers.centers.cols() {
        return Err(Error::Shape(format!(
            "features have {} columns, centers {}",
            features.cols(),
            centers.centers.cols()
        )));
    }
    let feats = if centers.normalized {
        l2_normalize_rows(features)
    } else {
        features.clone()
    };
    Ok(feats
        .row_iter()
        .map(|f| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.centers.row_iter().enumerate() {
                let d: f64 = f.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect())
}

/// τ from `grid` maximizing macro accuracy on `validation`; ties go to the
/// smaller τ.
pub fn select_tau(params: &MlpParams, validation: &LabeledDataset, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "empty"));
    }
    if validation.is_empty() {
        return Err(Error::invalid("validation", "empty"));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (f64::NEG_INFINITY, sorted[0]);
    for &tau in &sorted {
        let preds = predict_tau_norm(params, validation.features(), tau)?;
        let acc = macro_accuracy(&per_class_accuracy(&preds, validation.labels(), params.num_classes())?);
        if acc > best.0 {
            best = (acc, tau);
        }
    }
    Ok(best.1)
}
