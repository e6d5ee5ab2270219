//! Training objectives and their exact gradients.
//!
//! All objectives share one code path: softmax cross-entropy on logits divided
//! elementwise by per-class temperatures `a_c`, with an optional per-class
//! instance weight. ERM is `a ≡ 1` with unit weights, class-dependent
//! temperatures use `a_c = (N_max / N_c)^γ`, and re-weighting uses weights
//! proportional to `N_c^(-γ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::MlpParams;

/// Per-class temperatures `a_c = (N_max / N_c)^γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub gamma: f64,
    pub a: Vec<f64>,
}

impl TemperatureSchedule {
    pub fn uniform(num_classes: usize) -> Self {
        Self {
            gamma: 0.0,
            a: vec![1.0; num_classes],
        }
    }
}

pub fn temperatures(counts: &[usize], gamma: f64) -> Result<TemperatureSchedule> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::invalid("gamma", format!("must be finite and >= 0, got {gamma}")));
    }
    if counts.is_empty() || counts.contains(&0) {
        return Err(Error::invalid("counts", "every class needs at least one instance"));
    }
    let n_max = *counts.iter().max().expect("non-empty") as f64;
    let a = counts.iter().map(|&n| (n_max / n as f64).powf(gamma)).collect();
    Ok(TemperatureSchedule { gamma, a })
}

/// Per-class weights `∝ N_c^(-γ)`, scaled so that `Σ_c N_c w_c = N`.
pub fn reweight_weights(counts: &[usize], gamma: f64) -> Result<Vec<f64>> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::invalid("gamma", format!("must be finite and >= 0, got {gamma}")));
    }
    if counts.is_empty() || counts.contains(&0) {
        return Err(Error::invalid("counts", "every class needs at least one instance"));
    }
    // (N_max / N_c)^γ is N_c^(-γ) up to a constant and is exactly 1 for
    // equal counts, so balanced data reproduces ERM bit for bit.
    let n_max = *counts.iter().max().expect("non-empty") as f64;
    let raw: Vec<f64> = counts.iter().map(|&n| (n_max / n as f64).powf(gamma)).collect();
    let total: f64 = counts.iter().map(|&n| n as f64).sum();
    let weighted: f64 = counts.iter().zip(&raw).map(|(&n, r)| n as f64 * r).sum();
    let scale = total / weighted;
    Ok(raw.into_iter().map(|r| r * scale).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    Erm,
    Cdt { gamma: f64 },
    Reweighted { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Uniform,
    ClassBalanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub objective: Objective,
    #[serde(default)]
    pub sampling: Sampling,
}

impl LossSpec {
    pub fn erm() -> Self {
        Self {
            objective: Objective::Erm,
            sampling: Sampling::Uniform,
        }
    }

    pub fn cdt(gamma: f64) -> Self {
        Self {
            objective: Objective::Cdt { gamma },
            sampling: Sampling::Uniform,
        }
    }

    pub fn reweighted(gamma: f64) -> Self {
        Self {
            objective: Objective::Reweighted { gamma },
            sampling: Sampling::Uniform,
        }
    }

    /// Resolves temperatures and class weights from training-set counts.
    pub fn prepare(&self, counts: &[usize]) -> Result<PreparedLoss> {
        let c = counts.len();
        match self.objective {
            Objective::Erm => Ok(PreparedLoss {
                schedule: TemperatureSchedule::uniform(c),
                class_weights: vec![1.0; c],
            }),
            Objective::Cdt { gamma } => Ok(PreparedLoss {
                schedule: temperatures(counts, gamma)?,
                class_weights: vec![1.0; c],
            }),
            Objective::Reweighted { gamma } => Ok(PreparedLoss {
                schedule: TemperatureSchedule::uniform(c),
                class_weights: reweight_weights(counts, gamma)?,
            }),
        }
    }
}

/// Objective with its per-class constants resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedLoss {
    pub schedule: TemperatureSchedule,
    pub class_weights: Vec<f64>,
}

impl PreparedLoss {
    pub fn instance_weights(&self, labels: &[usize]) -> Vec<f64> {
        labels.iter().map(|&y| self.class_weights[y]).collect()
    }
}

fn check_inputs(logits: &Matrix, labels: &[usize], temps: &[f64], weights: Option<&[f64]>) -> Result<()> {
    if logits.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} logit rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    if logits.rows() == 0 {
        return Err(Error::invalid("labels", "empty batch"));
    }
    if temps.len() != logits.cols() {
        return Err(Error::Shape(format!(
            "{} temperatures for {} classes",
            temps.len(),
            logits.cols()
        )));
    }
    if temps.iter().any(|&a| !a.is_finite() || a <= 0.0) {
        return Err(Error::invalid("temperatures", "must be finite and positive"));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= logits.cols()) {
        return Err(Error::invalid("labels", format!("label {y} out of range")));
    }
    if let Some(w) = weights {
        if w.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} weights for {} instances",
                w.len(),
                labels.len()
            )));
        }
        if w.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::invalid("instance_weights", "must be finite and positive"));
        }
    }
    if !logits.is_finite() {
        return Err(Error::NonFinite("logits".into()));
    }
    Ok(())
}

/// Shared kernel: weighted mean loss and, when asked, `∂loss/∂z`.
fn loss_kernel(
    logits: &Matrix,
    labels: &[usize],
    temps: &[f64],
    weights: Option<&[f64]>,
    want_grad: bool,
) -> Result<(f64, Option<Matrix>)> {
    check_inputs(logits, labels, temps, weights)?;
    let c = logits.cols();
    let mut grad = want_grad.then(|| Matrix::zeros(logits.rows(), c));
    let mut scaled = vec![0.0; c];
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    for (n, (row, &y)) in logits.row_iter().zip(labels).enumerate() {
        let w = weights.map_or(1.0, |w| w[n]);
        for ((s, &z), &a) in scaled.iter_mut().zip(row).zip(temps) {
            *s = z / a;
        }
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = scaled.iter().map(|s| (s - max).exp()).sum();
        let log_norm = max + sum_exp.ln();
        total += w * (log_norm - scaled[y]);
        weight_sum += w;
        if let Some(g) = grad.as_mut() {
            let out = g.row_mut(n);
            for (k, o) in out.iter_mut().enumerate() {
                let p = (scaled[k] - log_norm).exp();
                let target = if k == y { 1.0 } else { 0.0 };
                *o = w * (p - target) / temps[k];
            }
        }
    }
    if let Some(g) = grad.as_mut() {
        for v in g.as_mut_slice() {
            *v /= weight_sum;
        }
    }
    Ok((total / weight_sum, grad))
}

/// Mean of `-log softmax(z / a)[y]`, weighted by `instance_weights` if given.
pub fn cdt_loss(
    logits: &Matrix,
    labels: &[usize],
    schedule: &TemperatureSchedule,
    instance_weights: Option<&[f64]>,
) -> Result<f64> {
    Ok(loss_kernel(logits, labels, &schedule.a, instance_weights, false)?.0)
}

/// Gradient of [`cdt_loss`] with respect to the raw logits.
pub fn cdt_loss_grad(
    logits: &Matrix,
    labels: &[usize],
    schedule: &TemperatureSchedule,
    instance_weights: Option<&[f64]>,
) -> Result<Matrix> {
    Ok(loss_kernel(logits, labels, &schedule.a, instance_weights, true)?
        .1
        .expect("gradient requested"))
}

/// Loss and gradient together.
pub fn cdt_loss_and_grad(
    logits: &Matrix,
    labels: &[usize],
    schedule: &TemperatureSchedule,
    instance_weights: Option<&[f64]>,
) -> Result<(f64, Matrix)> {
    let (loss, grad) = loss_kernel(logits, labels, &schedule.a, instance_weights, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

/// Gradient of the prepared objective on a batch with respect to every
/// parameter, plus the batch loss. Returned gradients share the shape of
/// `params`.
pub fn backprop(params: &MlpParams, x: &Matrix, labels: &[usize], loss: &PreparedLoss) -> Result<(MlpParams, f64)> {
    let cache = params.forward_cached(x)?;
    let features = cache.act.last().unwrap_or(x);
    let logits = params.decision_values(features)?;
    if !logits.is_finite() {
        return Err(Error::NonFinite("classifier logits".into()));
    }
    let weights = loss.instance_weights(labels);
    let (value, dz) = cdt_loss_and_grad(&logits, labels, &loss.schedule, Some(&weights))?;

    let mut grads = params.zeros_like();
    grads.classifier = dz.transpose_matmul(features)?;

    let mut upstream = if params.layers.is_empty() {
        None
    } else {
        Some(dz.matmul(&params.classifier)?)
    };
    for i in (0..params.layers.len()).rev() {
        let mut d_pre = upstream.take().expect("set for every hidden layer");
        for (g, &p) in d_pre.as_mut_slice().iter_mut().zip(cache.pre[i].as_slice()) {
            if p <= 0.0 {
                *g = 0.0;
            }
        }
        let input = if i == 0 { x } else { &cache.act[i - 1] };
        let gw = d_pre.transpose_matmul(input)?;
        let mut gb = vec![0.0; d_pre.cols()];
        for row in d_pre.row_iter() {
            for (b, v) in gb.iter_mut().zip(row) {
                *b += v;
            }
        }
        if !gw.is_finite() || gb.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of hidden layer {i}")));
        }
        if i > 0 {
            upstream = Some(d_pre.matmul(&params.layers[i].weight)?);
        }
        grads.layers[i].weight = gw;
        grads.layers[i].bias = gb;
    }
    if !grads.classifier.is_finite() {
        return Err(Error::NonFinite("classifier gradient".into()));
    }
    Ok((grads, value))
}
