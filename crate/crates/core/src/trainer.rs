//! Mini-batch SGD with momentum, decoupled-from-bias weight decay, linear
//! warmup and milestone decay, plus per-epoch statistics.

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::diagnostics::{feature_deviation, per_class_accuracy, DeviationOptions};
use crate::error::{Error, Result};
use crate::inference::predict_argmax;
use crate::model::{init_classifier, init_params, MlpArch, MlpParams};
use crate::objectives::{backprop, LossSpec, Sampling};
use crate::rng::{rng_for, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default)]
    pub warmup_epochs: usize,
    #[serde(default)]
    pub milestones: Vec<usize>,
    #[serde(default = "default_decay_factor")]
    pub decay_factor: f64,
    #[serde(default)]
    pub seed: u64,
    pub loss: LossSpec,
    #[serde(default)]
    pub freeze_features: bool,
    /// Subsample size for the per-epoch deviation metric; `None` uses the
    /// smallest training class.
    #[serde(default)]
    pub deviation_k: Option<usize>,
    #[serde(default = "default_deviation_rounds")]
    pub deviation_rounds: usize,
}

fn default_momentum() -> f64 {
    0.9
}
fn default_weight_decay() -> f64 {
    2e-4
}
fn default_decay_factor() -> f64 {
    0.01
}
fn default_deviation_rounds() -> usize {
    1000
}

impl TrainConfig {
    /// Momentum 0.9, weight decay 2e-4, 5 warmup epochs, decay ×0.01 at 80% and 90%.
    pub fn with_defaults(epochs: usize, seed: u64, loss: LossSpec) -> Self {
        let mut milestones = vec![epochs * 8 / 10, epochs * 9 / 10];
        milestones.retain(|&m| m > 0 && m < epochs);
        milestones.dedup();
        Self {
            epochs,
            batch_size: 128,
            lr: 0.1,
            momentum: default_momentum(),
            weight_decay: default_weight_decay(),
            warmup_epochs: 5.min(epochs),
            milestones,
            decay_factor: default_decay_factor(),
            seed,
            loss,
            freeze_features: false,
            deviation_k: None,
            deviation_rounds: default_deviation_rounds(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::invalid("lr", "must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum", "must lie in [0, 1)"));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::invalid("weight_decay", "must be finite and >= 0"));
        }
        if !self.decay_factor.is_finite() || self.decay_factor <= 0.0 {
            return Err(Error::invalid("decay_factor", "must be finite and positive"));
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) || self.milestones.last().is_some_and(|&m| m >= self.epochs)
        {
            return Err(Error::invalid(
                "milestones",
                "must be strictly increasing and below epochs",
            ));
        }
        if self.deviation_rounds == 0 {
            return Err(Error::invalid("deviation_rounds", "must be positive"));
        }
        Ok(())
    }
}

/// Learning rate for a zero-based global iteration.
///
/// During warmup the rate ramps linearly per iteration and reaches `lr` on the
/// last warmup iteration; afterwards it is `lr · factor^(milestones passed)`.
pub fn lr_at(config: &TrainConfig, iteration: usize, iters_per_epoch: usize) -> f64 {
    let iters_per_epoch = iters_per_epoch.max(1);
    let epoch = iteration / iters_per_epoch;
    let passed = config.milestones.iter().filter(|&&m| epoch >= m).count();
    let base = config.lr * config.decay_factor.powi(passed as i32);
    let warmup_iters = config.warmup_epochs * iters_per_epoch;
    if iteration < warmup_iters {
        base * (iteration + 1) as f64 / warmup_iters as f64
    } else {
        base
    }
}

/// A fresh permutation of all indices each epoch, chunked into `ceil(N/B)` batches.
pub fn uniform_batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch_size", "must be positive"));
    }
    if n == 0 {
        return Err(Error::invalid("data", "empty dataset"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, &[stream::BATCHES, epoch as u64]));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// `ceil(N/B)` batches of exactly `B` instances: `floor(B/C)` per class drawn
/// with replacement, the remaining `B mod C` slots going to distinct random
/// classes.
pub fn class_balanced_batches(
    data: &LabeledDataset,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<Vec<Vec<usize>>> {
    let c = data.num_classes();
    if batch_size < c {
        return Err(Error::invalid(
            "batch_size",
            format!("{batch_size} is smaller than the {c} classes"),
        ));
    }
    if data.is_empty() {
        return Err(Error::invalid("data", "empty dataset"));
    }
    let groups = data.class_indices();
    if let Some(empty) = groups.iter().position(Vec::is_empty) {
        return Err(Error::InsufficientInstances {
            class: empty,
            needed: 1,
            available: 0,
        });
    }
    let per_class = batch_size / c;
    let extra = batch_size % c;
    let num_batches = data.len().div_ceil(batch_size);
    let mut rng = rng_for(seed, &[stream::BATCHES, epoch as u64]);
    let mut batches = Vec::with_capacity(num_batches);
    for _ in 0..num_batches {
        let mut batch = Vec::with_capacity(batch_size);
        for g in &groups {
            for _ in 0..per_class {
                batch.push(g[rng.random_range(0..g.len())]);
            }
        }
        for class in index::sample(&mut rng, c, extra) {
            let g = &groups[class];
            batch.push(g[rng.random_range(0..g.len())]);
        }
        batches.push(batch);
    }
    Ok(batches)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdHyper {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

/// `g' = g + λ·p` (not for biases), `v' = μ·v + g'`, `p' = p − lr·v'`.
///
/// Feature-extractor tensors are left untouched when `update_features` is
/// false.
pub fn sgd_step(
    params: &mut MlpParams,
    grads: &MlpParams,
    velocity: &mut MlpParams,
    hyper: SgdHyper,
    update_features: bool,
) -> Result<()> {
    let grads_iter = grads.tensors();
    for (((p, kind), (g, _)), (v, _)) in params.tensors_mut().zip(grads_iter).zip(velocity.tensors_mut()) {
        if kind.is_feature() && !update_features {
            continue;
        }
        if p.len() != g.len() || p.len() != v.len() {
            return Err(Error::Shape("gradient does not match parameters".into()));
        }
        let decay = if kind.is_bias() { 0.0 } else { hyper.weight_decay };
        for ((pi, &gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
            let g_eff = gi + decay * *pi;
            *vi = hyper.momentum * *vi + g_eff;
            *pi -= hyper.lr * *vi;
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("parameter update".into()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub classifier_norms: Vec<f64>,
    pub feature_deviation: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParams,
    pub metrics: Vec<EpochMetrics>,
}

fn check_sets(train_set: &LabeledDataset, test_set: &LabeledDataset, arch: &MlpArch) -> Result<()> {
    arch.validate()?;
    if train_set.dim() != arch.input_dim || test_set.dim() != arch.input_dim {
        return Err(Error::Shape(format!(
            "datasets have dims {}/{}, model expects {}",
            train_set.dim(),
            test_set.dim(),
            arch.input_dim
        )));
    }
    if train_set.num_classes() != arch.num_classes || test_set.num_classes() != arch.num_classes {
        return Err(Error::Shape("class count disagrees between data and model".into()));
    }
    for (name, set) in [("train", train_set), ("test", test_set)] {
        if let Some(c) = set.per_class_counts().iter().position(|&n| n == 0) {
            return Err(Error::invalid(
                "data",
                format!("{name} set has no instance of class {c}"),
            ));
        }
    }
    Ok(())
}

/// Trains from a fresh initialization.
pub fn train(
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    arch: &MlpArch,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    check_sets(train_set, test_set, arch)?;
    let params = init_params(arch, config.seed)?;
    train_from(params, train_set, test_set, config)
}

/// Re-initializes the classifier, freezes the feature extractor and trains
/// only the classifier on `train_set`.
pub fn retrain_classifier(
    trained: &MlpParams,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    trained.validate()?;
    check_sets(train_set, test_set, &trained.arch)?;
    let mut params = trained.clone();
    params.classifier = init_classifier(&trained.arch, &mut rng_for(config.seed, &[stream::CLASSIFIER_REINIT]));
    let config = TrainConfig {
        freeze_features: true,
        ..config.clone()
    };
    train_from(params, train_set, test_set, &config)
}

/// Runs the SGD loop starting from `params`.
pub fn train_from(
    mut params: MlpParams,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    params.validate()?;
    check_sets(train_set, test_set, &params.arch)?;
    let counts = train_set.per_class_counts();
    let prepared = config.loss.prepare(&counts)?;
    let deviation = DeviationOptions {
        k: config
            .deviation_k
            .unwrap_or_else(|| *counts.iter().min().expect("classes")),
        rounds: config.deviation_rounds,
        seed: config.seed,
        normalize: true,
    };
    let iters_per_epoch = train_set.len().div_ceil(config.batch_size);
    let mut velocity = params.zeros_like();
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut iteration = 0;

    for epoch in 0..config.epochs {
        let batches = match config.loss.sampling {
            Sampling::Uniform => uniform_batches(train_set.len(), config.batch_size, config.seed, epoch)?,
            Sampling::ClassBalanced => class_balanced_batches(train_set, config.batch_size, config.seed, epoch)?,
        };
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for batch in &batches {
            let x = train_set.features().select_rows(batch);
            let y: Vec<usize> = batch.iter().map(|&i| train_set.labels()[i]).collect();
            let (grads, loss) = match backprop(&params, &x, &y, &prepared) {
                Ok(r) => r,
                Err(Error::NonFinite(_)) => return Err(diverged(epoch)),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(diverged(epoch));
            }
            let hyper = SgdHyper {
                lr: lr_at(config, iteration, iters_per_epoch),
                momentum: config.momentum,
                weight_decay: config.weight_decay,
            };
            match sgd_step(&mut params, &grads, &mut velocity, hyper, !config.freeze_features) {
                Ok(()) => {}
                Err(Error::NonFinite(_)) => return Err(diverged(epoch)),
                Err(e) => return Err(e),
            }
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
            iteration += 1;
        }
        metrics.push(epoch_metrics(
            &params,
            train_set,
            test_set,
            epoch,
            loss_sum / seen as f64,
            &deviation,
        )?);
    }
    Ok(TrainOutcome { params, metrics })
}

fn diverged(epoch: usize) -> Error {
    Error::Diverged {
        epoch,
        last_good_epoch: epoch.checked_sub(1),
    }
}

/// Accuracy is taken with the plain argmax rule regardless of the objective.
pub fn epoch_metrics(
    params: &MlpParams,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    epoch: usize,
    train_loss: f64,
    deviation: &DeviationOptions,
) -> Result<EpochMetrics> {
    let c = params.num_classes();
    let accuracy = |set: &LabeledDataset| -> Result<Vec<f64>> {
        let preds = predict_argmax(params, set.features())?;
        Ok(per_class_accuracy(&preds, set.labels(), c)?
            .into_iter()
            .map(|a| a.expect("every class present"))
            .collect())
    };
    let report = feature_deviation(params, train_set, test_set, deviation)?;
    Ok(EpochMetrics {
        epoch,
        train_loss,
        train_accuracy: accuracy(train_set)?,
        test_accuracy: accuracy(test_set)?,
        classifier_norms: params.classifier_norms(),
        feature_deviation: report.dis,
    })
}
