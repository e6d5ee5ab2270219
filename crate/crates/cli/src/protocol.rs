//! In-memory experiment protocols shared by the subcommands and the tests.

use anyhow::{ensure, Context, Result};
use cdt_core::datagen::{
    balanced_counterpart, gen_gaussian_mixture, holdout_split, make_longtail_counts, make_step_counts,
    subsample_to_profile, GaussianMixtureSpec, ImbalanceKind, ImbalanceProfile,
};
use cdt_core::diagnostics::{macro_accuracy, per_class_accuracy};
use cdt_core::inference::{class_means, predict_argmax, predict_ncm, predict_tau_norm, select_tau};
use cdt_core::model::MlpArch;
use cdt_core::trainer::{train, EpochMetrics, TrainConfig, TrainOutcome};
use cdt_core::{LabeledDataset, LossSpec, MlpParams, Objective};
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, DatasetBlock, EvalBlock, SweepBlock};

#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub profile: ImbalanceProfile,
}

pub fn build_profile(block: &DatasetBlock, num_classes: usize) -> Result<ImbalanceProfile> {
    let imb = &block.imbalance;
    let profile = match imb.kind {
        ImbalanceKind::LongTailed => make_longtail_counts(num_classes, imb.n_max, imb.ratio)?,
        ImbalanceKind::Step => make_step_counts(num_classes, imb.n_max, imb.ratio)?,
        ImbalanceKind::Balanced => ImbalanceProfile {
            kind: ImbalanceKind::Balanced,
            ratio: 1.0,
            counts: vec![imb.n_max; num_classes],
        },
    };
    Ok(if imb.balanced_counterpart {
        balanced_counterpart(&profile)?
    } else {
        profile
    })
}

pub fn build_datasets(block: &DatasetBlock, seed: u64) -> Result<GeneratedData> {
    let (pool, test) = match &block.source {
        DataSource::Synthetic(s) => {
            let mut spec = GaussianMixtureSpec::random(s.num_classes, s.dim, s.separation, s.cov_scale, seed)?;
            spec.test_shift = s.test_shift.clone();
            gen_gaussian_mixture(&spec, s.pool_per_class, s.test_per_class, seed)?
        }
        DataSource::Csv { train, test } => {
            let pool = LabeledDataset::load_csv(train, None).with_context(|| format!("loading {}", train.display()))?;
            let test = LabeledDataset::load_csv(test, Some(pool.num_classes()))
                .with_context(|| format!("loading {}", test.display()))?;
            ensure!(pool.dim() == test.dim(), "train and test CSVs differ in feature count");
            (pool, test)
        }
    };
    let profile = build_profile(block, pool.num_classes())?;
    let train = subsample_to_profile(&pool, &profile, seed)?;
    Ok(GeneratedData { train, test, profile })
}

pub fn arch_for(data: &LabeledDataset, hidden: &[usize]) -> Result<MlpArch> {
    Ok(MlpArch::new(data.dim(), hidden.to_vec(), data.num_classes())?)
}

/// The loss used when sweeping `gamma` on top of `base`.
pub fn loss_with_gamma(base: &LossSpec, gamma: f64) -> LossSpec {
    let objective = match base.objective {
        Objective::Reweighted { .. } => Objective::Reweighted { gamma },
        Objective::Erm | Objective::Cdt { .. } => Objective::Cdt { gamma },
    };
    LossSpec {
        objective,
        sampling: base.sampling,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub per_class: Vec<Option<f64>>,
    pub macro_accuracy: f64,
}

impl Accuracy {
    pub fn of(predictions: &[usize], data: &LabeledDataset) -> Result<Self> {
        let per_class = per_class_accuracy(predictions, data.labels(), data.num_classes())?;
        Ok(Self {
            macro_accuracy: macro_accuracy(&per_class),
            per_class,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRow {
    pub tau: f64,
    pub accuracy: Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub argmax: Accuracy,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tau_norm: Vec<TauRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ncm_train_means: Option<Accuracy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ncm_test_means: Option<Accuracy>,
}

/// Predictions per rule, in the order they are reported.
pub struct Evaluation {
    pub report: EvalReport,
    pub predictions: Vec<(String, Vec<usize>)>,
}

pub fn evaluate(
    params: &MlpParams,
    train: &LabeledDataset,
    test: &LabeledDataset,
    eval: &EvalBlock,
) -> Result<Evaluation> {
    let mut predictions = Vec::new();
    let argmax = predict_argmax(params, test.features())?;
    let report_argmax = Accuracy::of(&argmax, test)?;
    predictions.push(("argmax".to_string(), argmax));

    let mut tau_rows = Vec::new();
    if eval.tau_norm {
        for &tau in &eval.tau_grid {
            let p = predict_tau_norm(params, test.features(), tau)?;
            tau_rows.push(TauRow {
                tau,
                accuracy: Accuracy::of(&p, test)?,
            });
            predictions.push((format!("tau_{tau}"), p));
        }
    }

    let (mut ncm_train, mut ncm_test) = (None, None);
    if eval.ncm {
        let train_f = params.forward_features(train.features())?;
        let test_f = params.forward_features(test.features())?;
        let c = params.num_classes();
        let train_centers = class_means(&train_f, train.labels(), c, eval.ncm_normalize)?;
        let test_centers = class_means(&test_f, test.labels(), c, eval.ncm_normalize)?;
        let p_train = predict_ncm(&train_centers, &test_f)?;
        let p_test = predict_ncm(&test_centers, &test_f)?;
        ncm_train = Some(Accuracy::of(&p_train, test)?);
        ncm_test = Some(Accuracy::of(&p_test, test)?);
        predictions.push(("ncm_train_means".to_string(), p_train));
        predictions.push(("ncm_test_means".to_string(), p_test));
    }
    Ok(Evaluation {
        report: EvalReport {
            argmax: report_argmax,
            tau_norm: tau_rows,
            ncm_train_means: ncm_train,
            ncm_test_means: ncm_test,
        },
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub version: u32,
    pub loss: LossSpec,
    pub arch: MlpArch,
    pub train_config: TrainConfig,
    pub train_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
    pub epochs: Vec<EpochMetrics>,
    pub final_train_accuracy: Vec<f64>,
    pub final_test_accuracy: Vec<f64>,
    pub final_macro_test_accuracy: f64,
}

impl RunReport {
    pub fn new(outcome: &TrainOutcome, config: &TrainConfig, train: &LabeledDataset, test: &LabeledDataset) -> Self {
        let last = outcome.metrics.last().expect("at least one epoch");
        RunReport {
            format: "cdt-run-report".into(),
            version: 1,
            loss: config.loss,
            arch: outcome.params.arch.clone(),
            train_config: config.clone(),
            train_counts: train.per_class_counts(),
            test_counts: test.per_class_counts(),
            epochs: outcome.metrics.clone(),
            final_train_accuracy: last.train_accuracy.clone(),
            final_test_accuracy: last.test_accuracy.clone(),
            final_macro_test_accuracy: last.test_accuracy.iter().sum::<f64>() / last.test_accuracy.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub validation: Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub holdout_k: usize,
    /// `class_map[original] = Some(index)` for classes kept in the held-out split.
    pub class_map: Vec<Option<usize>>,
    pub rows: Vec<SweepRow>,
    pub best_gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_tau: Option<f64>,
    pub final_loss: LossSpec,
}

pub struct SweepOutcome {
    pub summary: SweepSummary,
    pub final_config: TrainConfig,
    pub final_run: TrainOutcome,
}

/// Held-out-K γ selection: train on the remainder for every grid value,
/// score macro accuracy on the held-out set, keep the best (ties to the
/// smaller γ), then retrain on the full training set with the winner.
pub fn sweep(
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    hidden: &[usize],
    base: &TrainConfig,
    sweep: &SweepBlock,
    eval: &EvalBlock,
) -> Result<SweepOutcome> {
    ensure!(!sweep.gamma_grid.is_empty(), "empty gamma grid");
    let split = holdout_split(train_set, sweep.holdout_k, base.seed)?;
    let holdout_arch = arch_for(&split.train, hidden)?;

    let mut rows = Vec::with_capacity(sweep.gamma_grid.len());
    let mut best: Option<(f64, f64, MlpParams)> = None;
    for &gamma in &sweep.gamma_grid {
        let config = TrainConfig {
            loss: loss_with_gamma(&base.loss, gamma),
            ..base.clone()
        };
        let run = train(&split.train, &split.validation, &holdout_arch, &config)
            .with_context(|| format!("sweep run with gamma {gamma}"))?;
        let preds = predict_argmax(&run.params, split.validation.features())?;
        let validation = Accuracy::of(&preds, &split.validation)?;
        let better = match &best {
            None => true,
            Some((score, g, _)) => {
                validation.macro_accuracy > *score || (validation.macro_accuracy == *score && gamma < *g)
            }
        };
        if better {
            best = Some((validation.macro_accuracy, gamma, run.params));
        }
        rows.push(SweepRow { gamma, validation });
    }
    let (_, best_gamma, best_params) = best.expect("non-empty grid");
    let best_tau = if sweep.select_tau {
        Some(select_tau(&best_params, &split.validation, &eval.tau_grid)?)
    } else {
        None
    };

    let final_config = TrainConfig {
        loss: loss_with_gamma(&base.loss, best_gamma),
        ..base.clone()
    };
    let final_run = train(train_set, test_set, &arch_for(train_set, hidden)?, &final_config)?;
    Ok(SweepOutcome {
        summary: SweepSummary {
            holdout_k: sweep.holdout_k,
            class_map: split.class_map,
            rows,
            best_gamma,
            best_tau,
            final_loss: final_config.loss,
        },
        final_config,
        final_run,
    })
}
