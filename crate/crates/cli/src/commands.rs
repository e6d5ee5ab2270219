//! Subcommand bodies. Each one rebuilds the datasets from the configuration
//! and master seed, so any subcommand can run on its own; `eval` and
//! `diagnose` additionally need the checkpoint written by `train`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cdt_core::datagen::ImbalanceProfile;
use cdt_core::diagnostics::{decision_matrix, feature_deviation, norm_trajectory, DeviationOptions};
use cdt_core::inference::predict_argmax;
use cdt_core::trainer::train;
use cdt_core::{LabeledDataset, MlpParams};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{count_matrix_csv, matrix_csv, metrics_csv, predictions_csv, series_csv, write_json, write_text};
use crate::protocol::{arch_for, build_datasets, evaluate, sweep, Accuracy, GeneratedData, RunReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    pub seed: u64,
    pub profile: ImbalanceProfile,
    pub train_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
    pub dim: usize,
}

fn subdir(out: &Path, name: &str) -> Result<PathBuf> {
    let dir = out.join(name);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn load_checkpoint(out: &Path) -> Result<MlpParams> {
    let path = out.join("run").join("checkpoint.json");
    MlpParams::load_json(&path).with_context(|| format!("loading {} (run `train` first)", path.display()))
}

fn data(cfg: &ExperimentConfig, seed: u64) -> Result<GeneratedData> {
    build_datasets(&cfg.dataset, seed)
}

/// `data/train.csv`, `data/test.csv`, `data/manifest.json`.
pub fn cmd_gen(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<DataManifest> {
    let d = data(cfg, seed)?;
    let dir = subdir(out, "data")?;
    d.train.save_csv(dir.join("train.csv"))?;
    d.test.save_csv(dir.join("test.csv"))?;
    let manifest = DataManifest {
        seed,
        train_counts: d.train.per_class_counts(),
        test_counts: d.test.per_class_counts(),
        dim: d.train.dim(),
        profile: d.profile,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// `run/checkpoint.json`, `run/metrics.csv`, `run/report.json`.
pub fn cmd_train(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<RunReport> {
    let d = data(cfg, seed)?;
    let config = cfg.train_config(seed);
    let arch = arch_for(&d.train, &cfg.model.hidden)?;
    let outcome = train(&d.train, &d.test, &arch, &config)?;
    let dir = subdir(out, "run")?;
    outcome.params.save_json(dir.join("checkpoint.json"))?;
    write_text(&dir.join("metrics.csv"), &metrics_csv(&outcome.metrics))?;
    let report = RunReport::new(&outcome, &config, &d.train, &d.test);
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

/// `eval/eval.json` plus one `eval/pred_<rule>.csv` per decision rule.
pub fn cmd_eval(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<crate::protocol::EvalReport> {
    let d = data(cfg, seed)?;
    let params = load_checkpoint(out)?;
    let evaluation = evaluate(&params, &d.train, &d.test, &cfg.eval)?;
    let dir = subdir(out, "eval")?;
    for (rule, preds) in &evaluation.predictions {
        write_text(&dir.join(format!("pred_{rule}.csv")), &predictions_csv(preds))?;
    }
    write_json(&dir.join("eval.json"), &evaluation.report)?;
    Ok(evaluation.report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    #[serde(flatten)]
    pub summary: crate::protocol::SweepSummary,
    pub final_test: Accuracy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_test_tau: Option<Accuracy>,
}

/// `sweep/sweep.csv`, `sweep/sweep.json` and the retrained model under `sweep/final/`.
pub fn cmd_sweep(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<SweepReport> {
    let d = data(cfg, seed)?;
    let base = cfg.train_config(seed);
    let outcome = sweep(&d.train, &d.test, &cfg.model.hidden, &base, &cfg.sweep, &cfg.eval)?;
    let params = &outcome.final_run.params;
    let final_test = Accuracy::of(&predict_argmax(params, d.test.features())?, &d.test)?;
    let final_test_tau = match outcome.summary.best_tau {
        Some(tau) => Some(Accuracy::of(
            &cdt_core::inference::predict_tau_norm(params, d.test.features(), tau)?,
            &d.test,
        )?),
        None => None,
    };

    let dir = subdir(out, "sweep")?;
    let mut table = String::from("gamma,validation_macro_accuracy\n");
    for row in &outcome.summary.rows {
        table.push_str(&format!(
            "{},{}\n",
            cdt_core::dataset::fmt_f64(row.gamma),
            cdt_core::dataset::fmt_f64(row.validation.macro_accuracy)
        ));
    }
    write_text(&dir.join("sweep.csv"), &table)?;
    let final_dir = subdir(&dir, "final")?;
    params.save_json(final_dir.join("checkpoint.json"))?;
    write_text(&final_dir.join("metrics.csv"), &metrics_csv(&outcome.final_run.metrics))?;
    write_json(
        &final_dir.join("report.json"),
        &RunReport::new(&outcome.final_run, &outcome.final_config, &d.train, &d.test),
    )?;
    let report = SweepReport {
        summary: outcome.summary,
        final_test,
        final_test_tau,
    };
    write_json(&dir.join("sweep.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub train: Accuracy,
    pub test: Accuracy,
}

/// Smallest training class size, the default deviation subsample.
pub fn default_deviation_k(train: &LabeledDataset) -> usize {
    train.per_class_counts().into_iter().min().unwrap_or(1)
}

/// `diagnose/deviation.json`, `diagnose/decision_{train,test}.{json,csv}`,
/// `diagnose/predicted_{train,test}.csv`, `diagnose/accuracy.json`,
/// `diagnose/norm_trajectory.csv`.
pub fn cmd_diagnose(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<cdt_core::diagnostics::DeviationReport> {
    let d = data(cfg, seed)?;
    let params = load_checkpoint(out)?;
    let dir = subdir(out, "diagnose")?;

    let options = DeviationOptions {
        k: cfg
            .diagnose
            .deviation_k
            .unwrap_or_else(|| default_deviation_k(&d.train)),
        rounds: cfg.diagnose.deviation_rounds,
        seed,
        normalize: true,
    };
    let deviation = feature_deviation(&params, &d.train, &d.test, &options)?;
    write_json(&dir.join("deviation.json"), &deviation)?;

    for (name, set) in [("train", &d.train), ("test", &d.test)] {
        let m = decision_matrix(&params, set)?;
        write_text(&dir.join(format!("decision_{name}.csv")), &matrix_csv(&m.values))?;
        write_text(
            &dir.join(format!("predicted_{name}.csv")),
            &count_matrix_csv(&m.predictions),
        )?;
        write_json(&dir.join(format!("decision_{name}.json")), &m)?;
    }
    let accuracy = AccuracyReport {
        train: Accuracy::of(&predict_argmax(&params, d.train.features())?, &d.train)?,
        test: Accuracy::of(&predict_argmax(&params, d.test.features())?, &d.test)?,
    };
    write_json(&dir.join("accuracy.json"), &accuracy)?;

    let report_path = out.join("run").join("report.json");
    if report_path.exists() {
        let text = std::fs::read_to_string(&report_path)?;
        let report: RunReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", report_path.display()))?;
        write_text(
            &dir.join("norm_trajectory.csv"),
            &series_csv(&norm_trajectory(&report.epochs)?),
        )?;
    }
    Ok(deviation)
}
