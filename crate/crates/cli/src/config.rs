use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use cdt_core::datagen::ImbalanceKind;
use cdt_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable naming the default output root.
pub const OUT_ROOT_ENV: &str = "CDTLAB_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetBlock,
    pub model: ModelBlock,
    /// `seed` inside this block is ignored; the master seed is used.
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub diagnose: DiagnoseBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetBlock {
    pub source: DataSource,
    pub imbalance: ImbalanceBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticBlock),
    /// Balanced pools read from CSV; the imbalance profile is applied to the
    /// training pool, the test file is used as is.
    Csv {
        train: PathBuf,
        test: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticBlock {
    pub num_classes: usize,
    pub dim: usize,
    /// Standard deviation of the class-mean prior.
    pub separation: f64,
    #[serde(default = "one")]
    pub cov_scale: f64,
    /// Training pool size per class; must cover `n_max`.
    pub pool_per_class: usize,
    pub test_per_class: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_shift: Option<Vec<Vec<f64>>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImbalanceBlock {
    pub kind: ImbalanceKind,
    #[serde(default = "one")]
    pub ratio: f64,
    pub n_max: usize,
    /// Replace the profile by its equal-total balanced counterpart.
    #[serde(default)]
    pub balanced_counterpart: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default)]
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalBlock {
    #[serde(default)]
    pub tau_norm: bool,
    #[serde(default = "default_tau_grid")]
    pub tau_grid: Vec<f64>,
    #[serde(default)]
    pub ncm: bool,
    #[serde(default = "yes")]
    pub ncm_normalize: bool,
}

impl Default for EvalBlock {
    fn default() -> Self {
        Self {
            tau_norm: false,
            tau_grid: default_tau_grid(),
            ncm: false,
            ncm_normalize: true,
        }
    }
}

fn yes() -> bool {
    true
}

fn default_tau_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// γ values tried for the objective in `train.loss` (CDT unless the
    /// objective is re-weighting).
    #[serde(default = "default_gamma_grid")]
    pub gamma_grid: Vec<f64>,
    #[serde(default = "default_holdout_k")]
    pub holdout_k: usize,
    /// Also pick τ for τ-normalization on the held-out set.
    #[serde(default)]
    pub select_tau: bool,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            gamma_grid: default_gamma_grid(),
            holdout_k: default_holdout_k(),
            select_tau: false,
        }
    }
}

fn default_gamma_grid() -> Vec<f64> {
    vec![0.0, 0.1, 0.2, 0.3, 0.4]
}

fn default_holdout_k() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseBlock {
    /// Defaults to the smallest training class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation_k: Option<usize>,
    #[serde(default = "default_rounds")]
    pub deviation_rounds: usize,
}

impl Default for DiagnoseBlock {
    fn default() -> Self {
        Self {
            deviation_k: None,
            deviation_rounds: default_rounds(),
        }
    }
}

fn default_rounds() -> usize {
    1000
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // Relative CSV paths are resolved against the config file.
        if let DataSource::Csv { train, test } = &mut cfg.dataset.source {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [train, test] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.version == CONFIG_VERSION,
            "unsupported config version {} (expected {CONFIG_VERSION})",
            self.version
        );
        match &self.dataset.source {
            DataSource::Synthetic(s) => {
                ensure!(
                    s.num_classes >= 2 && s.dim >= 1,
                    "synthetic data needs >= 2 classes and dim >= 1"
                );
                ensure!(
                    s.pool_per_class >= self.dataset.imbalance.n_max,
                    "pool_per_class {} is smaller than n_max {}",
                    s.pool_per_class,
                    self.dataset.imbalance.n_max
                );
                ensure!(s.test_per_class >= 1, "test_per_class must be positive");
            }
            DataSource::Csv { train, test } => {
                for p in [train, test] {
                    ensure!(p.exists(), "dataset file {} does not exist", p.display());
                }
            }
        }
        self.train_config(self.seed).validate()?;
        if self.eval.tau_norm || self.sweep.select_tau {
            ensure!(
                !self.eval.tau_grid.is_empty(),
                "tau_grid must be non-empty when τ-normalization is enabled"
            );
            ensure!(
                self.eval.tau_grid.iter().all(|t| (0.0..=1.0).contains(t)),
                "tau_grid values must lie in [0, 1]"
            );
        }
        ensure!(!self.sweep.gamma_grid.is_empty(), "gamma_grid must be non-empty");
        if self.sweep.gamma_grid.iter().any(|g| !g.is_finite() || *g < 0.0) {
            bail!("gamma_grid values must be >= 0");
        }
        ensure!(self.sweep.holdout_k >= 1, "holdout_k must be positive");
        ensure!(self.diagnose.deviation_rounds >= 1, "deviation_rounds must be positive");
        Ok(())
    }

    /// The train block with the master seed substituted.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }

    /// `--out` wins, then `output_dir`, then `$CDTLAB_OUT/<name>`, then `runs/<name>`.
    pub fn resolve_out_dir(&self, cli_out: Option<&Path>, config_path: &Path) -> PathBuf {
        if let Some(p) = cli_out {
            return p.to_path_buf();
        }
        if let Some(p) = &self.output_dir {
            return p.clone();
        }
        let root = std::env::var_os(OUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        let name = config_path
            .file_stem()
            .map_or_else(|| "experiment".into(), |s| s.to_os_string());
        root.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXAMPLE: &str = r#"{
  "version": 1,
  "seed": 7,
  "dataset": {
    "source": { "synthetic": { "num_classes": 3, "dim": 2, "separation": 2.0, "pool_per_class": 40, "test_per_class": 10 } },
    "imbalance": { "kind": "long_tailed", "ratio": 4.0, "n_max": 40 }
  },
  "model": { "hidden": [4] },
  "train": { "epochs": 3, "batch_size": 16, "lr": 0.05, "seed": 0, "loss": { "objective": { "kind": "cdt", "gamma": 0.2 } } }
}"#;

    #[test]
    fn round_trip_is_idempotent() {
        let cfg: ExperimentConfig = serde_json::from_str(EXAMPLE).unwrap();
        cfg.validate().unwrap();
        let once = cfg.to_json().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&once).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json().unwrap(), once);
        assert_eq!(cfg.train.momentum, 0.9);
        assert_eq!(cfg.train.weight_decay, 2e-4);
        assert_eq!(cfg.sweep.gamma_grid, vec![0.0, 0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn validation_errors() {
        let mut cfg: ExperimentConfig = serde_json::from_str(EXAMPLE).unwrap();
        cfg.version = 2;
        assert!(cfg.validate().is_err());
        let mut cfg: ExperimentConfig = serde_json::from_str(EXAMPLE).unwrap();
        cfg.sweep.gamma_grid.clear();
        assert!(cfg.validate().is_err());
        let mut cfg: ExperimentConfig = serde_json::from_str(EXAMPLE).unwrap();
        cfg.eval.tau_norm = true;
        cfg.eval.tau_grid = vec![];
        assert!(cfg.validate().is_err());
        let mut cfg: ExperimentConfig = serde_json::from_str(EXAMPLE).unwrap();
        cfg.dataset.source = DataSource::Csv {
            train: "/nonexistent/a.csv".into(),
            test: "/nonexistent/b.csv".into(),
        };
        assert!(cfg.validate().is_err());
        assert!(
            serde_json::from_str::<ExperimentConfig>(&EXAMPLE.replace("\"seed\": 7", "\"seed\": 7, \"bogus\": 1"))
                .is_err()
        );
    }

    #[test]
    fn out_dir_precedence() {
        let mut cfg: ExperimentConfig = serde_json::from_str(EXAMPLE).unwrap();
        let cp = Path::new("configs/lt.json");
        assert_eq!(cfg.resolve_out_dir(Some(Path::new("x")), cp), PathBuf::from("x"));
        cfg.output_dir = Some("y".into());
        assert_eq!(cfg.resolve_out_dir(None, cp), PathBuf::from("y"));
    }
}
