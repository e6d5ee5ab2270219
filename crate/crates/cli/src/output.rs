//! File emitters. Every number is written with 17 significant digits in CSV
//! and with shortest round-trip precision in JSON.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use cdt_core::dataset::fmt_f64;
use cdt_core::trainer::EpochMetrics;
use cdt_core::Matrix;
use serde::Serialize;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// One row per epoch: `epoch,train_loss,acc_train_c*,acc_test_c*,norm_c*,dev_c*`.
pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let c = metrics.first().map_or(0, |m| m.classifier_norms.len());
    let mut out = String::from("epoch,train_loss");
    for prefix in ["acc_train", "acc_test", "norm", "dev"] {
        for k in 0..c {
            write!(out, ",{prefix}_c{k}").expect("write to String");
        }
    }
    out.push('\n');
    for m in metrics {
        write!(out, "{},{}", m.epoch, fmt_f64(m.train_loss)).expect("write to String");
        for series in [
            &m.train_accuracy,
            &m.test_accuracy,
            &m.classifier_norms,
            &m.feature_deviation,
        ] {
            for v in series.iter() {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
        }
        out.push('\n');
    }
    out
}

/// `index,label_pred`
pub fn predictions_csv(predictions: &[usize]) -> String {
    let mut out = String::from("index,label_pred\n");
    for (i, p) in predictions.iter().enumerate() {
        writeln!(out, "{i},{p}").expect("write to String");
    }
    out
}

/// Plain numeric grid, one matrix row per line, no header.
pub fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn count_matrix_csv(m: &[Vec<usize>]) -> String {
    let mut out = String::new();
    for row in m {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `class,epoch0,epoch1,...` with one row per class.
pub fn series_csv(series: &[Vec<f64>]) -> String {
    let epochs = series.first().map_or(0, Vec::len);
    let mut out = String::from("class");
    for e in 0..epochs {
        write!(out, ",epoch{e}").expect("write to String");
    }
    out.push('\n');
    for (c, s) in series.iter().enumerate() {
        write!(out, "{c}").expect("write to String");
        for v in s {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}
