//! Labeled feature matrices and their CSV form.
//!
//! CSV layout: header `label,f0,f1,...,f{d-1}`, one instance per row, values
//! written with 17 significant digits so a save/load cycle is lossless.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if num_classes == 0 {
            return Err(Error::invalid("num_classes", "must be positive"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(
                "labels",
                format!("label {bad} out of range for {num_classes} classes"),
            ));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("dataset features".into()));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn per_class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Instance indices grouped by class, each group in ascending order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            groups[y].push(i);
        }
        groups
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Same instances with labels rewritten through `map`; `None` entries drop
    /// the class entirely.
    pub fn remap_classes(&self, map: &[Option<usize>], num_classes: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| map[self.labels[i]].is_some()).collect();
        let labels = keep.iter().map(|&i| map[self.labels[i]].expect("filtered")).collect();
        LabeledDataset::new(self.features.select_rows(&keep), labels, num_classes)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::from("label");
        for j in 0..self.dim() {
            write!(line, ",f{j}").expect("write to String");
        }
        writeln!(out, "{line}")?;
        for (i, row) in self.features.row_iter().enumerate() {
            line.clear();
            write!(line, "{}", self.labels[i]).expect("write to String");
            for v in row {
                line.push(',');
                line.push_str(&fmt_f64(*v));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV; the class count is `max(label) + 1` unless given.
    pub fn read_csv<R: Read>(input: R, num_classes: Option<usize>) -> Result<Self> {
        let reader = BufReader::new(input);
        let mut lines = reader.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "empty file".into(),
        })??;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.first() != Some(&"label") {
            return Err(Error::Parse {
                line: 1,
                reason: "header must start with `label`".into(),
            });
        }
        for (j, name) in cols[1..].iter().enumerate() {
            if *name != format!("f{j}") {
                return Err(Error::Parse {
                    line: 1,
                    reason: format!("expected column `f{j}`, found `{name}`"),
                });
            }
        }
        let dim = cols.len() - 1;
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            let lineno = k + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.trim_end().split(',');
            let label = fields
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::Parse {
                    line: lineno,
                    reason: "label is not a non-negative integer".into(),
                })?;
            let before = data.len();
            for f in fields {
                data.push(f.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    reason: format!("bad feature value `{f}`: {e}"),
                })?);
            }
            if data.len() - before != dim {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("expected {dim} features, found {}", data.len() - before),
                });
            }
            labels.push(label);
        }
        let inferred = labels.iter().max().map_or(0, |m| m + 1);
        let num_classes = num_classes.unwrap_or(inferred);
        let features = Matrix::from_vec(labels.len(), dim, data)?;
        LabeledDataset::new(features, labels, num_classes)
    }

    pub fn load_csv(path: impl AsRef<Path>, num_classes: Option<usize>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, num_classes)
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
