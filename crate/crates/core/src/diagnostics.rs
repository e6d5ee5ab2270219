//! Analysis instruments: train/test feature deviation per class, mean
//! decision-value matrices, per-class accuracy and classifier-norm series.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::inference::{argmax_rows, l2_normalize_rows};
use crate::linalg::{euclidean_distance, Matrix};
use crate::model::MlpParams;
use crate::rng::{rng_for, stream};
use crate::trainer::EpochMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationOptions {
    /// Training instances drawn per class and round.
    pub k: usize,
    pub rounds: usize,
    pub seed: u64,
    /// Scale every feature to unit ℓ2 norm before averaging.
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub dis: Vec<f64>,
    pub k: usize,
    pub rounds: usize,
    pub seed: u64,
    pub normalized: bool,
}

/// Positions (within a class's training instances) drawn for one round, in
/// ascending order.
pub fn deviation_subsample(seed: u64, class: usize, round: usize, class_size: usize, k: usize) -> Vec<usize> {
    let mut rng = rng_for(seed, &[stream::DEVIATION, class as u64, round as u64]);
    let mut pick = index::sample(&mut rng, class_size, k).into_vec();
    pick.sort_unstable();
    pick
}

/// `dis(c)`: distance between the mean of `k` sub-sampled training features
/// and the mean of all test features of class `c`, averaged over rounds.
pub fn feature_deviation(
    params: &MlpParams,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    options: &DeviationOptions,
) -> Result<DeviationReport> {
    let train_f = params.forward_features(train_set.features())?;
    let test_f = params.forward_features(test_set.features())?;
    deviation_from_features(
        &train_f,
        train_set.labels(),
        &test_f,
        test_set.labels(),
        params.num_classes(),
        options,
    )
}

pub fn deviation_from_features(
    train_features: &Matrix,
    train_labels: &[usize],
    test_features: &Matrix,
    test_labels: &[usize],
    num_classes: usize,
    options: &DeviationOptions,
) -> Result<DeviationReport> {
    if options.k == 0 || options.rounds == 0 {
        return Err(Error::invalid("options", "k and rounds must be positive"));
    }
    if train_features.cols() != test_features.cols() {
        return Err(Error::Shape("train and test features differ in width".into()));
    }
    let (train_f, test_f) = if options.normalize {
        (l2_normalize_rows(train_features), l2_normalize_rows(test_features))
    } else {
        (train_features.clone(), test_features.clone())
    };
    let group = |labels: &[usize]| {
        let mut g = vec![Vec::new(); num_classes];
        for (i, &y) in labels.iter().enumerate() {
            g[y].push(i);
        }
        g
    };
    let train_groups = group(train_labels);
    let test_groups = group(test_labels);
    let m = train_f.cols();
    let mut dis = Vec::with_capacity(num_classes);
    for c in 0..num_classes {
        let tr = &train_groups[c];
        let te = &test_groups[c];
        if tr.len() < options.k {
            return Err(Error::InsufficientInstances {
                class: c,
                needed: options.k,
                available: tr.len(),
            });
        }
        if te.is_empty() {
            return Err(Error::InsufficientInstances {
                class: c,
                needed: 1,
                available: 0,
            });
        }
        let test_mean = mean_of(&test_f, te.iter().copied(), m);
        let mut total = 0.0;
        for r in 0..options.rounds {
            let pick = deviation_subsample(options.seed, c, r, tr.len(), options.k);
            let train_mean = mean_of(&train_f, pick.iter().map(|&p| tr[p]), m);
            total += euclidean_distance(&train_mean, &test_mean);
        }
        dis.push(total / options.rounds as f64);
    }
    Ok(DeviationReport {
        dis,
        k: options.k,
        rounds: options.rounds,
        seed: options.seed,
        normalized: options.normalize,
    })
}

fn mean_of(features: &Matrix, rows: impl Iterator<Item = usize>, m: usize) -> Vec<f64> {
    let mut acc = vec![0.0; m];
    let mut n = 0usize;
    for i in rows {
        for (a, v) in acc.iter_mut().zip(features.row(i)) {
            *a += v;
        }
        n += 1;
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionMatrix {
    /// Row = true class, column = classifier; entries are mean decision values.
    pub values: Matrix,
    /// Row = true class, column = predicted class.
    pub predictions: Vec<Vec<usize>>,
}

pub fn decision_matrix(params: &MlpParams, data: &LabeledDataset) -> Result<DecisionMatrix> {
    let c = params.num_classes();
    let counts = data.per_class_counts();
    if let Some(missing) = counts.iter().position(|&n| n == 0) {
        return Err(Error::InsufficientInstances {
            class: missing,
            needed: 1,
            available: 0,
        });
    }
    let dv = params.logits(data.features())?;
    let preds = argmax_rows(&dv);
    let mut values = Matrix::zeros(c, c);
    let mut predictions = vec![vec![0usize; c]; c];
    for ((row, &y), &p) in dv.row_iter().zip(data.labels()).zip(&preds) {
        for (s, v) in values.row_mut(y).iter_mut().zip(row) {
            *s += v;
        }
        predictions[y][p] += 1;
    }
    for (y, &n) in counts.iter().enumerate() {
        values.row_mut(y).iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(DecisionMatrix { values, predictions })
}

/// Fraction correct per class; `None` for classes without instances.
pub fn per_class_accuracy(predictions: &[usize], labels: &[usize], num_classes: usize) -> Result<Vec<Option<f64>>> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut correct = vec![0usize; num_classes];
    let mut total = vec![0usize; num_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if y >= num_classes || p >= num_classes {
            return Err(Error::invalid(
                "labels",
                format!("class index out of range for {num_classes} classes"),
            ));
        }
        total[y] += 1;
        if p == y {
            correct[y] += 1;
        }
    }
    Ok(correct
        .iter()
        .zip(&total)
        .map(|(&k, &n)| (n > 0).then(|| k as f64 / n as f64))
        .collect())
}

/// Mean over the classes that are present.
pub fn macro_accuracy(per_class: &[Option<f64>]) -> f64 {
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return 0.0;
    }
    present.iter().sum::<f64>() / present.len() as f64
}

/// `series[c][e]` = norm of classifier `c` after epoch `e`.
pub fn norm_trajectory(metrics: &[EpochMetrics]) -> Result<Vec<Vec<f64>>> {
    let first = metrics.first().ok_or_else(|| Error::invalid("metrics", "empty"))?;
    let c = first.classifier_norms.len();
    let mut series = vec![Vec::with_capacity(metrics.len()); c];
    for m in metrics {
        if m.classifier_norms.len() != c {
            return Err(Error::Shape("epochs disagree on class count".into()));
        }
        for (s, &n) in series.iter_mut().zip(&m.classifier_norms) {
            s.push(n);
        }
    }
    Ok(series)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("series", "need two equally long series of length >= 2"));
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (vx * vy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}
