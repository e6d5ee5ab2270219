//! Imbalanced dataset construction.
//!
//! Class indices are ordered so that smaller indices hold more training
//! instances. Profiles are built from `(C, N_max, ρ)` and applied to a balanced
//! pool by uniform sub-sampling.

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{rng_for, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImbalanceKind {
    LongTailed,
    Step,
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceProfile {
    pub kind: ImbalanceKind,
    pub ratio: f64,
    pub counts: Vec<usize>,
}

impl ImbalanceProfile {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn n_max(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn n_min(&self) -> usize {
        self.counts.iter().copied().min().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

fn check_profile_args(num_classes: usize, n_max: usize, ratio: f64) -> Result<()> {
    if num_classes < 2 {
        return Err(Error::invalid("num_classes", "at least two classes required"));
    }
    if !ratio.is_finite() || ratio < 1.0 {
        return Err(Error::invalid("ratio", format!("must be finite and >= 1, got {ratio}")));
    }
    if n_max == 0 || (n_max as f64 / ratio).floor() < 1.0 {
        return Err(Error::invalid(
            "n_max",
            format!("N_max = {n_max} with ratio {ratio} leaves the smallest class empty"),
        ));
    }
    Ok(())
}

/// Exponentially decaying counts: `floor(N_max / ρ^(c/(C-1)))`.
pub fn make_longtail_counts(num_classes: usize, n_max: usize, ratio: f64) -> Result<ImbalanceProfile> {
    check_profile_args(num_classes, n_max, ratio)?;
    let last = (num_classes - 1) as f64;
    // Dividing by ρ^t keeps the last class at exactly floor(N_max / ρ).
    let counts = (0..num_classes)
        .map(|c| (n_max as f64 / ratio.powf(c as f64 / last)).floor() as usize)
        .collect();
    Ok(ImbalanceProfile {
        kind: ImbalanceKind::LongTailed,
        ratio,
        counts,
    })
}

/// The first `ceil(C/2)` classes keep `N_max`; the rest get `floor(N_max / ρ)`.
pub fn make_step_counts(num_classes: usize, n_max: usize, ratio: f64) -> Result<ImbalanceProfile> {
    check_profile_args(num_classes, n_max, ratio)?;
    let major = num_classes.div_ceil(2);
    let minor = (n_max as f64 / ratio).floor() as usize;
    let counts = (0..num_classes)
        .map(|c| if c < major { n_max } else { minor })
        .collect();
    Ok(ImbalanceProfile {
        kind: ImbalanceKind::Step,
        ratio,
        counts,
    })
}

/// Every class gets `floor(total / C)`, keeping the overall size (up to rounding).
pub fn balanced_counterpart(profile: &ImbalanceProfile) -> Result<ImbalanceProfile> {
    let c = profile.num_classes();
    let total = profile.total();
    if c == 0 || total < c {
        return Err(Error::invalid(
            "profile",
            format!("total {total} cannot give every one of {c} classes an instance"),
        ));
    }
    Ok(ImbalanceProfile {
        kind: ImbalanceKind::Balanced,
        ratio: 1.0,
        counts: vec![total / c; c],
    })
}

/// Draws `profile.counts[c]` instances of each class uniformly without
/// replacement. Kept instances stay in their original relative order.
pub fn subsample_to_profile(data: &LabeledDataset, profile: &ImbalanceProfile, seed: u64) -> Result<LabeledDataset> {
    if profile.num_classes() != data.num_classes() {
        return Err(Error::Shape(format!(
            "profile has {} classes, dataset has {}",
            profile.num_classes(),
            data.num_classes()
        )));
    }
    let groups = data.class_indices();
    let mut keep = Vec::with_capacity(profile.total());
    for (c, (group, &want)) in groups.iter().zip(&profile.counts).enumerate() {
        if group.len() < want {
            return Err(Error::InsufficientInstances {
                class: c,
                needed: want,
                available: group.len(),
            });
        }
        let mut rng = rng_for(seed, &[stream::SUBSAMPLE, c as u64]);
        keep.extend(index::sample(&mut rng, group.len(), want).into_iter().map(|k| group[k]));
    }
    keep.sort_unstable();
    Ok(data.subset(&keep))
}

/// Isotropic Gaussian classes; `test_shift[c]` is added to class-c test
/// instances only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub means: Vec<Vec<f64>>,
    /// Variance of every coordinate (covariance = cov_scale · I).
    pub cov_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_shift: Option<Vec<Vec<f64>>>,
}

impl GaussianMixtureSpec {
    /// Class means drawn from N(0, separation² I).
    pub fn random(num_classes: usize, dim: usize, separation: f64, cov_scale: f64, seed: u64) -> Result<Self> {
        if separation.is_nan() || separation <= 0.0 {
            return Err(Error::invalid("separation", "must be positive"));
        }
        let mut rng = rng_for(seed, &[stream::GMM_MEANS]);
        let means = (0..num_classes)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        separation * z
                    })
                    .collect()
            })
            .collect();
        let spec = Self {
            means,
            cov_scale,
            test_shift: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.means.is_empty() || d == 0 {
            return Err(Error::invalid("means", "need at least one class of positive dimension"));
        }
        if self
            .means
            .iter()
            .any(|m| m.len() != d || m.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::invalid("means", "all means must be finite with equal dimension"));
        }
        for i in 0..self.means.len() {
            for j in 0..i {
                if self.means[i] == self.means[j] {
                    return Err(Error::invalid("means", format!("classes {j} and {i} share a mean")));
                }
            }
        }
        if !self.cov_scale.is_finite() || self.cov_scale <= 0.0 {
            return Err(Error::invalid("cov_scale", "must be finite and positive"));
        }
        if let Some(shift) = &self.test_shift {
            if shift.len() != self.means.len() || shift.iter().any(|s| s.len() != d || s.iter().any(|v| !v.is_finite()))
            {
                return Err(Error::invalid("test_shift", "one finite d-vector per class required"));
            }
        }
        Ok(())
    }
}

/// Draws `(train, test)` sets with instances grouped by class.
pub fn gen_gaussian_mixture(
    spec: &GaussianMixtureSpec,
    n_train_per_class: usize,
    n_test_per_class: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let train = draw_mixture(spec, n_train_per_class, None, seed, stream::GMM_TRAIN)?;
    let test = draw_mixture(
        spec,
        n_test_per_class,
        spec.test_shift.as_deref(),
        seed,
        stream::GMM_TEST,
    )?;
    Ok((train, test))
}

fn draw_mixture(
    spec: &GaussianMixtureSpec,
    per_class: usize,
    shift: Option<&[Vec<f64>]>,
    seed: u64,
    tag: u64,
) -> Result<LabeledDataset> {
    let c = spec.num_classes();
    let d = spec.dim();
    let std = spec.cov_scale.sqrt();
    let mut data = Vec::with_capacity(c * per_class * d);
    let mut labels = Vec::with_capacity(c * per_class);
    for (class, mean) in spec.means.iter().enumerate() {
        let mut rng = rng_for(seed, &[tag, class as u64]);
        for _ in 0..per_class {
            for (j, &mu) in mean.iter().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                let offset = shift.map_or(0.0, |s| s[class][j]);
                data.push(mu + std * z + offset);
            }
            labels.push(class);
        }
    }
    LabeledDataset::new(Matrix::from_vec(labels.len(), d, data)?, labels, c)
}

/// Result of [`holdout_split`].
#[derive(Debug, Clone)]
pub struct HoldoutSplit {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    /// `class_map[old] = Some(new)` for surviving classes.
    pub class_map: Vec<Option<usize>>,
}

/// Holds out `K` instances of every class for validation. Classes with fewer
/// than `K` instances are removed and the survivors are re-indexed densely in
/// their original order.
pub fn holdout_split(data: &LabeledDataset, k: usize, seed: u64) -> Result<HoldoutSplit> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    let groups = data.class_indices();
    let mut class_map = vec![None; data.num_classes()];
    let mut next = 0;
    for (c, g) in groups.iter().enumerate() {
        if g.len() >= k {
            class_map[c] = Some(next);
            next += 1;
        }
    }
    if next == 0 {
        return Err(Error::invalid("k", format!("no class has at least {k} instances")));
    }
    let mut val_idx = Vec::new();
    let mut train_idx = Vec::new();
    for (c, g) in groups.iter().enumerate() {
        if class_map[c].is_none() {
            continue;
        }
        let mut rng = rng_for(seed, &[stream::HOLDOUT, c as u64]);
        let mut held = vec![false; g.len()];
        for pos in index::sample(&mut rng, g.len(), k) {
            held[pos] = true;
        }
        for (pos, &i) in g.iter().enumerate() {
            if held[pos] {
                val_idx.push(i);
            } else {
                train_idx.push(i);
            }
        }
    }
    val_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok(HoldoutSplit {
        train: data.subset(&train_idx).remap_classes(&class_map, next)?,
        validation: data.subset(&val_idx).remap_classes(&class_map, next)?,
        class_map,
    })
}
