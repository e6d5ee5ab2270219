//! Fully-connected feature extractor with bias-free per-class classifiers.
//!
//! Features are the ReLU activations of the last hidden layer; with no hidden
//! layers the extractor is the identity and the model reduces to linear
//! softmax regression on the raw inputs.

use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{l2_norm, Matrix};
use crate::rng::{rng_for, stream, Rng};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    pub input_dim: usize,
    #[serde(default)]
    pub hidden: Vec<usize>,
    pub num_classes: usize,
}

impl MlpArch {
    pub fn new(input_dim: usize, hidden: Vec<usize>, num_classes: usize) -> Result<Self> {
        let arch = Self {
            input_dim,
            hidden,
            num_classes,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn identity(input_dim: usize, num_classes: usize) -> Self {
        Self {
            input_dim,
            hidden: Vec::new(),
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes == 0 || self.hidden.contains(&0) {
            return Err(Error::invalid("arch", "all dimensions must be positive"));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.input_dim)
    }

    pub fn is_identity(&self) -> bool {
        self.hidden.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out × in`
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Parameters of the extractor (`layers`) and the classifier matrix whose
/// row `c` is `w_c`. The same shape is reused for gradients and momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub arch: MlpArch,
    pub layers: Vec<DenseLayer>,
    /// `C × m`
    pub classifier: Matrix,
}

/// Hidden pre-activations and activations kept for backprop.
pub(crate) struct ForwardCache {
    pub pre: Vec<Matrix>,
    pub act: Vec<Matrix>,
}

fn gaussian_matrix(rows: usize, cols: usize, variance: f64, rng: &mut Rng) -> Matrix {
    let normal = Normal::new(0.0, variance.sqrt()).expect("positive variance");
    let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

/// He-scaled hidden weights, zero biases, classifier rows with variance 1/m.
pub fn init_params(arch: &MlpArch, seed: u64) -> Result<MlpParams> {
    arch.validate()?;
    let mut rng = rng_for(seed, &[stream::INIT]);
    let mut layers = Vec::with_capacity(arch.hidden.len());
    let mut fan_in = arch.input_dim;
    for &width in &arch.hidden {
        layers.push(DenseLayer {
            weight: gaussian_matrix(width, fan_in, 2.0 / fan_in as f64, &mut rng),
            bias: vec![0.0; width],
        });
        fan_in = width;
    }
    let classifier = init_classifier(arch, &mut rng);
    Ok(MlpParams {
        arch: arch.clone(),
        layers,
        classifier,
    })
}

pub(crate) fn init_classifier(arch: &MlpArch, rng: &mut Rng) -> Matrix {
    let m = arch.feature_dim();
    gaussian_matrix(arch.num_classes, m, 1.0 / m as f64, rng)
}

impl MlpParams {
    pub fn zeros_like(&self) -> MlpParams {
        MlpParams {
            arch: self.arch.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weight: Matrix::zeros(l.weight.rows(), l.weight.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            classifier: Matrix::zeros(self.classifier.rows(), self.classifier.cols()),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.arch.feature_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes
    }

    /// Checks that every tensor has the shape implied by `arch`.
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.layers.len() != self.arch.hidden.len() {
            return Err(Error::Shape(format!(
                "{} layers for {} hidden widths",
                self.layers.len(),
                self.arch.hidden.len()
            )));
        }
        let mut fan_in = self.arch.input_dim;
        for (i, (layer, &width)) in self.layers.iter().zip(&self.arch.hidden).enumerate() {
            if layer.weight.rows() != width || layer.weight.cols() != fan_in || layer.bias.len() != width {
                return Err(Error::Shape(format!("layer {i} does not match the architecture")));
            }
            fan_in = width;
        }
        if self.classifier.rows() != self.arch.num_classes || self.classifier.cols() != fan_in {
            return Err(Error::Shape("classifier does not match the architecture".into()));
        }
        if !self.tensors().all(|(t, _)| t.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("parameters".into()));
        }
        Ok(())
    }

    /// Every tensor in a fixed order, tagged with its kind.
    pub fn tensors(&self) -> impl Iterator<Item = (&[f64], TensorKind)> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    (l.weight.as_slice(), TensorKind::FeatureWeight),
                    (l.bias.as_slice(), TensorKind::FeatureBias),
                ]
            })
            .chain(std::iter::once((self.classifier.as_slice(), TensorKind::Classifier)))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = (&mut [f64], TensorKind)> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    (l.weight.as_mut_slice(), TensorKind::FeatureWeight),
                    (l.bias.as_mut_slice(), TensorKind::FeatureBias),
                ]
            })
            .chain(std::iter::once((
                self.classifier.as_mut_slice(),
                TensorKind::Classifier,
            )))
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().map(|(t, _)| t.len()).sum()
    }

    pub fn forward_features(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.arch.input_dim {
            return Err(Error::Shape(format!(
                "input has {} columns, model expects {}",
                x.cols(),
                self.arch.input_dim
            )));
        }
        let mut h = x.clone();
        for layer in &self.layers {
            h = affine_relu(&h, layer)?.1;
        }
        Ok(h)
    }

    pub(crate) fn forward_cached(&self, x: &Matrix) -> Result<ForwardCache> {
        if x.cols() != self.arch.input_dim {
            return Err(Error::Shape(format!(
                "input has {} columns, model expects {}",
                x.cols(),
                self.arch.input_dim
            )));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { x } else { &act[i - 1] };
            let (p, a) = affine_relu(input, layer)?;
            if !p.is_finite() {
                return Err(Error::NonFinite(format!("hidden layer {i} pre-activation")));
            }
            pre.push(p);
            act.push(a);
        }
        Ok(ForwardCache { pre, act })
    }

    /// Row `n`, column `c`: `w_c · f_n`.
    pub fn decision_values(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.feature_dim() {
            return Err(Error::Shape(format!(
                "features have {} columns, classifier expects {}",
                features.cols(),
                self.feature_dim()
            )));
        }
        features.matmul_transposed(&self.classifier)
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        self.decision_values(&self.forward_features(x)?)
    }

    pub fn classifier_norms(&self) -> Vec<f64> {
        self.classifier.row_iter().map(l2_norm).collect()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&Checkpoint::from(self))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<MlpParams> {
        let text = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        ckpt.into_params()
    }
}

fn affine_relu(input: &Matrix, layer: &DenseLayer) -> Result<(Matrix, Matrix)> {
    let mut pre = input.matmul_transposed(&layer.weight)?;
    for r in 0..pre.rows() {
        for (v, b) in pre.row_mut(r).iter_mut().zip(&layer.bias) {
            *v += b;
        }
    }
    let mut act = pre.clone();
    for v in act.as_mut_slice() {
        if *v <= 0.0 {
            *v = 0.0;
        }
    }
    Ok((pre, act))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    FeatureWeight,
    FeatureBias,
    Classifier,
}

impl TensorKind {
    pub fn is_feature(self) -> bool {
        matches!(self, TensorKind::FeatureWeight | TensorKind::FeatureBias)
    }

    pub fn is_bias(self) -> bool {
        matches!(self, TensorKind::FeatureBias)
    }
}

/// On-disk checkpoint: architecture metadata plus row-major arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    arch: MlpArch,
    feature_dim: usize,
    layers: Vec<CheckpointLayer>,
    classifier: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointLayer {
    rows: usize,
    cols: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

const CHECKPOINT_FORMAT: &str = "cdt-mlp-checkpoint";

impl From<&MlpParams> for Checkpoint {
    fn from(p: &MlpParams) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: 1,
            arch: p.arch.clone(),
            feature_dim: p.feature_dim(),
            layers: p
                .layers
                .iter()
                .map(|l| CheckpointLayer {
                    rows: l.weight.rows(),
                    cols: l.weight.cols(),
                    weight: l.weight.as_slice().to_vec(),
                    bias: l.bias.clone(),
                })
                .collect(),
            classifier: p.classifier.as_slice().to_vec(),
        }
    }
}

impl Checkpoint {
    fn into_params(self) -> Result<MlpParams> {
        if self.format != CHECKPOINT_FORMAT || self.version != 1 {
            return Err(Error::invalid("checkpoint", "unknown format or version"));
        }
        if self.feature_dim != self.arch.feature_dim() {
            return Err(Error::Shape("checkpoint feature_dim disagrees with arch".into()));
        }
        let layers = self
            .layers
            .into_iter()
            .map(|l| {
                Ok(DenseLayer {
                    weight: Matrix::from_vec(l.rows, l.cols, l.weight)?,
                    bias: l.bias,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let classifier = Matrix::from_vec(self.arch.num_classes, self.feature_dim, self.classifier)?;
        let params = MlpParams {
            arch: self.arch,
            layers,
            classifier,
        };
        params.validate()?;
        Ok(params)
    }
}
