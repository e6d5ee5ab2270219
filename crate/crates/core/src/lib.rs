//! Class-imbalanced classification at desk scale.
//!
//! A small fully-connected network with bias-free linear classifiers is trained
//! by hand-derived backpropagation under one of several objectives:
//! plain cross-entropy (ERM), class-dependent temperatures (CDT), or
//! class re-weighting, with uniform or class-balanced mini-batches. The
//! diagnostics module measures the train/test feature deviation, classifier
//! norms and decision-value matrices that explain why minor classes are
//! over-fitted.

pub mod datagen;
pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod objectives;
pub mod rng;
pub mod trainer;

pub use dataset::LabeledDataset;
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{MlpArch, MlpParams};
pub use objectives::{LossSpec, Objective, Sampling};
pub use trainer::{EpochMetrics, TrainConfig, TrainOutcome};
