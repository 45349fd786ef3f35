//! The three model families: MLP classifier, autoencoder (an MLP with a
//! reconstruction head) and binary RBM trained by contrastive divergence.

mod checkpoint;
mod mlp;
mod rbm;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, Model, CHECKPOINT_VERSION};
pub use mlp::{
    mlp_forward, mlp_train_autoencoder, mlp_train_supervised, Gradients, MlpModel, MlpPreset,
};
pub use rbm::{rbm_sample_hidden, rbm_train_cd, RbmModel};

use crate::linalg::LinalgError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("label {label} out of range for {classes} output classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("input has {got} features, model expects {expected}")]
    InputWidth { got: usize, expected: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputHead {
    /// Softmax outputs trained with cross-entropy against one-hot labels.
    SoftmaxClassifier,
    /// Sigmoid outputs trained with squared error against the input.
    Reconstruction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Gibbs alternations per contrastive-divergence update (RBM only).
    pub cd_steps: usize,
    /// Epochs after which the model is snapshotted; 0 means before training.
    pub snapshot_epochs: Vec<usize>,
    /// Supervised training stops once this accuracy is reached.
    pub stop_at_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.1,
            seed: 0,
            cd_steps: 1,
            snapshot_epochs: Vec::new(),
            stop_at_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(ModelError::InvalidConfig(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidConfig(
                "batch_size must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn wants_snapshot(&self, epoch: usize) -> bool {
        self.snapshot_epochs.contains(&epoch)
    }
}

/// Distribution of the initial MLP weights; biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightInit {
    #[default]
    XavierUniform,
    Gaussian {
        std: f64,
    },
}

impl WeightInit {
    pub fn validate(self) -> Result<(), ModelError> {
        match self {
            WeightInit::Gaussian { std } if !(std.is_finite() && std >= 0.0) => {
                Err(ModelError::InvalidConfig(format!(
                    "init std {std} must be finite and non-negative"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Metrics recorded before training (epoch 0) and after every epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean minibatch objective over the epoch (NaN for epoch 0).
    pub train_loss: f64,
    /// Full-pass evaluation after the epoch: accuracy for classifiers,
    /// per-element squared reconstruction error otherwise.
    pub train_metric: f64,
    pub test_metric: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub metrics: Vec<EpochMetrics>,
    pub snapshots: Vec<(usize, M)>,
}
