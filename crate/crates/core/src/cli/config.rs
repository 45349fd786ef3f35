//! Experiment configuration: a JSON document naming a dataset, a model preset
//! with overrides, the training schedule and the analysis settings.
//!
//! ```json
//! {
//!   "dataset": "mnist10k-train",
//!   "test_dataset": "mnist10k-test",
//!   "manifest": "data/manifest.json",
//!   "model": { "preset": "supervised", "init": { "gaussian": { "std": 0.01 } } },
//!   "train": { "epochs": 100, "batch_size": 32, "learning_rate": 0.5, "seed": 1,
//!              "snapshot_epochs": [0, 1, 10, 100], "stop_at_accuracy": 0.85 },
//!   "analysis": { "layers": [1, 2, 3], "thresholds": [0.5], "labels": true },
//!   "output_dir": "runs/mlp-mnist"
//! }
//! ```
//!
//! Unset fields take the defaults of [`ExperimentConfig::default`]. Relative
//! paths are taken relative to the working directory.

use super::CliError;
use crate::datasets::{LabeledDataset, Manifest, DATA_DIR_ENV};
use crate::linalg::Rng;
use crate::models::{Activation, MlpModel, MlpPreset, Model, RbmModel, TrainConfig, WeightInit};
use crate::representation::{RELU_THRESHOLD, SIGMOID_THRESHOLD};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const DEFAULT_MANIFEST: &str = "data/manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Manifest name of the training data, also analysed by `analyze`.
    pub dataset: String,
    /// Manifest name of held-out data used for test accuracy.
    pub test_dataset: Option<String>,
    pub manifest: Option<PathBuf>,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub analysis: AnalysisConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: "mnist10k".into(),
            test_dataset: None,
            manifest: None,
            model: ModelSpec::Rbm {
                n_visible: 784,
                n_hidden: 64,
            },
            train: TrainConfig::default(),
            analysis: AnalysisConfig::default(),
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// 784 → 70 → 50 → 35 → 10 classifier.
    Supervised {
        #[serde(default = "sigmoid")]
        activation: Activation,
        #[serde(default)]
        init: WeightInit,
    },
    /// 784 → 128 → 32 → 128 → 784 autoencoder.
    Autoencoder {
        #[serde(default = "sigmoid")]
        activation: Activation,
        #[serde(default)]
        init: WeightInit,
    },
    ShallowAutoencoder {
        n_visible: usize,
        n_hidden: usize,
        #[serde(default = "sigmoid")]
        activation: Activation,
        #[serde(default)]
        init: WeightInit,
    },
    Rbm {
        n_visible: usize,
        n_hidden: usize,
    },
}

fn sigmoid() -> Activation {
    Activation::Sigmoid
}

impl ModelSpec {
    fn mlp_preset(self) -> Option<(MlpPreset, Activation, WeightInit)> {
        match self {
            ModelSpec::Supervised { activation, init } => {
                Some((MlpPreset::Supervised, activation, init))
            }
            ModelSpec::Autoencoder { activation, init } => {
                Some((MlpPreset::Autoencoder, activation, init))
            }
            ModelSpec::ShallowAutoencoder {
                n_visible,
                n_hidden,
                activation,
                init,
            } => Some((
                MlpPreset::ShallowAutoencoder {
                    n_visible,
                    n_hidden,
                },
                activation,
                init,
            )),
            ModelSpec::Rbm { .. } => None,
        }
    }

    pub fn is_supervised(self) -> bool {
        matches!(self, ModelSpec::Supervised { .. })
    }

    pub fn activation(self) -> Activation {
        self.mlp_preset().map_or(Activation::Sigmoid, |(_, a, _)| a)
    }

    pub fn input_dim(self) -> usize {
        match self.mlp_preset() {
            Some((p, _, _)) => p.layer_dims()[0],
            None => match self {
                ModelSpec::Rbm { n_visible, .. } => n_visible,
                _ => unreachable!(),
            },
        }
    }

    /// Freshly initialised model drawn from `rng`.
    pub fn build(self, rng: &mut Rng) -> Result<Model, CliError> {
        match self.mlp_preset() {
            Some((preset, activation, init)) => {
                init.validate()?;
                Ok(Model::Mlp(preset.build_with(activation, init, rng)?))
            }
            None => match self {
                ModelSpec::Rbm {
                    n_visible,
                    n_hidden,
                } => {
                    if n_visible == 0 || n_hidden == 0 {
                        return Err(CliError::Config("RBM layer sizes must be positive".into()));
                    }
                    Ok(Model::Rbm(RbmModel::new(n_visible, n_hidden, rng)))
                }
                _ => unreachable!(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Hidden layers to analyse, counted from 1; 0 is the binarized input.
    pub layers: Vec<usize>,
    /// Binarization thresholds; empty means the activation's default.
    pub thresholds: Vec<f64>,
    /// Also compute label entropies and `I(Z;Y)`.
    pub labels: bool,
    /// Drop frequencies above this value before fitting.
    pub k_cutoff: Option<u64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            layers: vec![1],
            thresholds: Vec::new(),
            labels: false,
            k_cutoff: None,
        }
    }
}

/// Thresholds swept by `analyze --threshold-sweep`.
pub const THRESHOLD_SWEEP: [f64; 5] = [0.3, 0.4, 0.5, 0.6, 0.7];

pub fn default_threshold(activation: Activation) -> f64 {
    match activation {
        Activation::Sigmoid => SIGMOID_THRESHOLD,
        Activation::Relu => RELU_THRESHOLD,
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train.validate()?;
        if let Some(a) = self.train.stop_at_accuracy {
            if !(0.0..=1.0).contains(&a) {
                return Err(CliError::Config(format!(
                    "stop_at_accuracy {a} outside [0, 1]"
                )));
            }
        }
        if self.train.stop_at_accuracy.is_some() && !self.model.is_supervised() {
            return Err(CliError::Config(
                "stop_at_accuracy needs the supervised preset".into(),
            ));
        }
        if self.analysis.thresholds.iter().any(|t| !t.is_finite()) {
            return Err(CliError::Config("thresholds must be finite".into()));
        }
        Ok(())
    }

    /// Manifest path: the configured one, else `$CRITREP_DATA_DIR/manifest.json`,
    /// else `data/manifest.json`.
    pub fn manifest_path(&self) -> PathBuf {
        if let Some(p) = &self.manifest {
            return p.clone();
        }
        match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir).join("manifest.json"),
            _ => PathBuf::from(DEFAULT_MANIFEST),
        }
    }

    pub fn load_manifest(&self) -> Result<Manifest, CliError> {
        Ok(Manifest::load(&self.manifest_path())?)
    }

    pub fn load_train_data(&self) -> Result<(LabeledDataset, Option<LabeledDataset>), CliError> {
        let manifest = self.load_manifest()?;
        let train = manifest.load_dataset(&self.dataset)?;
        let test = self
            .test_dataset
            .as_deref()
            .map(|name| manifest.load_dataset(name))
            .transpose()?;
        Ok((train, test))
    }

    pub fn thresholds(&self) -> Vec<f64> {
        if self.analysis.thresholds.is_empty() {
            vec![default_threshold(self.model.activation())]
        } else {
            self.analysis.thresholds.clone()
        }
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

/// Shipped configurations, by name.
pub const PRESETS: [(&str, &str); 6] = [
    (
        "rbm-mnist",
        include_str!("../../../../configs/rbm-mnist.json"),
    ),
    (
        "mlp-mnist",
        include_str!("../../../../configs/mlp-mnist.json"),
    ),
    (
        "autoencoder-mnist",
        include_str!("../../../../configs/autoencoder-mnist.json"),
    ),
    (
        "ising-ae-low",
        include_str!("../../../../configs/ising-ae-low.json"),
    ),
    (
        "ising-ae-critical",
        include_str!("../../../../configs/ising-ae-critical.json"),
    ),
    (
        "ising-ae-high",
        include_str!("../../../../configs/ising-ae-high.json"),
    ),
];

pub fn preset(name: &str) -> Result<ExperimentConfig, CliError> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        CliError::Config(format!(
            "unknown preset {name:?}; available: {}",
            names.join(", ")
        ))
    })?;
    ExperimentConfig::from_json(text, name)
}

/// Layer dimension check shared by `analyze`.
pub fn model_input_dim(model: &Model) -> usize {
    match model {
        Model::Mlp(m) => MlpModel::input_dim(m),
        Model::Rbm(r) => r.n_visible,
    }
}
