//! Library-level pipeline stages behind the subcommands: training any model
//! kind, extracting layer activations and analysing one binarized layer.

use super::config::ExperimentConfig;
use super::CliError;
use crate::datasets::LabeledDataset;
use crate::infostats::{entropies_with_labels, fit_power_law, summarize, InfoSummary, PowerLawFit};
use crate::linalg::{Matrix, Rng};
use crate::models::{
    mlp_train_autoencoder, mlp_train_supervised, rbm_train_cd, EpochMetrics, Model, OutputHead,
};
use crate::representation::{
    binarize, count_codes, degeneracy, log_bin, BinnedPoint, DegeneracySpectrum,
};
use serde::{Deserialize, Serialize};

/// Log-binning base for the exported binned spectra.
pub const BIN_BASE: f64 = 2.0;

pub struct Trained {
    pub model: Model,
    pub metrics: Vec<EpochMetrics>,
    pub snapshots: Vec<(usize, Model)>,
}

impl Trained {
    pub fn last_epoch(&self) -> usize {
        self.metrics.last().map_or(0, |m| m.epoch)
    }
}

/// Builds the configured model from `Rng::new(seed)` and trains it.
pub fn train(
    cfg: &ExperimentConfig,
    data: &LabeledDataset,
    test: Option<&LabeledDataset>,
) -> Result<Trained, CliError> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.train.seed);
    match cfg.model.build(&mut rng)? {
        Model::Rbm(r) => {
            let out = rbm_train_cd(r, data, &cfg.train, &mut rng)?;
            Ok(Trained {
                model: Model::Rbm(out.model),
                metrics: out.metrics,
                snapshots: out
                    .snapshots
                    .into_iter()
                    .map(|(e, m)| (e, Model::Rbm(m)))
                    .collect(),
            })
        }
        Model::Mlp(m) => {
            let out = match m.output_head {
                OutputHead::SoftmaxClassifier => mlp_train_supervised(m, data, test, &cfg.train)?,
                OutputHead::Reconstruction => mlp_train_autoencoder(m, data, &cfg.train)?,
            };
            Ok(Trained {
                model: Model::Mlp(out.model),
                metrics: out.metrics,
                snapshots: out
                    .snapshots
                    .into_iter()
                    .map(|(e, m)| (e, Model::Mlp(m)))
                    .collect(),
            })
        }
    }
}

pub fn hidden_layer_count(model: &Model) -> usize {
    match model {
        Model::Mlp(m) => m.n_hidden_layers(),
        Model::Rbm(_) => 1,
    }
}

/// Activations of `layer` for every row of `x`; layer 0 is `x` itself. RBM
/// layer 1 is `p(z = 1 | x)`.
pub fn layer_activations(model: &Model, x: &Matrix, layer: usize) -> Result<Matrix, CliError> {
    let n = hidden_layer_count(model);
    if layer > n {
        return Err(CliError::Config(format!(
            "layer {layer} out of range: model has {n} hidden layers"
        )));
    }
    if layer == 0 {
        return Ok(x.clone());
    }
    Ok(match model {
        Model::Mlp(m) => m.hidden_activations(x, layer)?,
        Model::Rbm(r) => r.hidden_probabilities(x)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: usize,
    pub threshold: f64,
    pub summary: InfoSummary,
    /// Coefficient of variation of the code frequencies.
    pub size_cv: f64,
    pub fit: Option<PowerLawFit>,
    pub fit_error: Option<String>,
    /// Whether the fit passes the decades and R² gate.
    pub power_law: bool,
}

pub struct LayerAnalysis {
    pub report: LayerReport,
    pub spectrum: DegeneracySpectrum,
    pub binned: Vec<BinnedPoint>,
}

/// Binarizes `acts` at `threshold`, counts codes and fits the spectrum. A
/// failed fit is recorded in the report rather than returned as an error.
pub fn analyze_activations(
    acts: &Matrix,
    layer: usize,
    threshold: f64,
    labels: Option<&[usize]>,
    k_cutoff: Option<u64>,
) -> Result<LayerAnalysis, CliError> {
    let codes = binarize(acts, threshold);
    let hist = count_codes(&codes, labels)?;
    let spectrum = degeneracy(&hist);
    let summary = if labels.is_some() {
        entropies_with_labels(&hist)?
    } else {
        summarize(&spectrum)?
    };
    let fitted = match k_cutoff {
        Some(k) => fit_power_law(&spectrum.with_k_cutoff(k)),
        None => fit_power_law(&spectrum),
    };
    let (fit, fit_error) = match fitted {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let power_law = fit.as_ref().is_some_and(PowerLawFit::is_plausible);
    let binned = log_bin(&spectrum, BIN_BASE);
    Ok(LayerAnalysis {
        report: LayerReport {
            layer,
            threshold,
            size_cv: spectrum.size_cv(),
            summary,
            fit,
            fit_error,
            power_law,
        },
        spectrum,
        binned,
    })
}

/// One analysis per `(layer, threshold)` pair, layers outermost.
pub fn analyze_model(
    model: &Model,
    data: &LabeledDataset,
    layers: &[usize],
    thresholds: &[f64],
    with_labels: bool,
    k_cutoff: Option<u64>,
) -> Result<Vec<LayerAnalysis>, CliError> {
    let labels = if with_labels {
        Some(data.labels.as_deref().ok_or_else(|| {
            CliError::Config("label analysis requested but the dataset has no labels".into())
        })?)
    } else {
        None
    };
    let mut out = Vec::new();
    for &layer in layers {
        let acts = layer_activations(model, &data.samples, layer)?;
        for &t in thresholds {
            out.push(analyze_activations(&acts, layer, t, labels, k_cutoff)?);
        }
    }
    Ok(out)
}
