//! Entropies of code and frequency distributions, mutual information with
//! labels, and power-law fits of degeneracy spectra. All values in nats.

mod entropy;
mod powerlaw;
mod regression;

pub use entropy::{
    entropies_with_labels, relevance, relevance_from_histogram, resolution,
    resolution_from_histogram, summarize, InfoSummary,
};
pub use powerlaw::{
    fit_power_law, fit_power_law_from, power_sums, PowerLawFit, GATE_MIN_DECADES, GATE_MIN_R2,
};
pub use regression::{linear_fit, LinearFit};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error("empty spectrum")]
    Empty,
    #[error("histogram carries no label counts")]
    NoLabels,
    #[error("all frequencies are equal; no tail to fit")]
    Degenerate,
    #[error("too few points for a fit: {0}")]
    TooFewPoints(String),
    #[error("exponent equation has no root in [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
}
