//! Binarized hidden states, their exact frequencies `k_z`, and the degeneracy
//! spectrum `m(k) = #{z : k_z = k}`.

mod code;
mod histogram;
mod spectrum;

pub use code::{binarize, BinaryCode};
pub use histogram::{count_codes, count_codes_sharded, CodeHistogram};
pub use spectrum::{
    degeneracy, log_bin, log_bin_points, read_spectrum_csv, BinnedPoint, DegeneracySpectrum,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RepresentationError {
    #[error("{codes} codes but {labels} labels")]
    LengthMismatch { codes: usize, labels: usize },
    #[error("codes have differing widths ({0} vs {1})")]
    WidthMismatch(usize, usize),
    #[error("spectrum CSV: {0}")]
    Csv(String),
}

/// Default threshold for sigmoid activations.
pub const SIGMOID_THRESHOLD: f64 = 0.5;
/// Threshold used for the Ising autoencoder codes.
pub const ISING_THRESHOLD: f64 = 0.4;
/// Threshold for ReLU activations: active versus silent.
pub const RELU_THRESHOLD: f64 = 0.0;
