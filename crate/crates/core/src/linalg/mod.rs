//! Dense row-major matrices, activation functions and the in-repo RNG.

mod matrix;
mod rng;

pub use matrix::{relu, sigmoid, sigmoid_scalar, softmax_rows, Matrix};
pub use rng::Rng;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {op} of {lhs:?} and {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("data length {len} does not match shape {rows}x{cols}")]
    BadShape {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("non-finite entry produced by {0}")]
    NonFinite(&'static str),
}
