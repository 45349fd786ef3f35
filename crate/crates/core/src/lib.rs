//! Frequency statistics of binarized internal representations of small neural
//! networks, with the supporting models, datasets, power-law fitting and a
//! numerical check of the max-entropy cluster-size law `m(k) ∝ k^(-β-1)`.

pub mod baselines;
pub mod cli;
pub mod datasets;
pub mod infostats;
pub mod linalg;
pub mod maxent;
pub mod models;
pub mod representation;
