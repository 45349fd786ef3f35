//! Two-dimensional Ising model on a square lattice, sampled with single-spin
//! Metropolis updates.

use super::{DatasetError, LabeledDataset};
use crate::linalg::{Matrix, Rng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsingPreset {
    Low,
    Critical,
    High,
}

impl IsingPreset {
    pub const ALL: [IsingPreset; 3] = [IsingPreset::Low, IsingPreset::Critical, IsingPreset::High];

    pub fn temperature(self) -> f64 {
        match self {
            IsingPreset::Low => 1.53,
            IsingPreset::Critical => 2.26,
            IsingPreset::High => 3.28,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IsingPreset::Low => "low",
            IsingPreset::Critical => "critical",
            IsingPreset::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub side: usize,
    pub coupling: f64,
    pub temperature: f64,
    pub sweeps_equilibrate: usize,
    pub sweeps_between_samples: usize,
    pub boundary: Boundary,
}

impl Default for IsingParams {
    fn default() -> Self {
        IsingParams {
            side: 10,
            coupling: 1.0,
            temperature: IsingPreset::Critical.temperature(),
            sweeps_equilibrate: 10_000,
            sweeps_between_samples: 10,
            boundary: Boundary::Periodic,
        }
    }
}

impl IsingParams {
    pub fn preset(preset: IsingPreset) -> Self {
        IsingParams {
            temperature: preset.temperature(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.side < 2 {
            return Err(DatasetError::InvalidIsing(format!(
                "side {} < 2",
                self.side
            )));
        }
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(DatasetError::InvalidIsing(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        if !self.coupling.is_finite() {
            return Err(DatasetError::InvalidIsing("coupling must be finite".into()));
        }
        Ok(())
    }
}

/// Spins in `{-1, +1}`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsingLattice {
    side: usize,
    spins: Vec<i8>,
}

impl IsingLattice {
    pub fn uniform(side: usize, spin: i8) -> Self {
        assert!(spin == 1 || spin == -1);
        IsingLattice {
            side,
            spins: vec![spin; side * side],
        }
    }

    pub fn random(side: usize, rng: &mut Rng) -> Self {
        let spins = (0..side * side)
            .map(|_| if rng.bernoulli(0.5) { 1 } else { -1 })
            .collect();
        IsingLattice { side, spins }
    }

    /// Panics if any spin is not ±1.
    pub fn from_spins(side: usize, spins: Vec<i8>) -> Self {
        assert_eq!(spins.len(), side * side);
        assert!(spins.iter().all(|&s| s == 1 || s == -1));
        IsingLattice { side, spins }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    fn neighbor_sum(&self, site: usize, boundary: Boundary) -> i32 {
        let l = self.side;
        let (r, c) = (site / l, site % l);
        let s = |rr: usize, cc: usize| self.spins[rr * l + cc] as i32;
        match boundary {
            Boundary::Periodic => {
                s((r + l - 1) % l, c)
                    + s((r + 1) % l, c)
                    + s(r, (c + l - 1) % l)
                    + s(r, (c + 1) % l)
            }
            Boundary::Free => {
                let mut h = 0;
                if r > 0 {
                    h += s(r - 1, c);
                }
                if r + 1 < l {
                    h += s(r + 1, c);
                }
                if c > 0 {
                    h += s(r, c - 1);
                }
                if c + 1 < l {
                    h += s(r, c + 1);
                }
                h
            }
        }
    }
}

/// `Σ_<ij> s_i s_j` with every bond counted once: each site contributes its
/// right and down bonds (wrapped when periodic).
pub fn bond_sum(l: &IsingLattice, boundary: Boundary) -> i64 {
    let n = l.side;
    let mut total = 0i64;
    for r in 0..n {
        for c in 0..n {
            let s = l.spins[r * n + c] as i64;
            match boundary {
                Boundary::Periodic => {
                    total += s * l.spins[r * n + (c + 1) % n] as i64;
                    total += s * l.spins[((r + 1) % n) * n + c] as i64;
                }
                Boundary::Free => {
                    if c + 1 < n {
                        total += s * l.spins[r * n + c + 1] as i64;
                    }
                    if r + 1 < n {
                        total += s * l.spins[(r + 1) * n + c] as i64;
                    }
                }
            }
        }
    }
    total
}

/// `E = -J Σ_<ij> s_i s_j`.
pub fn ising_energy(l: &IsingLattice, p: &IsingParams) -> f64 {
    assert_eq!(l.side, p.side, "lattice side does not match parameters");
    -p.coupling * bond_sum(l, p.boundary) as f64
}

pub fn magnetization(l: &IsingLattice) -> f64 {
    l.spins.iter().map(|&s| s as f64).sum::<f64>() / l.spins.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepStats {
    pub accepted: usize,
    /// Change of `bond_sum` over the sweep.
    pub delta_bonds: i64,
}

/// Acceptance probabilities indexed by `s_i * h_i + 4`.
fn acceptance_table(p: &IsingParams) -> [f64; 9] {
    let mut table = [1.0; 9];
    for (i, slot) in table.iter_mut().enumerate() {
        let sh = i as f64 - 4.0;
        let delta_e = 2.0 * p.coupling * sh;
        if delta_e > 0.0 {
            *slot = (-delta_e / p.temperature).exp();
        }
    }
    table
}

/// One sweep of `side²` single-spin-flip proposals at uniformly random sites.
/// Energy-lowering (or neutral) flips are accepted without consuming a draw;
/// otherwise one uniform is drawn and compared with `exp(-ΔE/T)`.
pub fn metropolis_sweep(l: &mut IsingLattice, p: &IsingParams, rng: &mut Rng) -> SweepStats {
    let table = acceptance_table(p);
    sweep_with_table(l, p, &table, rng)
}

fn sweep_with_table(
    l: &mut IsingLattice,
    p: &IsingParams,
    table: &[f64; 9],
    rng: &mut Rng,
) -> SweepStats {
    let n = (l.side * l.side) as u64;
    let mut stats = SweepStats::default();
    for _ in 0..n {
        let site = rng.below(n) as usize;
        let s = l.spins[site] as i32;
        let sh = s * l.neighbor_sum(site, p.boundary);
        let delta_e = 2.0 * p.coupling * sh as f64;
        let accept = delta_e <= 0.0 || rng.uniform() < table[(sh + 4) as usize];
        if accept {
            l.spins[site] = -l.spins[site];
            stats.accepted += 1;
            stats.delta_bonds -= 2 * sh as i64;
        }
    }
    stats
}

fn run_chain(p: &IsingParams, n_samples: usize, rng: &mut Rng) -> Vec<f64> {
    let table = acceptance_table(p);
    let mut lattice = IsingLattice::random(p.side, rng);
    for _ in 0..p.sweeps_equilibrate {
        sweep_with_table(&mut lattice, p, &table, rng);
    }
    let mut pixels = Vec::with_capacity(n_samples * p.side * p.side);
    for i in 0..n_samples {
        if i > 0 {
            for _ in 0..p.sweeps_between_samples {
                sweep_with_table(&mut lattice, p, &table, rng);
            }
        }
        pixels.extend(lattice.spins.iter().map(|&s| if s > 0 { 1.0 } else { 0.0 }));
    }
    pixels
}

/// Equilibrium samples from a single chain started at a random configuration.
/// Spins are mapped `-1 → 0`, `+1 → 1`; the first sample is taken right after
/// equilibration and subsequent ones every `sweeps_between_samples` sweeps.
pub fn generate_ising_dataset(
    p: &IsingParams,
    n_samples: usize,
    rng: &mut Rng,
) -> Result<LabeledDataset, DatasetError> {
    p.validate()?;
    if n_samples == 0 {
        return Err(DatasetError::InvalidIsing(
            "n_samples must be at least 1".into(),
        ));
    }
    let pixels = run_chain(p, n_samples, rng);
    Ok(ising_dataset(p, n_samples, pixels))
}

/// Like [`generate_ising_dataset`] but with `n_chains` independent chains on
/// jumped RNG streams. Chain `c` contributes a contiguous block; the first
/// `n_samples % n_chains` chains take one extra sample. Output does not depend
/// on the number of worker threads.
pub fn generate_ising_dataset_chains(
    p: &IsingParams,
    n_samples: usize,
    n_chains: usize,
    rng: &Rng,
) -> Result<LabeledDataset, DatasetError> {
    p.validate()?;
    if n_samples == 0 || n_chains == 0 {
        return Err(DatasetError::InvalidIsing(
            "n_samples and n_chains must be at least 1".into(),
        ));
    }
    let streams = rng.split(n_chains);
    let blocks: Vec<Vec<f64>> = streams
        .into_par_iter()
        .enumerate()
        .map(|(c, mut r)| {
            let share = n_samples / n_chains + usize::from(c < n_samples % n_chains);
            run_chain(p, share, &mut r)
        })
        .collect();
    Ok(ising_dataset(p, n_samples, blocks.concat()))
}

fn ising_dataset(p: &IsingParams, n_samples: usize, pixels: Vec<f64>) -> LabeledDataset {
    let samples = Matrix::from_vec(n_samples, p.side * p.side, pixels).expect("chain output size");
    LabeledDataset {
        samples,
        labels: None,
        n_classes: None,
        image_shape: Some((p.side, p.side)),
    }
}
