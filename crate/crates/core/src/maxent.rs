//! Numerical solution of the resolution–relevance trade-off on a discrete
//! frequency support `k = 1..=K_max`.
//!
//! Distributions are stored as `p(k) = k m(k)/M`, the probability that a
//! randomly drawn sample sits in a cluster of size `k`. In these variables
//! `H(Z) = −Σ p(k) ln(k/M)` and `H(K) = −Σ p(k) ln p(k)`, and the objective
//! `ℒ = H(K) + β (H(Z) − R)` is stationary at `p(k) ∝ k^(−β)`, i.e.
//! `m(k) ∝ k^(−β−1)`. Normalisation is enforced by renormalising, so the
//! multiplier on `Σ p = 1` never appears explicitly.
//!
//! The supervised objective that adds `I(Z;Y)` has the same `m(k)` variation
//! as `ℒ` once codes are label-pure, so [`solve_fixed_beta`] serves for both.

use crate::infostats::{linear_fit, InfoError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaxEntError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("iterative solver did not converge in {0} iterations")]
    NotConverged(usize),
    #[error("resolution {r} outside the attainable range ({lo}, {hi})")]
    Unattainable { r: f64, lo: f64, hi: f64 },
    #[error("resolution {r} is an endpoint of the attainable range; β is ±∞ there")]
    Boundary { r: f64 },
    #[error("p(k) is not positive at k = {0}")]
    NonPositive(usize),
    #[error(transparent)]
    Fit(#[from] InfoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Beta(f64),
    Resolution(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxEntProblem {
    pub k_max: usize,
    /// Total mass `M`.
    pub m: f64,
    pub constraint: Constraint,
}

impl MaxEntProblem {
    pub fn with_beta(k_max: usize, m: f64, beta: f64) -> Self {
        MaxEntProblem {
            k_max,
            m,
            constraint: Constraint::Beta(beta),
        }
    }

    pub fn with_resolution(k_max: usize, m: f64, r: f64) -> Self {
        MaxEntProblem {
            k_max,
            m,
            constraint: Constraint::Resolution(r),
        }
    }

    pub fn validate(&self) -> Result<(), MaxEntError> {
        if self.k_max < 2 {
            return Err(MaxEntError::InvalidProblem(format!(
                "K_max = {} < 2",
                self.k_max
            )));
        }
        if !(self.m.is_finite() && self.m >= self.k_max as f64) {
            return Err(MaxEntError::InvalidProblem(format!(
                "M = {} must be finite and ≥ K_max",
                self.m
            )));
        }
        match self.constraint {
            Constraint::Beta(b) if !b.is_finite() => {
                Err(MaxEntError::InvalidProblem("β not finite".into()))
            }
            Constraint::Resolution(r) if !(r > 0.0 && r < self.m.ln()) => Err(
                MaxEntError::InvalidProblem(format!("R = {r} not in (0, ln M)")),
            ),
            _ => Ok(()),
        }
    }

    /// Open interval of `H(Z)` reachable on the support: `(ln(M/K_max), ln M)`.
    pub fn resolution_range(&self) -> (f64, f64) {
        (self.m.ln() - (self.k_max as f64).ln(), self.m.ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Mirror-ascent step size in `(0, 1]`.
    pub step: f64,
    /// Stop once the largest change of `ln p` falls below this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            step: 0.5,
            tol: 1e-14,
            max_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntSolution {
    pub beta: f64,
    pub m: f64,
    /// `p(k)` from `p ∝ k^(−β)`, index `k − 1`.
    pub closed_form: Vec<f64>,
    /// `p(k)` from mirror ascent on ℒ started at the uniform distribution.
    pub iterative: Vec<f64>,
    pub iterations: usize,
}

impl MaxEntSolution {
    pub fn linf_gap(&self) -> f64 {
        self.closed_form
            .iter()
            .zip(&self.iterative)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `m(k) = M p(k)/k` of the closed-form solution.
    pub fn degeneracy(&self) -> Vec<f64> {
        degeneracy_of(&self.closed_form, self.m)
    }
}

pub fn degeneracy_of(p: &[f64], m: f64) -> Vec<f64> {
    p.iter()
        .enumerate()
        .map(|(i, &pk)| m * pk / (i + 1) as f64)
        .collect()
}

fn ln_k_over_m(k_max: usize, m: f64) -> impl Iterator<Item = f64> {
    let ln_m = m.ln();
    (1..=k_max).map(move |k| (k as f64).ln() - ln_m)
}

/// Softmax of log-weights.
fn normalize_log(logw: &[f64]) -> Vec<f64> {
    let mx = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - mx).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn closed_form(k_max: usize, beta: f64) -> Vec<f64> {
    let logw: Vec<f64> = (1..=k_max).map(|k| -beta * (k as f64).ln()).collect();
    normalize_log(&logw)
}

/// Entropic mirror ascent on ℒ:
/// `ln p ← (1−η) ln p − η β ln(k/M) + const`, renormalised every step.
pub fn mirror_ascent(
    k_max: usize,
    m: f64,
    beta: f64,
    opts: SolverOptions,
) -> Result<(Vec<f64>, usize), MaxEntError> {
    let target: Vec<f64> = ln_k_over_m(k_max, m).map(|l| -beta * l).collect();
    let mut logp = vec![-(k_max as f64).ln(); k_max];
    for it in 1..=opts.max_iters {
        let next: Vec<f64> = logp
            .iter()
            .zip(&target)
            .map(|(lp, t)| (1.0 - opts.step) * lp + opts.step * t)
            .collect();
        let p = normalize_log(&next);
        let next: Vec<f64> = p.iter().map(|x| x.ln()).collect();
        let change = next
            .iter()
            .zip(&logp)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        logp = next;
        if change < opts.tol {
            return Ok((p, it));
        }
    }
    Err(MaxEntError::NotConverged(opts.max_iters))
}

pub fn solve_fixed_beta(problem: &MaxEntProblem) -> Result<MaxEntSolution, MaxEntError> {
    solve_fixed_beta_with(problem, SolverOptions::default())
}

pub fn solve_fixed_beta_with(
    problem: &MaxEntProblem,
    opts: SolverOptions,
) -> Result<MaxEntSolution, MaxEntError> {
    problem.validate()?;
    let Constraint::Beta(beta) = problem.constraint else {
        return Err(MaxEntError::InvalidProblem(
            "expected a fixed-β problem".into(),
        ));
    };
    let (iterative, iterations) = mirror_ascent(problem.k_max, problem.m, beta, opts)?;
    Ok(MaxEntSolution {
        beta,
        m: problem.m,
        closed_form: closed_form(problem.k_max, beta),
        iterative,
        iterations,
    })
}

/// `H(Z) = −Σ p(k) ln(k/M)`.
pub fn resolution_of(p: &[f64], m: f64) -> f64 {
    -p.iter()
        .zip(ln_k_over_m(p.len(), m))
        .map(|(pk, l)| pk * l)
        .sum::<f64>()
}

/// `H(K) = −Σ p(k) ln p(k)`.
pub fn relevance_of(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
}

/// `ℒ = H(K) + β (H(Z) − R)`.
pub fn lagrangian(p: &[f64], beta: f64, m: f64, r: f64) -> f64 {
    relevance_of(p) + beta * (resolution_of(p, m) - r)
}

/// Finds β whose stationary distribution has `H(Z) = R` to within `1e−9`
/// nats by bisection; `H(Z)` increases with β.
pub fn solve_fixed_resolution(problem: &MaxEntProblem) -> Result<(f64, Vec<f64>), MaxEntError> {
    let Constraint::Resolution(r) = problem.constraint else {
        return Err(MaxEntError::InvalidProblem(
            "expected a fixed-R problem".into(),
        ));
    };
    let (lo_r, hi_r) = problem.resolution_range();
    if (r - lo_r).abs() <= 1e-12 || (r - hi_r).abs() <= 1e-12 {
        return Err(MaxEntError::Boundary { r });
    }
    if !(r > lo_r && r < hi_r) {
        return Err(MaxEntError::Unattainable {
            r,
            lo: lo_r,
            hi: hi_r,
        });
    }
    problem.validate()?;
    let h = |beta: f64| resolution_of(&closed_form(problem.k_max, beta), problem.m);
    let (mut lo, mut hi) = (-20.0, 20.0);
    while h(lo) > r {
        lo *= 2.0;
        if lo < -1e6 {
            return Err(MaxEntError::Boundary { r });
        }
    }
    while h(hi) < r {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(MaxEntError::Boundary { r });
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        let hm = h(mid);
        if (hm - r).abs() < 1e-12 {
            lo = mid;
            hi = mid;
            break;
        }
        if hm < r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    let beta = 0.5 * (lo + hi);
    Ok((beta, closed_form(problem.k_max, beta)))
}

/// Thermodynamic reading of a distribution: `U = H(Z)`, `S = H(K)`,
/// `β = −1/T` and `F = U − T S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoView {
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "T_eff")]
    pub t_eff: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

/// At `β = 0` the temperature is infinite; `F` is then reported as `−∞`, or
/// `0` when `S = 0`.
pub fn thermo_view(p: &[f64], beta: f64, m: f64) -> ThermoView {
    let u = resolution_of(p, m);
    let s = relevance_of(p);
    let t_eff = -1.0 / beta;
    let f = if beta == 0.0 {
        if s > 0.0 {
            -t_eff.abs()
        } else {
            0.0
        }
    } else {
        u - t_eff * s
    };
    if beta != 0.0 {
        // F = ℒ/β + R for any R
        let l = lagrangian(p, beta, m, 0.0);
        debug_assert!((f - l / beta).abs() <= 1e-9 * (1.0 + f.abs()));
    }
    ThermoView { u, s, t_eff, f }
}

/// Spread `max − min` over k of `ln p(k) + β ln(k/M)`; zero exactly at a
/// stationary point of ℒ.
pub fn verify_stationarity(p: &[f64], beta: f64, m: f64) -> Result<f64, MaxEntError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, (pk, l)) in p.iter().zip(ln_k_over_m(p.len(), m)).enumerate() {
        if pk.is_nan() || *pk <= 0.0 {
            return Err(MaxEntError::NonPositive(i + 1));
        }
        let v = pk.ln() + beta * l;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(hi - lo)
}

/// Least-squares slope of `ln m(k)` against `ln k` over the whole support.
pub fn loglog_slope(m_of_k: &[f64]) -> Result<f64, MaxEntError> {
    let xs: Vec<f64> = (1..=m_of_k.len()).map(|k| (k as f64).ln()).collect();
    let ys: Vec<f64> = m_of_k.iter().map(|x| x.ln()).collect();
    Ok(linear_fit(&xs, &ys)?.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    fn perturbed(p: &[f64], rng: &mut Rng, scale: f64) -> Vec<f64> {
        let w: Vec<f64> = p.iter().map(|x| x * (scale * rng.normal()).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    #[test]
    fn beta_zero_is_uniform() {
        let s = solve_fixed_beta(&MaxEntProblem::with_beta(50, 1e4, 0.0)).unwrap();
        assert!(s.closed_form.iter().all(|&x| (x - 0.02).abs() < 1e-15));
        assert!(s.linf_gap() < 1e-12);
        assert!((loglog_slope(&s.degeneracy()).unwrap() + 1.0).abs() < 1e-10);
    }

    #[test]
    fn closed_form_and_ascent_agree() {
        for &k_max in &[100usize, 1000] {
            for &beta in &[0.25, 0.5, 1.0, 2.0, 4.0] {
                let s = solve_fixed_beta(&MaxEntProblem::with_beta(k_max, 1e6, beta)).unwrap();
                assert!(s.linf_gap() < 1e-6, "β={beta} K={k_max}");
                assert!(verify_stationarity(&s.closed_form, beta, 1e6).unwrap() < 1e-10);
                let slope = loglog_slope(&s.degeneracy()).unwrap();
                assert!((slope + beta + 1.0).abs() < 0.01, "slope {slope}");
            }
        }
    }

    #[test]
    fn large_beta_concentrates_on_one() {
        let s = solve_fixed_beta(&MaxEntProblem::with_beta(1000, 1e6, 50.0)).unwrap();
        assert!(s.closed_form[0] > 1.0 - 1e-12);
        assert!(s.iterative[0] > 1.0 - 1e-12);
    }

    #[test]
    fn stationarity_of_non_solutions() {
        let uniform = vec![0.1; 10];
        assert!(verify_stationarity(&uniform, 1.0, 1e4).unwrap() > 0.1);
        assert!(verify_stationarity(&uniform, 0.0, 1e4).unwrap() < 1e-12);
        assert_eq!(
            verify_stationarity(&[0.5, 0.0, 0.5], 1.0, 10.0),
            Err(MaxEntError::NonPositive(2))
        );
    }

    #[test]
    fn fixed_resolution_round_trip_and_monotone() {
        let (m, k_max) = (1e4, 100usize);
        let pr = MaxEntProblem::with_resolution(k_max, m, 0.0);
        let (lo, hi) = pr.resolution_range();
        let mut prev = f64::NEG_INFINITY;
        for i in 1..=10 {
            let r = lo + (hi - lo) * i as f64 / 11.0;
            let (beta, p) =
                solve_fixed_resolution(&MaxEntProblem::with_resolution(k_max, m, r)).unwrap();
            assert!((resolution_of(&p, m) - r).abs() < 1e-9);
            assert!(beta > prev);
            prev = beta;
        }
    }

    #[test]
    fn fixed_resolution_errors() {
        let (m, k_max) = (1e4, 100usize);
        assert_eq!(
            solve_fixed_resolution(&MaxEntProblem::with_resolution(k_max, m, m.ln())),
            Err(MaxEntError::Boundary { r: m.ln() })
        );
        assert!(matches!(
            solve_fixed_resolution(&MaxEntProblem::with_resolution(k_max, m, 1.0)),
            Err(MaxEntError::Unattainable { .. })
        ));
        assert!(MaxEntProblem::with_beta(1, 10.0, 1.0).validate().is_err());
    }

    #[test]
    fn thermo_points() {
        let k = 40;
        let t = thermo_view(&vec![1.0 / k as f64; k], 1.0, 1e3);
        assert!((t.s - (k as f64).ln()).abs() < 1e-12);
        assert!((t.f - (t.u - t.t_eff * t.s)).abs() < 1e-12);
        let m = 64usize;
        let mut delta = vec![0.0; m];
        delta[m - 1] = 1.0;
        let t = thermo_view(&delta, 1.0, m as f64);
        assert_eq!((t.u, t.s, t.f), (0.0, 0.0, 0.0));
    }

    #[test]
    fn solution_maximizes_lagrangian() {
        let mut rng = Rng::new(5);
        for &beta in &[-1.0, 0.0, 1.0, 2.0] {
            let p = closed_form(200, beta);
            let best = lagrangian(&p, beta, 1e4, 3.0);
            for _ in 0..100 {
                let q = perturbed(&p, &mut rng, 0.3);
                assert!(lagrangian(&q, beta, 1e4, 3.0) < best);
            }
        }
    }

    #[test]
    fn free_energy_is_extremal_at_matched_temperature() {
        // F = ℒ/β + const: a minimum for T > 0 (β < 0), a maximum for T < 0.
        let mut rng = Rng::new(6);
        for &beta in &[-1.0, 1.0] {
            let p = closed_form(200, beta);
            let f0 = thermo_view(&p, beta, 1e4).f;
            for _ in 0..100 {
                let f = thermo_view(&perturbed(&p, &mut rng, 0.3), beta, 1e4).f;
                if beta < 0.0 {
                    assert!(f > f0);
                } else {
                    assert!(f < f0);
                }
            }
        }
    }
}
