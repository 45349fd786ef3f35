use super::{linear_fit, InfoError};
use crate::representation::{log_bin, DegeneracySpectrum};
use serde::{Deserialize, Serialize};

/// Smallest span, in decades of k, for a fit to count as a power law.
pub const GATE_MIN_DECADES: f64 = 1.5;
/// Smallest log-binned log-log R² for a fit to count as a power law.
pub const GATE_MIN_R2: f64 = 0.9;

const MIN_TAIL: u64 = 10;
const MIN_DISTINCT: usize = 10;
const ALPHA_LO: f64 = -30.0;
const ALPHA_HI: f64 = 300.0;
const BIN_BASE: f64 = 2.0;

/// Discrete power-law fit `m(k) ∝ k^(−α)` on `k_min ≤ k ≤ k_max`, with
/// `α = β + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub beta: f64,
    pub alpha: f64,
    pub k_min: u64,
    pub k_max: u64,
    pub ks_distance: f64,
    pub n_tail: u64,
    pub decades: f64,
    /// Least-squares slope of `ln m` against `ln k` on base-2 log bins of the tail.
    pub binned_slope: Option<f64>,
    pub binned_r2: Option<f64>,
}

impl PowerLawFit {
    pub fn is_plausible(&self) -> bool {
        self.decades >= GATE_MIN_DECADES && self.binned_r2.is_some_and(|r2| r2 >= GATE_MIN_R2)
    }
}

/// `(Σ w(k), Σ w(k) ln k)` for `k = lo..=hi` with `w(k) = exp(−s (ln k − ln_ref))`.
/// Long ranges use 32 direct terms followed by an Euler–Maclaurin tail.
pub fn power_sums(lo: u64, hi: u64, s: f64, ln_ref: f64) -> (f64, f64) {
    if hi < lo {
        return (0.0, 0.0);
    }
    let w = |x: f64| (-s * (x.ln() - ln_ref)).exp();
    let direct = |a: u64, b: u64| {
        (a..=b).fold((0.0, 0.0), |(s0, s1), k| {
            let kf = k as f64;
            let wk = w(kf);
            (s0 + wk, s1 + wk * kf.ln())
        })
    };
    if hi - lo < 64 {
        return direct(lo, hi);
    }
    let (h0, h1) = direct(lo, lo + 31);
    let (a, b) = ((lo + 32) as f64, hi as f64);
    let (t, u) = (1.0 - s, (b / a).ln());
    let y = t * u;
    let scale = w(a) * a;
    let e1 = u * phi1(y);
    let e2 = u * u * phi2(y);
    let mut s0 = h0 + scale * e1 + 0.5 * (w(a) + w(b));
    let mut s1 = h1 + scale * (a.ln() * e1 + e2) + 0.5 * (w(a) * a.ln() + w(b) * b.ln());

    // c_n(s) = Π_{j<n} −(s+j) is the coefficient of x^(−s−n) in the n-th
    // derivative of x^(−s); the x^(−s) ln x derivatives follow from −∂/∂s.
    let (mut c, mut dc) = (1.0, 0.0);
    let mut order = 0;
    for (target, coef) in [(1, 1.0 / 12.0), (3, -1.0 / 720.0), (5, 1.0 / 30240.0)] {
        while order < target {
            let f = -(s + order as f64);
            dc = dc * f - c;
            c *= f;
            order += 1;
        }
        let deriv = |x: f64| {
            let xn = x.powi(-order) * w(x);
            (c * xn, (-dc + c * x.ln()) * xn)
        };
        let (fb, gb) = deriv(b);
        let (fa, ga) = deriv(a);
        s0 += coef * (fb - fa);
        s1 += coef * (gb - ga);
    }
    (s0, s1)
}

/// `(e^y − 1)/y`.
fn phi1(y: f64) -> f64 {
    if y.abs() < 1e-12 {
        1.0 + 0.5 * y
    } else {
        y.exp_m1() / y
    }
}

/// `∫_0^1 r e^(y r) dr`.
fn phi2(y: f64) -> f64 {
    if y.abs() < 1.0 {
        let (mut term, mut sum) = (1.0, 0.5);
        for n in 1..40 {
            term *= y / n as f64;
            sum += term / (n + 2) as f64;
        }
        sum
    } else {
        (y.exp() * (y - 1.0) + 1.0) / (y * y)
    }
}

struct Tail<'a> {
    pairs: &'a [(u64, u64)],
    n: u64,
}

impl Tail<'_> {
    fn k_min(&self) -> u64 {
        self.pairs[0].0
    }
    fn k_max(&self) -> u64 {
        self.pairs[self.pairs.len() - 1].0
    }
    fn ln_ref(&self, s: f64) -> f64 {
        (if s >= 0.0 { self.k_min() } else { self.k_max() } as f64).ln()
    }

    fn mle(&self) -> Result<f64, InfoError> {
        let target = self
            .pairs
            .iter()
            .map(|&(k, m)| m as f64 * (k as f64).ln())
            .sum::<f64>()
            / self.n as f64;
        let excess = |s: f64| {
            let (s0, s1) = power_sums(self.k_min(), self.k_max(), s, self.ln_ref(s));
            s1 / s0 - target
        };
        let (mut lo, mut hi) = (ALPHA_LO, ALPHA_HI);
        if excess(lo) < 0.0 || excess(hi) > 0.0 {
            return Err(InfoError::NoRoot { lo, hi });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    fn ks(&self, alpha: f64) -> f64 {
        let r = self.ln_ref(alpha);
        let (z, _) = power_sums(self.k_min(), self.k_max(), alpha, r);
        let (mut model, mut emp, mut d) = (0.0, 0.0, 0.0f64);
        let mut prev = self.k_min() - 1;
        for &(k, m) in self.pairs {
            model += power_sums(prev + 1, k, alpha, r).0 / z;
            emp += m as f64 / self.n as f64;
            d = d.max((emp - model).abs());
            prev = k;
        }
        d
    }
}

fn check(spec: &DegeneracySpectrum) -> Result<(), InfoError> {
    if spec.is_empty() {
        return Err(InfoError::Empty);
    }
    if spec.pairs().len() == 1 {
        return Err(InfoError::Degenerate);
    }
    if spec.pairs().len() < MIN_DISTINCT {
        return Err(InfoError::TooFewPoints(format!(
            "{} distinct frequencies, need {MIN_DISTINCT}",
            spec.pairs().len()
        )));
    }
    Ok(())
}

/// Maximum-likelihood fit of each code's frequency to a discrete power law
/// truncated at the largest observed frequency, with `k_min` chosen to
/// minimise the Kolmogorov–Smirnov distance (ties go to the smaller `k_min`).
pub fn fit_power_law(spec: &DegeneracySpectrum) -> Result<PowerLawFit, InfoError> {
    check(spec)?;
    let pairs = spec.pairs();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut tail_n: u64 = pairs.iter().map(|&(_, m)| m).sum();
    for i in 0..pairs.len() - 1 {
        if tail_n < MIN_TAIL {
            break;
        }
        let tail = Tail {
            pairs: &pairs[i..],
            n: tail_n,
        };
        tail_n -= pairs[i].1;
        let Ok(alpha) = tail.mle() else { continue };
        let d = tail.ks(alpha);
        if best.is_none_or(|(bd, _, _)| d < bd - 1e-12) {
            best = Some((d, i, alpha));
        }
    }
    let (d, i, alpha) =
        best.ok_or_else(|| InfoError::TooFewPoints(format!("no cutoff leaves {MIN_TAIL} codes")))?;
    Ok(finish(spec, i, alpha, d))
}

/// Fit with a fixed lower cutoff.
pub fn fit_power_law_from(spec: &DegeneracySpectrum, k_min: u64) -> Result<PowerLawFit, InfoError> {
    check(spec)?;
    let i = spec.pairs().partition_point(|&(k, _)| k < k_min);
    let sub = &spec.pairs()[i..];
    if sub.len() < 2 {
        return Err(InfoError::Degenerate);
    }
    let tail = Tail {
        pairs: sub,
        n: sub.iter().map(|&(_, m)| m).sum(),
    };
    let alpha = tail.mle()?;
    let d = tail.ks(alpha);
    Ok(finish(spec, i, alpha, d))
}

fn finish(spec: &DegeneracySpectrum, i: usize, alpha: f64, ks_distance: f64) -> PowerLawFit {
    let pairs = spec.pairs();
    let (k_min, k_max) = (pairs[i].0, pairs[pairs.len() - 1].0);
    let tail = spec.tail(k_min);
    let bins = log_bin(&tail, BIN_BASE);
    let (binned_slope, binned_r2) = if bins.len() >= 3 {
        let xs: Vec<f64> = bins.iter().map(|b| b.k_center.ln()).collect();
        let ys: Vec<f64> = bins.iter().map(|b| b.m_mean.ln()).collect();
        match linear_fit(&xs, &ys) {
            Ok(f) => (Some(f.slope), Some(f.r2)),
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };
    PowerLawFit {
        beta: alpha - 1.0,
        alpha,
        k_min,
        k_max,
        ks_distance,
        n_tail: tail.distinct_codes(),
        decades: (k_max as f64 / k_min as f64).log10(),
        binned_slope,
        binned_r2,
    }
}
