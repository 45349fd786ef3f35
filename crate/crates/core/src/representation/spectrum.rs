use super::{CodeHistogram, RepresentationError};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// `(k, m(k))` pairs sorted by `k`, every `m(k) ≥ 1`, with
/// `Σ k·m(k) = total`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DegeneracySpectrum {
    pairs: Vec<(u64, u64)>,
    total: u64,
}

impl DegeneracySpectrum {
    /// Spectrum of a collection of cluster sizes or code frequencies; zero
    /// sizes are ignored.
    pub fn from_frequencies(freqs: impl IntoIterator<Item = u64>) -> Self {
        let mut m: BTreeMap<u64, u64> = BTreeMap::new();
        for k in freqs.into_iter().filter(|&k| k > 0) {
            *m.entry(k).or_insert(0) += 1;
        }
        Self::from_map(m)
    }

    /// Builds a spectrum from explicit `(k, m(k))` pairs; pairs with `k = 0`
    /// or `m = 0` are dropped and duplicates are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let mut m: BTreeMap<u64, u64> = BTreeMap::new();
        for (k, mk) in pairs.into_iter().filter(|&(k, mk)| k > 0 && mk > 0) {
            *m.entry(k).or_insert(0) += mk;
        }
        Self::from_map(m)
    }

    fn from_map(m: BTreeMap<u64, u64>) -> Self {
        let total = m.iter().map(|(k, mk)| k * mk).sum();
        DegeneracySpectrum {
            pairs: m.into_iter().collect(),
            total,
        }
    }

    pub fn pairs(&self) -> &[(u64, u64)] {
        &self.pairs
    }

    /// `M = Σ k·m(k)`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of distinct codes, `Σ m(k)`.
    pub fn distinct_codes(&self) -> u64 {
        self.pairs.iter().map(|&(_, m)| m).sum()
    }

    pub fn max_k(&self) -> Option<u64> {
        self.pairs.last().map(|&(k, _)| k)
    }

    /// Drops frequencies above `k_max`; `total` is recomputed for what remains.
    pub fn with_k_cutoff(&self, k_max: u64) -> Self {
        Self::from_pairs(self.pairs.iter().copied().filter(|&(k, _)| k <= k_max))
    }

    /// Restricts to `k ≥ k_min`.
    pub fn tail(&self, k_min: u64) -> Self {
        Self::from_pairs(self.pairs.iter().copied().filter(|&(k, _)| k >= k_min))
    }

    /// Coefficient of variation of the cluster sizes (one observation per code).
    pub fn size_cv(&self) -> f64 {
        let n = self.distinct_codes() as f64;
        if n == 0.0 {
            return f64::NAN;
        }
        let mean = self.total as f64 / n;
        let var = self
            .pairs
            .iter()
            .map(|&(k, m)| m as f64 * (k as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        var.sqrt() / mean
    }

    /// CSV with header `k,m_k`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,m_k\n");
        for (k, m) in &self.pairs {
            let _ = writeln!(s, "{k},{m}");
        }
        s
    }
}

/// Inverts a histogram into `m(k)`.
pub fn degeneracy(h: &CodeHistogram) -> DegeneracySpectrum {
    let spec = DegeneracySpectrum::from_frequencies(h.frequencies());
    debug_assert_eq!(spec.total, h.total);
    spec
}

pub fn read_spectrum_csv(text: &str) -> Result<DegeneracySpectrum, RepresentationError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("k,m_k") {
        return Err(RepresentationError::Csv("missing `k,m_k` header".into()));
    }
    let mut pairs = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (k, m) = line.split_once(',').ok_or_else(|| {
            RepresentationError::Csv(format!("line {}: expected two fields", i + 2))
        })?;
        let parse = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| RepresentationError::Csv(format!("line {}: {e}", i + 2)))
        };
        pairs.push((parse(k)?, parse(m)?));
    }
    Ok(DegeneracySpectrum::from_pairs(pairs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinnedPoint {
    pub k_center: f64,
    pub m_mean: f64,
}

impl BinnedPoint {
    pub fn csv(points: &[BinnedPoint]) -> String {
        let mut s = String::from("k_center,m_mean\n");
        for p in points {
            let _ = writeln!(s, "{},{}", p.k_center, p.m_mean);
        }
        s
    }
}

/// Geometric binning of the integer k axis. Bin `i` holds the integers with
/// `⌊log_base k⌋ = i`; its value is `Σ m(k)` divided by the number of integers
/// in the bin (absent k count as zero), and its centre is the geometric mean of
/// the smallest and largest integer in the bin. Bins are clipped to the
/// observed range of k, and bins with no mass are omitted.
pub fn log_bin(spec: &DegeneracySpectrum, base: f64) -> Vec<BinnedPoint> {
    let pts: Vec<(f64, f64)> = spec
        .pairs()
        .iter()
        .map(|&(k, m)| (k as f64, m as f64))
        .collect();
    log_bin_points(&pts, base)
}

/// [`log_bin`] on real-valued `m` at integer `k ≥ 1`.
pub fn log_bin_points(points: &[(f64, f64)], base: f64) -> Vec<BinnedPoint> {
    assert!(base > 1.0, "log-bin base must exceed 1");
    let ln_base = base.ln();
    let bin_of = |k: f64| ((k.ln() / ln_base) + 1e-9).floor() as i64;
    // smallest integer k ≥ 1 whose bin index is ≥ i
    let first_int = |i: i64| -> u64 {
        let mut g = base.powi(i as i32).ceil().max(1.0) as u64;
        while g > 1 && bin_of((g - 1) as f64) >= i {
            g -= 1;
        }
        while bin_of(g as f64) < i {
            g += 1;
        }
        g
    };
    let mut sums: BTreeMap<i64, f64> = BTreeMap::new();
    let (mut k_lo, mut k_hi) = (u64::MAX, 0u64);
    for &(k, m) in points {
        k_lo = k_lo.min(k as u64);
        k_hi = k_hi.max(k as u64);
        assert!(k >= 1.0, "k must be at least 1");
        *sums.entry(bin_of(k)).or_insert(0.0) += m;
    }
    sums.into_iter()
        .filter(|&(_, s)| s > 0.0)
        .map(|(i, s)| {
            let lo = first_int(i).max(k_lo);
            let hi = (first_int(i + 1) - 1).min(k_hi);
            BinnedPoint {
                k_center: ((lo as f64) * (hi as f64)).sqrt(),
                m_mean: s / (hi - lo + 1) as f64,
            }
        })
        .collect()
}
