use super::InfoError;
use crate::representation::{degeneracy, CodeHistogram, DegeneracySpectrum};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoSummary {
    #[serde(rename = "H_Z")]
    pub h_z: f64,
    #[serde(rename = "H_K")]
    pub h_k: f64,
    #[serde(rename = "H_Y", skip_serializing_if = "Option::is_none", default)]
    pub h_y: Option<f64>,
    #[serde(rename = "H_YZ", skip_serializing_if = "Option::is_none", default)]
    pub h_yz: Option<f64>,
    #[serde(rename = "I_ZY", skip_serializing_if = "Option::is_none", default)]
    pub i_zy: Option<f64>,
    #[serde(rename = "M")]
    pub m: u64,
    pub distinct: u64,
}

/// `−Σ (c/M) ln(c/M)` for counts summing to `M`, with `ln(c/M)` taken as
/// `ln c − ln M` so the extreme cases come out exact.
fn count_entropy(counts: impl Iterator<Item = u64>, total: u64) -> f64 {
    let ln_m = (total as f64).ln();
    let mf = total as f64;
    let h: f64 = counts
        .filter(|&c| c > 0)
        .map(|c| -(c as f64 / mf) * ((c as f64).ln() - ln_m))
        .sum();
    h.max(0.0)
}

fn check(spec: &DegeneracySpectrum) -> Result<(), InfoError> {
    if spec.total() == 0 {
        Err(InfoError::Empty)
    } else {
        Ok(())
    }
}

/// `H(Z) = −Σ_k (k m(k)/M) ln(k/M)`.
pub fn resolution(spec: &DegeneracySpectrum) -> Result<f64, InfoError> {
    check(spec)?;
    let mf = spec.total() as f64;
    let ln_m = mf.ln();
    let h: f64 = spec
        .pairs()
        .iter()
        .map(|&(k, m)| -((k * m) as f64 / mf) * ((k as f64).ln() - ln_m))
        .sum();
    Ok(h.max(0.0))
}

/// `H(K) = −Σ_k (k m(k)/M) ln(k m(k)/M)`.
pub fn relevance(spec: &DegeneracySpectrum) -> Result<f64, InfoError> {
    check(spec)?;
    Ok(count_entropy(
        spec.pairs().iter().map(|&(k, m)| k * m),
        spec.total(),
    ))
}

/// `H(Z) = −Σ_z (k_z/M) ln(k_z/M)` straight from the code counts.
pub fn resolution_from_histogram(h: &CodeHistogram) -> Result<f64, InfoError> {
    if h.total == 0 {
        return Err(InfoError::Empty);
    }
    Ok(count_entropy(h.frequencies(), h.total))
}

/// Entropy of the frequency `K = k_z` of a randomly drawn sample, accumulating
/// the probability mass per frequency directly over codes.
pub fn relevance_from_histogram(h: &CodeHistogram) -> Result<f64, InfoError> {
    if h.total == 0 {
        return Err(InfoError::Empty);
    }
    let mut mass: BTreeMap<u64, u64> = BTreeMap::new();
    for k in h.frequencies() {
        *mass.entry(k).or_insert(0) += k;
    }
    Ok(count_entropy(mass.into_values(), h.total))
}

/// Entropies of a spectrum without labels.
pub fn summarize(spec: &DegeneracySpectrum) -> Result<InfoSummary, InfoError> {
    Ok(InfoSummary {
        h_z: resolution(spec)?,
        h_k: relevance(spec)?,
        h_y: None,
        h_yz: None,
        i_zy: None,
        m: spec.total(),
        distinct: spec.distinct_codes(),
    })
}

/// Adds `H(Y)`, `H(Y,Z)` and `I(Z;Y)` to the code entropies. The mutual
/// information is summed directly as `Σ p(y,z) ln(p(y,z)/(p(y)p(z)))`.
pub fn entropies_with_labels(h: &CodeHistogram) -> Result<InfoSummary, InfoError> {
    let joint = h.joint.as_ref().ok_or(InfoError::NoLabels)?;
    let spec = degeneracy(h);
    let mut out = summarize(&spec)?;
    let ky = h.label_counts().expect("joint present");
    let mf = h.total as f64;
    let h_y = count_entropy(ky.values().copied(), h.total);
    let h_yz = count_entropy(joint.values().copied(), h.total);
    let i_zy: f64 = joint
        .iter()
        .map(|((y, z), &k)| {
            let kf = k as f64;
            let denom = ky[y] as f64 * h.counts[z] as f64;
            (kf / mf) * ((kf * mf).ln() - denom.ln())
        })
        .sum();
    out.h_y = Some(h_y);
    out.h_yz = Some(h_yz);
    out.i_zy = Some(i_zy);
    Ok(out)
}
