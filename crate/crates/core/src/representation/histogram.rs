use super::{BinaryCode, RepresentationError};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Exact code frequencies `k_z`, optionally with joint label counts `k_{y,z}`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CodeHistogram {
    pub counts: BTreeMap<BinaryCode, u64>,
    pub total: u64,
    pub joint: Option<BTreeMap<(usize, BinaryCode), u64>>,
}

impl CodeHistogram {
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.values().copied()
    }

    /// Label marginal counts `k_y`, when joint counts are present.
    pub fn label_counts(&self) -> Option<BTreeMap<usize, u64>> {
        let joint = self.joint.as_ref()?;
        let mut out = BTreeMap::new();
        for ((y, _), &k) in joint {
            *out.entry(*y).or_insert(0) += k;
        }
        Some(out)
    }

    fn merge(mut self, other: CodeHistogram) -> CodeHistogram {
        for (z, k) in other.counts {
            *self.counts.entry(z).or_insert(0) += k;
        }
        self.total += other.total;
        self.joint = match (self.joint, other.joint) {
            (Some(mut a), Some(b)) => {
                for (key, k) in b {
                    *a.entry(key).or_insert(0) += k;
                }
                Some(a)
            }
            (a, b) => a.or(b),
        };
        self
    }
}

/// Multiset count of `codes`; joint counts are filled when `labels` are given.
pub fn count_codes(
    codes: &[BinaryCode],
    labels: Option<&[usize]>,
) -> Result<CodeHistogram, RepresentationError> {
    check_lengths(codes, labels)?;
    let mut counts = BTreeMap::new();
    for z in codes {
        *counts.entry(z.clone()).or_insert(0u64) += 1;
    }
    let joint = labels.map(|ys| {
        let mut j = BTreeMap::new();
        for (z, &y) in codes.iter().zip(ys) {
            *j.entry((y, z.clone())).or_insert(0u64) += 1;
        }
        j
    });
    Ok(CodeHistogram {
        counts,
        total: codes.len() as u64,
        joint,
    })
}

/// Same result as [`count_codes`], counted on `shards` chunks in parallel and
/// merged; the output does not depend on `shards`.
pub fn count_codes_sharded(
    codes: &[BinaryCode],
    labels: Option<&[usize]>,
    shards: usize,
) -> Result<CodeHistogram, RepresentationError> {
    check_lengths(codes, labels)?;
    let chunk = codes.len().div_ceil(shards.max(1)).max(1);
    let parts: Vec<CodeHistogram> = codes
        .par_chunks(chunk)
        .enumerate()
        .map(|(i, cs)| {
            let ls = labels.map(|l| &l[i * chunk..i * chunk + cs.len()]);
            count_codes(cs, ls).expect("lengths checked")
        })
        .collect();
    let empty = CodeHistogram {
        joint: labels.map(|_| BTreeMap::new()),
        ..Default::default()
    };
    Ok(parts.into_iter().fold(empty, CodeHistogram::merge))
}

fn check_lengths(
    codes: &[BinaryCode],
    labels: Option<&[usize]>,
) -> Result<(), RepresentationError> {
    if let Some(l) = labels {
        if l.len() != codes.len() {
            return Err(RepresentationError::LengthMismatch {
                codes: codes.len(),
                labels: l.len(),
            });
        }
    }
    if let Some(first) = codes.first() {
        if let Some(other) = codes.iter().find(|c| c.width() != first.width()) {
            return Err(RepresentationError::WidthMismatch(
                first.width(),
                other.width(),
            ));
        }
    }
    Ok(())
}
