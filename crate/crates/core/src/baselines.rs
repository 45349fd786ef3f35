//! k-means clustering as a reference for cluster-size distributions.

use crate::linalg::{Matrix, Rng};
use crate::representation::DegeneracySpectrum;
use rayon::prelude::*;
use thiserror::Error;

/// Cluster count used for the MNIST comparison.
pub const DEFAULT_K: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KMeansError {
    #[error("k = {k} exceeds the {n} samples")]
    TooManyClusters { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    pub cluster_sizes: Vec<u64>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    /// Inertia after the initial assignment and after every update.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, ra) = a.split_at(a.len() / 8 * 8);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(8).zip(cb.chunks_exact(8)) {
        for l in 0..8 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += (x - y) * (x - y);
    }
    s
}

const TILE: usize = 64;

/// For each listed row: the nearest centroid (ties go to the lower index),
/// its squared distance, and the squared distance to the runner-up. Rows and
/// centroids are visited in tiles so both stay cache-resident.
fn scan(data: &Matrix, rows: &[usize], centroids: &Matrix) -> Vec<(usize, f64, f64)> {
    let k = centroids.rows();
    rows.par_chunks(TILE)
        .flat_map_iter(|tile| {
            let mut best = vec![(0usize, f64::INFINITY, f64::INFINITY); tile.len()];
            for c0 in (0..k).step_by(TILE) {
                let c1 = (c0 + TILE).min(k);
                for (&i, b) in tile.iter().zip(best.iter_mut()) {
                    let x = data.row(i);
                    for c in c0..c1 {
                        let d = sq_dist(x, centroids.row(c));
                        if d < b.1 {
                            *b = (c, d, b.1);
                        } else if d < b.2 {
                            b.2 = d;
                        }
                    }
                }
            }
            best
        })
        .collect()
}

fn plus_plus_seeds(data: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = data.rows();
    let mut chosen = Vec::with_capacity(k);
    let mut is_chosen = vec![false; n];
    let mut d2 = vec![f64::INFINITY; n];
    let mut next = rng.below(n as u64) as usize;
    loop {
        chosen.push(next);
        is_chosen[next] = true;
        if chosen.len() == k {
            break;
        }
        let c = data.row(next);
        d2.par_iter_mut().enumerate().for_each(|(i, d)| {
            *d = d.min(sq_dist(data.row(i), c));
        });
        let total: f64 = d2.iter().sum();
        next = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            // every point coincides with a centre; take an unused index
            let free: Vec<usize> = (0..n).filter(|&i| !is_chosen[i]).collect();
            free[rng.below(free.len() as u64) as usize]
        };
    }
    data.select_rows(&chosen)
}

fn update_means(data: &Matrix, assignments: &[usize], k: usize) -> (Matrix, Vec<u64>) {
    let d = data.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut sizes = vec![0u64; k];
    for (i, &a) in assignments.iter().enumerate() {
        sizes[a] += 1;
        for (s, x) in sums.row_mut(a).iter_mut().zip(data.row(i)) {
            *s += x;
        }
    }
    for (c, &n) in sizes.iter().enumerate() {
        if n > 0 {
            let inv = 1.0 / n as f64;
            sums.row_mut(c).iter_mut().for_each(|v| *v *= inv);
        }
    }
    (sums, sizes)
}

/// Per-point bounds for Hamerly's exact acceleration of Lloyd's algorithm:
/// `upper ≥ ‖x − c_a‖` and `lower ≤ ‖x − c_j‖` for every `j ≠ a`.
#[derive(Debug, Clone, Copy)]
struct Bounds {
    upper: f64,
    lower: f64,
}

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or `max_iters` updates have been made. Distance bounds skip points
/// whose nearest centroid provably cannot change. An empty cluster takes over
/// the point lying farthest from its own centroid.
pub fn kmeans(
    data: &Matrix,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KMeansResult, KMeansError> {
    let n = data.rows();
    if k == 0 {
        return Err(KMeansError::ZeroClusters);
    }
    if k > n {
        return Err(KMeansError::TooManyClusters { k, n });
    }
    let mut rng = Rng::new(seed);
    let mut centroids = plus_plus_seeds(data, k, &mut rng);
    let all: Vec<usize> = (0..n).collect();
    let first = scan(data, &all, &centroids);
    let mut assignments: Vec<usize> = first.iter().map(|r| r.0).collect();
    let mut bounds: Vec<Bounds> = first
        .iter()
        .map(|r| Bounds {
            upper: r.1.sqrt(),
            lower: r.2.sqrt(),
        })
        .collect();
    let inertia_of = |a: &[usize], c: &Matrix| -> Vec<f64> {
        (0..n)
            .into_par_iter()
            .map(|i| sq_dist(data.row(i), c.row(a[i])))
            .collect()
    };
    let mut dist = inertia_of(&assignments, &centroids);
    let mut history = vec![dist.iter().sum::<f64>()];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let (mut means, mut sizes) = update_means(data, &assignments, k);
        let empties: Vec<usize> = (0..k).filter(|&c| sizes[c] == 0).collect();
        let mut moved = Vec::new();
        if !empties.is_empty() {
            for c in empties {
                let far = (0..n)
                    .filter(|&i| sizes[assignments[i]] > 1)
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dist[b] >= dist[i] => Some(b),
                        _ => Some(i),
                    })
                    .expect("k ≤ n leaves a cluster with two points");
                sizes[assignments[far]] -= 1;
                sizes[c] += 1;
                assignments[far] = c;
                dist[far] = 0.0;
                moved.push(far);
            }
            means = update_means(data, &assignments, k).0;
        }

        let shift: Vec<f64> = (0..k)
            .map(|j| sq_dist(centroids.row(j), means.row(j)).sqrt())
            .collect();
        let (mut top, mut second) = ((0usize, 0.0f64), 0.0f64);
        for (j, &p) in shift.iter().enumerate() {
            if p > top.1 {
                second = top.1;
                top = (j, p);
            } else if p > second {
                second = p;
            }
        }
        for (b, &a) in bounds.iter_mut().zip(&assignments) {
            b.upper += shift[a];
            b.lower -= if a == top.0 { second } else { top.1 };
        }
        for &i in &moved {
            bounds[i] = Bounds {
                upper: 0.0,
                lower: 0.0,
            };
        }
        centroids = means;

        let half_gap: Vec<f64> = if k > 1 {
            let idx: Vec<usize> = (0..k).collect();
            scan(&centroids, &idx, &centroids)
                .iter()
                .map(|r| 0.5 * r.2.sqrt())
                .collect()
        } else {
            vec![f64::INFINITY]
        };
        let candidates: Vec<usize> = bounds
            .par_iter_mut()
            .enumerate()
            .filter_map(|(i, b)| {
                let a = assignments[i];
                let m = half_gap[a].max(b.lower);
                if b.upper <= m {
                    return None;
                }
                b.upper = sq_dist(data.row(i), centroids.row(a)).sqrt();
                (b.upper > m).then_some(i)
            })
            .collect();
        let mut changed = false;
        for (&i, r) in candidates.iter().zip(scan(data, &candidates, &centroids)) {
            changed |= r.0 != assignments[i];
            assignments[i] = r.0;
            bounds[i] = Bounds {
                upper: r.1.sqrt(),
                lower: r.2.sqrt(),
            };
        }
        dist = inertia_of(&assignments, &centroids);
        history.push(dist.iter().sum());
        if !changed && moved.is_empty() {
            converged = true;
            break;
        }
    }
    let cluster_sizes = update_means(data, &assignments, k).1;
    Ok(KMeansResult {
        centroids,
        assignments,
        cluster_sizes,
        inertia: *history.last().expect("at least one assignment"),
        inertia_history: history,
        iterations,
        converged,
    })
}

/// Cluster sizes as a degeneracy spectrum; empty clusters are ignored.
pub fn cluster_size_spectrum(r: &KMeansResult) -> DegeneracySpectrum {
    DegeneracySpectrum::from_frequencies(r.cluster_sizes.iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n_each: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = Rng::new(seed);
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (label, cx) in [(0usize, -5.0), (1, 5.0)] {
            for _ in 0..n_each {
                rows.push(vec![cx + rng.normal(), rng.normal()]);
                truth.push(label);
            }
        }
        (Matrix::from_rows(&rows), truth)
    }

    #[test]
    fn separates_two_blobs() {
        let (x, truth) = blobs(200, 1);
        let r = kmeans(&x, 2, 7, 100).unwrap();
        let agree = r
            .assignments
            .iter()
            .zip(&truth)
            .filter(|(a, t)| a == t)
            .count();
        let agree = agree.max(truth.len() - agree) as f64 / truth.len() as f64;
        assert!(agree >= 0.99, "{agree}");
        assert!(r.converged);
    }

    #[test]
    fn one_cluster_per_point() {
        let (x, _) = blobs(30, 2);
        let r = kmeans(&x, 60, 3, 50).unwrap();
        assert!(r.cluster_sizes.iter().all(|&s| s == 1));
        assert_eq!(r.inertia, 0.0);
        assert_eq!(cluster_size_spectrum(&r).pairs(), &[(1, 60)]);
    }

    #[test]
    fn single_cluster() {
        let (x, _) = blobs(10, 4);
        let r = kmeans(&x, 1, 0, 10).unwrap();
        assert_eq!(r.cluster_sizes, vec![20]);
    }

    #[test]
    fn inertia_never_increases_and_mass_is_kept() {
        let mut rng = Rng::new(9);
        let x = Matrix::filled_with(500, 5, |_, _| rng.uniform());
        let r = kmeans(&x, 40, 11, 100).unwrap();
        for w in r.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", r.inertia_history);
        }
        assert_eq!(r.cluster_sizes.iter().sum::<u64>(), 500);
        assert!(r.assignments.iter().all(|&a| a < 40));
        assert_eq!(cluster_size_spectrum(&r).total(), 500);
    }

    #[test]
    fn deterministic_and_duplicate_safe() {
        let x = Matrix::from_rows(&vec![vec![1.0, 1.0]; 8]);
        let a = kmeans(&x, 3, 5, 20).unwrap();
        assert_eq!(a.cluster_sizes.iter().sum::<u64>(), 8);
        let (y, _) = blobs(50, 5);
        assert_eq!(kmeans(&y, 5, 1, 30).unwrap(), kmeans(&y, 5, 1, 30).unwrap());
    }

    #[test]
    fn size_spectrum_of_sizes() {
        let r = KMeansResult {
            centroids: Matrix::zeros(3, 1),
            assignments: vec![],
            cluster_sizes: vec![3, 3, 4],
            inertia: 0.0,
            inertia_history: vec![],
            iterations: 0,
            converged: true,
        };
        assert_eq!(cluster_size_spectrum(&r).pairs(), &[(3, 2), (4, 1)]);
    }

    #[test]
    fn too_many_clusters() {
        let (x, _) = blobs(2, 0);
        assert_eq!(
            kmeans(&x, 5, 0, 1),
            Err(KMeansError::TooManyClusters { k: 5, n: 4 })
        );
    }
}
