use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tolerances;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Cluster index per row, in `[0, k)`.
    pub labels: Vec<usize>,
    /// `k × d`.
    pub centers: DMatrix<f64>,
    pub inertia: f64,
    pub iterations: usize,
    /// True if any iteration had to refill an empty cluster.
    pub repaired_empty: bool,
}

/// Lloyd's algorithm with D²-weighted seeding, best of `restarts` by inertia.
///
/// All restarts draw from one ChaCha stream seeded by `seed`, so the result
/// is a pure function of the inputs.
pub fn kmeans(rows: &DMatrix<f64>, k: usize, seed: u64, restarts: usize) -> Result<KMeansResult> {
    let n = rows.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if rows.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("k-means rows contain non-finite values".into()));
    }
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let (run, _) = lloyd(rows, k, &mut rng, &tol);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(rows: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>, c: usize) -> f64 {
    (0..rows.ncols())
        .map(|d| {
            let t = rows[(i, d)] - centers[(c, d)];
            t * t
        })
        .sum()
}

fn seed_centers(rows: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = rows.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n).map(|i| row_dist(rows, i, chosen[0])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // All remaining points coincide with a center; take any unused index.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for i in 0..n {
            d2[i] = d2[i].min(row_dist(rows, i, next));
        }
    }
    DMatrix::from_fn(k, rows.ncols(), |c, d| rows[(chosen[c], d)])
}

fn row_dist(rows: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (0..rows.ncols())
        .map(|d| {
            let t = rows[(i, d)] - rows[(j, d)];
            t * t
        })
        .sum()
}

fn assign(rows: &DMatrix<f64>, centers: &DMatrix<f64>, labels: &mut [usize]) {
    for (i, label) in labels.iter_mut().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centers.nrows() {
            let d = sq_dist(rows, i, centers, c);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        *label = best;
    }
}

/// Moves the point farthest from its center into each empty cluster.
fn repair_empty(rows: &DMatrix<f64>, centers: &mut DMatrix<f64>, labels: &mut [usize]) -> bool {
    let k = centers.nrows();
    let mut repaired = false;
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return repaired;
        };
        let far = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&i, &j| {
                sq_dist(rows, i, centers, labels[i]).total_cmp(&sq_dist(rows, j, centers, labels[j]))
            })
            .expect("k ≤ n guarantees a donor cluster");
        labels[far] = empty;
        for d in 0..rows.ncols() {
            centers[(empty, d)] = rows[(far, d)];
        }
        repaired = true;
    }
}

fn update(rows: &DMatrix<f64>, labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut centers = DMatrix::zeros(k, rows.ncols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for d in 0..rows.ncols() {
            centers[(l, d)] += rows[(i, d)];
        }
    }
    for c in 0..k {
        let inv = 1.0 / counts[c] as f64;
        for d in 0..rows.ncols() {
            centers[(c, d)] *= inv;
        }
    }
    centers
}

fn inertia(rows: &DMatrix<f64>, labels: &[usize], centers: &DMatrix<f64>) -> f64 {
    labels.iter().enumerate().map(|(i, &l)| sq_dist(rows, i, centers, l)).sum()
}

/// One restart; also returns the inertia after every center update.
fn lloyd(rows: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng, tol: &Tolerances) -> (KMeansResult, Vec<f64>) {
    let mut centers = seed_centers(rows, k, rng);
    let mut labels = vec![0usize; rows.nrows()];
    assign(rows, &centers, &mut labels);
    let mut repaired = repair_empty(rows, &mut centers, &mut labels);
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < tol.kmeans_max_iter {
        iterations += 1;
        let next = update(rows, &labels, k);
        let shift = (0..k)
            .map(|c| (next.row(c) - centers.row(c)).norm())
            .fold(0.0_f64, f64::max);
        centers = next;
        trace.push(inertia(rows, &labels, &centers));
        assign(rows, &centers, &mut labels);
        repaired |= repair_empty(rows, &mut centers, &mut labels);
        if shift < tol.kmeans_shift {
            break;
        }
    }
    let result = KMeansResult {
        inertia: inertia(rows, &labels, &centers),
        labels,
        centers,
        iterations,
        repaired_empty: repaired,
    };
    (result, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn separated_blobs() {
        let rows = DMatrix::from_column_slice(4, 1, &[0.0, 0.1, 10.0, 10.1]);
        let r = kmeans(&rows, 2, 0, 3).unwrap();
        assert_eq!(r.labels[0], r.labels[1]);
        assert_eq!(r.labels[2], r.labels[3]);
        assert_ne!(r.labels[0], r.labels[2]);
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let rows = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let r = kmeans(&rows, 4, 11, 1).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut seen = r.labels.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn k_larger_than_n() {
        let rows = DMatrix::zeros(3, 2);
        assert!(matches!(kmeans(&rows, 4, 0, 1), Err(Error::InvalidK { k: 4, n: 3 })));
    }

    fn gaussian_rows(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        DMatrix::from_fn(n, 2, |_, _| normal.sample(&mut rng))
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let rows = gaussian_rows(20, 5);
        let a = kmeans(&rows, 3, 42, 4).unwrap();
        let b = kmeans(&rows, 3, 42, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inertia_never_increases_within_a_restart() {
        let tol = Tolerances::default();
        for seed in 0..20 {
            let rows = gaussian_rows(60, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, trace) = lloyd(&rows, 4, &mut rng, &tol);
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{trace:?}");
            }
        }
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let rows = DMatrix::from_column_slice(5, 1, &[1.0, 1.0, 1.0, 1.0, 2.0]);
        let r = kmeans(&rows, 3, 9, 2).unwrap();
        for c in 0..3 {
            assert!(r.labels.contains(&c));
        }
    }
}
