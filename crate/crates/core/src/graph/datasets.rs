//! Seeded synthetic point clouds.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::PointCloud;
use crate::error::{Error, Result};

/// Two interleaving half-circles of radius 1.
///
/// Moon 0 is the upper arc `(cos t, sin t)`, moon 1 the lower arc
/// `(1 − cos t, 0.5 − sin t)`, with `t ~ U[0, π]` and `n/2` points each.
/// `background_n` extra points are drawn uniformly over the bounding box of
/// the moon points and labeled by their nearest moon point.
pub fn two_moons(n: usize, noise_std: f64, background_n: usize, seed: u64) -> Result<PointCloud> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("two-moons needs an even n ≥ 4, got {n}")));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidInput(format!("noise must be a non-negative number, got {noise_std}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = (noise_std > 0.0).then(|| Normal::new(0.0, noise_std).expect("finite std"));
    let half = n / 2;
    let total = n + background_n;
    let mut coords = DMatrix::zeros(total, 2);
    let mut labels = Vec::with_capacity(total);
    for i in 0..n {
        let t = rng.random_range(0.0..=PI);
        let (x, y, label) = if i < half {
            (t.cos(), t.sin(), 0)
        } else {
            (1.0 - t.cos(), 0.5 - t.sin(), 1)
        };
        let (dx, dy) = match &jitter {
            Some(d) => (d.sample(&mut rng), d.sample(&mut rng)),
            None => (0.0, 0.0),
        };
        coords[(i, 0)] = x + dx;
        coords[(i, 1)] = y + dy;
        labels.push(label);
    }
    if background_n > 0 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for i in 0..n {
            for d in 0..2 {
                lo[d] = lo[d].min(coords[(i, d)]);
                hi[d] = hi[d].max(coords[(i, d)]);
            }
        }
        for i in n..total {
            let x = rng.random_range(lo[0]..=hi[0]);
            let y = rng.random_range(lo[1]..=hi[1]);
            coords[(i, 0)] = x;
            coords[(i, 1)] = y;
            let nearest = (0..n)
                .min_by(|&a, &b| {
                    let da = (coords[(a, 0)] - x).powi(2) + (coords[(a, 1)] - y).powi(2);
                    let db = (coords[(b, 0)] - x).powi(2) + (coords[(b, 1)] - y).powi(2);
                    da.total_cmp(&db)
                })
                .expect("n ≥ 4");
            labels.push(labels[nearest]);
        }
    }
    PointCloud::new(coords, Some(labels))
}

/// Isotropic Gaussian classes, `per_class` points around each center.
pub fn gaussian_blobs(centers: &[Vec<f64>], per_class: usize, std: f64, seed: u64) -> Result<PointCloud> {
    let d = centers.first().map_or(0, Vec::len);
    if centers.is_empty() || d == 0 || centers.iter().any(|c| c.len() != d) {
        return Err(Error::InvalidInput("centers must be non-empty and share one dimension".into()));
    }
    if per_class == 0 || !(std > 0.0 && std.is_finite()) {
        return Err(Error::InvalidInput("need per_class ≥ 1 and a positive std".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).expect("positive std");
    let n = centers.len() * per_class;
    let mut coords = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for k in 0..per_class {
            let row = c * per_class + k;
            for j in 0..d {
                coords[(row, j)] = center[j] + normal.sample(&mut rng);
            }
            labels.push(c);
        }
    }
    PointCloud::new(coords, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_moons_lie_on_arcs() {
        let p = two_moons(100, 0.0, 0, 3).unwrap();
        let labels = p.labels().unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 50);
        for i in 0..100 {
            let (x, y) = (p.coords()[(i, 0)], p.coords()[(i, 1)]);
            let r = if labels[i] == 0 {
                (x * x + y * y).sqrt()
            } else {
                ((x - 1.0).powi(2) + (y - 0.5).powi(2)).sqrt()
            };
            assert!((r - 1.0).abs() < 1e-12);
            if labels[i] == 0 { assert!(y >= -1e-12) } else { assert!(y <= 0.5 + 1e-12) }
        }
    }

    #[test]
    fn background_adds_points() {
        let p = two_moons(500, 0.05, 100, 1).unwrap();
        assert_eq!(p.n(), 600);
        assert_eq!(p.labels().unwrap().len(), 600);
    }

    #[test]
    fn same_seed_same_points() {
        assert_eq!(two_moons(40, 0.1, 5, 9).unwrap(), two_moons(40, 0.1, 5, 9).unwrap());
        assert_ne!(two_moons(40, 0.1, 5, 9).unwrap(), two_moons(40, 0.1, 5, 10).unwrap());
    }

    #[test]
    fn odd_n_is_rejected() {
        assert!(two_moons(7, 0.0, 0, 0).is_err());
        assert!(two_moons(2, 0.0, 0, 0).is_err());
    }
}
