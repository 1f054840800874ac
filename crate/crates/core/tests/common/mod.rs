#![allow(dead_code)]

use conspec::constraints::{ConstraintList, ConstraintMatrix};
use conspec::graph::{build_laplacian, AffinityGraph};
use conspec::linalg::SymMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected random graph: a weighted ring plus random chords with probability `p`.
pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> AffinityGraph {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let j = (i + 1) % n;
        let w = rng.random_range(0.1..1.0);
        a[(i, j)] = w;
        a[(j, i)] = w;
    }
    for i in 0..n {
        for j in (i + 2)..n {
            if rng.random_bool(p) {
                let w = rng.random_range(0.1..1.0);
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
    }
    build_laplacian(SymMatrix::new(a).unwrap()).unwrap()
}

/// Random signed soft constraints on about `density` of all pairs.
pub fn random_constraints(n: usize, density: f64, rng: &mut ChaCha8Rng) -> ConstraintList {
    let mut list = ConstraintList::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(density) {
                list.push(i, j, rng.random_range(-1.0..1.0)).unwrap();
            }
        }
    }
    if list.is_empty() {
        list.push(0, n - 1, 1.0).unwrap();
    }
    list
}

/// Random symmetric dense `Q` with entries in `[-1, 1]`, diagonal included.
pub fn random_dense_q(graph: &AffinityGraph, rng: &mut ChaCha8Rng) -> ConstraintMatrix {
    let n = graph.n();
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let w = rng.random_range(-1.0..1.0);
            q[(i, j)] = w;
            q[(j, i)] = w;
        }
    }
    ConstraintMatrix::from_dense(SymMatrix::new(q).unwrap(), graph).unwrap()
}

/// Relabels clusters in order of first appearance.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}
