//! Constraint matrices and the β threshold.
//!
//! Side information is a symmetric matrix `Q`: `Q_ij > 0` says i and j
//! belong together, `Q_ij < 0` says they do not, and `|Q_ij|` is how strongly
//! we believe it. The solver works with the degree-normalized
//! `Q̄ = D^{-1/2}QD^{-1/2}`, and its spectrum bounds the admissible β.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::AffinityGraph;
use crate::linalg::{sym_eigenvalues, SymMatrix, Tolerances};

/// Pairwise beliefs as `(i, j, w)` triples.
///
/// Duplicate triples accumulate when materialized. Self-pairs are not
/// constraints; a diagonal for `Q` goes through [`ConstraintList::push_diagonal`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintList {
    n: usize,
    triples: Vec<(usize, usize, f64)>,
    diagonal: Vec<(usize, f64)>,
}

impl ConstraintList {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ..Self::default()
        }
    }

    pub fn from_triples(n: usize, triples: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut list = Self::new(n);
        for (i, j, w) in triples {
            list.push(i, j, w)?;
        }
        Ok(list)
    }

    pub fn push(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(Error::InvalidConstraint(format!("self-pair ({i}, {i})")));
        }
        if !w.is_finite() {
            return Err(Error::InvalidConstraint(format!("non-finite weight on ({i}, {j})")));
        }
        self.triples.push((i, j, w));
        Ok(())
    }

    /// Adds `w` to `Q_ii`.
    pub fn push_diagonal(&mut self, i: usize, w: f64) -> Result<()> {
        self.check_index(i)?;
        if !w.is_finite() {
            return Err(Error::InvalidConstraint(format!("non-finite diagonal weight at {i}")));
        }
        self.diagonal.push((i, w));
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::InvalidConstraint(format!("index {i} out of range for n = {}", self.n)));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn triples(&self) -> &[(usize, usize, f64)] {
        &self.triples
    }

    pub fn diagonal(&self) -> &[(usize, f64)] {
        &self.diagonal
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// True when no unordered pair carries both a positive and a negative weight.
    pub fn is_consistent(&self) -> bool {
        let mut signs: HashMap<(usize, usize), f64> = HashMap::new();
        for &(i, j, w) in &self.triples {
            if w == 0.0 {
                continue;
            }
            let key = (i.min(j), i.max(j));
            match signs.get(&key) {
                Some(&s) if s.signum() != w.signum() => return false,
                _ => {
                    signs.insert(key, w);
                }
            }
        }
        true
    }
}

/// `Q` together with `Q̄` and the cached ascending spectrum of `Q̄`.
#[derive(Debug, Clone)]
pub struct ConstraintMatrix {
    q: SymMatrix,
    qbar: SymMatrix,
    qbar_eigs: Vec<f64>,
    n_constraints: usize,
}

impl ConstraintMatrix {
    /// Normalizes an explicit `Q` by `graph`'s degrees.
    pub fn from_dense(q: SymMatrix, graph: &AffinityGraph) -> Result<Self> {
        if q.n() != graph.n() {
            return Err(Error::InvalidConstraint(format!(
                "constraint matrix is {0}x{0} but the graph has {1} nodes",
                q.n(),
                graph.n()
            )));
        }
        let qbar = q.scaled_congruence(graph.inv_sqrt_degrees());
        let qbar_eigs = sym_eigenvalues(&qbar)?;
        let n = q.n();
        let n_constraints = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| q.get(i, j) != 0.0)
            .count();
        Ok(Self {
            q,
            qbar,
            qbar_eigs,
            n_constraints,
        })
    }

    /// `Q = D`, so `Q̄ = I`: the encoding of "no side information" under
    /// which the constrained problem reduces to plain normalized cut.
    pub fn no_information(graph: &AffinityGraph) -> Result<Self> {
        Self::from_dense(SymMatrix::diagonal(graph.degrees())?, graph)
    }

    pub fn q(&self) -> &SymMatrix {
        &self.q
    }

    pub fn qbar(&self) -> &SymMatrix {
        &self.qbar
    }

    /// Ascending eigenvalues of `Q̄`.
    pub fn qbar_eigenvalues(&self) -> &[f64] {
        &self.qbar_eigs
    }

    pub fn lambda_min(&self) -> f64 {
        self.qbar_eigs[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.qbar_eigs[self.qbar_eigs.len() - 1]
    }

    /// The `k`-th largest eigenvalue of `Q̄`, 1-based.
    pub fn kth_largest(&self, k: usize) -> Option<f64> {
        let n = self.qbar_eigs.len();
        (1..=n).contains(&k).then(|| self.qbar_eigs[n - k])
    }

    /// Number of unordered off-diagonal pairs with nonzero belief.
    pub fn n_constraints(&self) -> usize {
        self.n_constraints
    }

    pub fn is_zero(&self) -> bool {
        self.q.is_zero()
    }

    /// Off-diagonal nonzero entries as an upper-triangular triple list.
    pub fn to_list(&self) -> ConstraintList {
        let n = self.q.n();
        let mut list = ConstraintList::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.q.get(i, j);
                if w != 0.0 {
                    list.triples.push((i, j, w));
                }
            }
        }
        list
    }
}

/// Builds `Q` from a triple list: each `(i, j, w)` adds `w` to both `Q_ij` and `Q_ji`.
pub fn materialize(list: &ConstraintList, graph: &AffinityGraph) -> Result<ConstraintMatrix> {
    if list.n() != graph.n() {
        return Err(Error::InvalidConstraint(format!(
            "constraint list is for {} nodes but the graph has {}",
            list.n(),
            graph.n()
        )));
    }
    let n = list.n();
    let mut q = DMatrix::zeros(n, n);
    for &(i, j, w) in list.triples() {
        if i >= n || j >= n || i == j {
            return Err(Error::InvalidConstraint(format!("bad pair ({i}, {j})")));
        }
        q[(i, j)] += w;
        q[(j, i)] += w;
    }
    for &(i, w) in list.diagonal() {
        q[(i, i)] += w;
    }
    ConstraintMatrix::from_dense(SymMatrix::new(q)?, graph)
}

/// `+1` for every labeled pair that shares a label, `−1` otherwise; `None` is unlabeled.
pub fn from_labels(labels: &[Option<usize>], graph: &AffinityGraph) -> Result<ConstraintMatrix> {
    if labels.len() != graph.n() {
        return Err(Error::InvalidConstraint(format!(
            "{} labels for a graph with {} nodes",
            labels.len(),
            graph.n()
        )));
    }
    let labeled = labels.iter().filter(|l| l.is_some()).count();
    if labeled < 2 {
        return Err(Error::InsufficientLabels(labeled));
    }
    let n = labels.len();
    let q = DMatrix::from_fn(n, n, |i, j| match (labels[i], labels[j]) {
        (Some(a), Some(b)) if i != j => {
            if a == b { 1.0 } else { -1.0 }
        }
        _ => 0.0,
    });
    ConstraintMatrix::from_dense(SymMatrix::symmetrized(q), graph)
}

/// Uses the source graph's affinity verbatim as soft must-links, normalized
/// by the target graph's degrees.
pub fn from_source_graph(source: &AffinityGraph, target: &AffinityGraph) -> Result<ConstraintMatrix> {
    if source.n() != target.n() {
        return Err(Error::InvalidConstraint(format!(
            "source has {} nodes, target has {}",
            source.n(),
            target.n()
        )));
    }
    ConstraintMatrix::from_dense(source.affinity().clone(), target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingStrategy {
    /// Any pair.
    Uniform,
    /// Only pairs whose same/different relation the baseline partition gets wrong.
    Misclustered,
}

/// Draws `m` distinct unordered pairs and labels each with its true relation.
pub fn sample_constraints(
    truth: &[usize],
    baseline: Option<&[usize]>,
    m: usize,
    seed: u64,
    strategy: SamplingStrategy,
) -> Result<ConstraintList> {
    let n = truth.len();
    if m == 0 {
        return Err(Error::InvalidInput("need at least one constraint".into()));
    }
    let candidates: Vec<(u32, u32)> = match strategy {
        SamplingStrategy::Uniform => all_pairs(n).collect(),
        SamplingStrategy::Misclustered => {
            let base = baseline.ok_or_else(|| {
                Error::InvalidInput("misclustered sampling needs a baseline partition".into())
            })?;
            if base.len() != n {
                return Err(Error::InvalidInput("baseline and truth differ in length".into()));
            }
            all_pairs(n)
                .filter(|&(i, j)| {
                    let (i, j) = (i as usize, j as usize);
                    (truth[i] == truth[j]) != (base[i] == base[j])
                })
                .collect()
        }
    };
    if m > candidates.len() {
        return Err(Error::InsufficientPairs {
            requested: m,
            available: candidates.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, candidates.len(), m);
    let mut list = ConstraintList::new(n);
    for k in picks.iter() {
        let (i, j) = candidates[k];
        let (i, j) = (i as usize, j as usize);
        let w = if truth[i] == truth[j] { 1.0 } else { -1.0 };
        list.triples.push((i, j, w));
    }
    Ok(list)
}

fn all_pairs(n: usize) -> impl Iterator<Item = (u32, u32)> {
    (0..n as u32).flat_map(move |i| ((i + 1)..n as u32).map(move |j| (i, j)))
}

/// How β is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaPolicy {
    Explicit(f64),
    /// `λlo·vol + t·(λhi − λlo)·vol` for `t ∈ (0, 1)`.
    Fraction(f64),
    /// `λmax·vol·(0.5 + 0.4·m/N²)` with `m` the number of constraints.
    Heuristic,
    /// Midway between the bound and the larger of the next eigenvalue below
    /// it (times vol) and `1ᵀQ1`. For two-way this leaves exactly one feasible
    /// cut: the one that best conforms to `Q`.
    SingleCut,
}

impl std::str::FromStr for BetaPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(BetaPolicy::Heuristic);
        }
        if s.eq_ignore_ascii_case("single") {
            return Ok(BetaPolicy::SingleCut);
        }
        if let Some(t) = s.strip_prefix("frac:") {
            return match t.parse::<f64>() {
                Ok(t) if t > 0.0 && t < 1.0 => Ok(BetaPolicy::Fraction(t)),
                _ => Err(format!("fraction must be in (0, 1), got `{t}`")),
            };
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(BetaPolicy::Explicit(v)),
            _ => Err(format!("beta must be a number, `auto`, `single`, or `frac:t`, got `{s}`")),
        }
    }
}

/// Which eigenvalue of `Q̄` caps β.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// Largest eigenvalue.
    TwoWay,
    /// `(K−1)`-th largest eigenvalue.
    KWay(usize),
    /// Second largest; the largest belongs to the source graph's trivial cut.
    Transfer,
}

/// The admissible upper bound `λ·vol` for β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaBound {
    pub eigenvalue: f64,
    pub vol: f64,
}

impl BetaBound {
    pub fn value(&self) -> f64 {
        self.eigenvalue * self.vol
    }
}

fn bound_rank(kind: BoundKind, graph: &AffinityGraph) -> Result<usize> {
    match kind {
        BoundKind::TwoWay => Ok(1),
        BoundKind::KWay(k) if k >= 2 => Ok(k - 1),
        BoundKind::KWay(k) => Err(Error::InvalidK { k, n: graph.n() }),
        BoundKind::Transfer => Ok(2),
    }
}

pub fn beta_bound(cm: &ConstraintMatrix, graph: &AffinityGraph, kind: BoundKind) -> Result<BetaBound> {
    let rank = bound_rank(kind, graph)?;
    let eigenvalue = cm
        .kth_largest(rank)
        .ok_or(Error::InvalidK { k: rank + 1, n: graph.n() })?;
    Ok(BetaBound {
        eigenvalue,
        vol: graph.vol(),
    })
}

/// Resolves `policy` to a concrete β and checks it against the bound.
///
/// `n_constraints` only matters for [`BetaPolicy::Heuristic`].
pub fn resolve_beta(
    policy: BetaPolicy,
    cm: &ConstraintMatrix,
    graph: &AffinityGraph,
    kind: BoundKind,
    n_constraints: usize,
) -> Result<f64> {
    let bound = beta_bound(cm, graph, kind)?;
    let vol = graph.vol();
    let slack = Tolerances::default().beta_slack * vol;
    let beta = match policy {
        BetaPolicy::Explicit(v) => v,
        BetaPolicy::Fraction(t) => {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidInput(format!("fraction must be in (0, 1), got {t}")));
            }
            let lo = cm.lambda_min() * vol;
            lo + t * (bound.value() - lo)
        }
        BetaPolicy::Heuristic => {
            let n = graph.n() as f64;
            let raw = cm.lambda_max() * vol * (0.5 + 0.4 * n_constraints as f64 / (n * n));
            raw.min(bound.value() - 1e-6 * vol)
        }
        BetaPolicy::SingleCut => {
            let below = cm.kth_largest(bound_rank(kind, graph)? + 1).unwrap_or(cm.lambda_min());
            let lo = (below * vol).max(cm.q().total());
            lo + 0.5 * (bound.value() - lo)
        }
    };
    if !beta.is_finite() || beta >= bound.value() - slack {
        return Err(Error::BetaOutOfRange {
            beta,
            bound: bound.value(),
            eigenvalue: bound.eigenvalue,
            vol,
        });
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::build_laplacian;

    fn path3() -> AffinityGraph {
        build_laplacian(
            SymMatrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn toy_qbar_spectrum() {
        let g = fixtures::toy_graph();
        let cm = fixtures::toy_constraints(&g);
        let eigs = cm.qbar_eigenvalues();
        for &e in &eigs[..5] {
            assert!(e.abs() < 1e-12);
        }
        assert!((eigs[5] - 2.6667).abs() < 5e-5);
        assert!((eigs[5] - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_list_is_zero() {
        let g = path3();
        let cm = materialize(&ConstraintList::new(3), &g).unwrap();
        assert!(cm.is_zero());
        assert!(cm.qbar_eigenvalues().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn single_must_link() {
        let g = path3();
        let cm = materialize(&ConstraintList::from_triples(3, [(0, 1, 1.0)]).unwrap(), &g).unwrap();
        let nonzero: Vec<f64> = cm.q().as_matrix().iter().copied().filter(|&x| x != 0.0).collect();
        assert_eq!(nonzero, vec![1.0, 1.0]);
    }

    #[test]
    fn duplicates_sum() {
        let g = path3();
        let list = ConstraintList::from_triples(3, [(0, 2, 0.5), (2, 0, 0.25)]).unwrap();
        let cm = materialize(&list, &g).unwrap();
        assert_eq!(cm.q().get(0, 2), 0.75);
        assert_eq!(cm.n_constraints(), 1);
    }

    #[test]
    fn bad_indices() {
        let mut list = ConstraintList::new(3);
        assert!(matches!(list.push(0, 3, 1.0), Err(Error::InvalidConstraint(_))));
        assert!(matches!(list.push(1, 1, 1.0), Err(Error::InvalidConstraint(_))));
        let g = fixtures::toy_graph();
        assert!(matches!(materialize(&ConstraintList::new(3), &g), Err(Error::InvalidConstraint(_))));
    }

    #[test]
    fn partial_labels() {
        let g = build_laplacian(SymMatrix::from_fn(4, |i, j| if i != j { 1.0 } else { 0.0 }).unwrap()).unwrap();
        let cm = from_labels(&[Some(0), Some(0), Some(1), None], &g).unwrap();
        let q = cm.q();
        assert_eq!(q.get(0, 1), 1.0);
        assert_eq!(q.get(0, 2), -1.0);
        assert_eq!(q.get(1, 2), -1.0);
        for k in 0..4 {
            assert_eq!(q.get(3, k), 0.0);
        }
        assert!(matches!(from_labels(&[Some(0), None, None, None], &g), Err(Error::InsufficientLabels(1))));
    }

    #[test]
    fn toy_coloring_reproduces_printed_q_off_diagonal() {
        let g = fixtures::toy_graph();
        let labels = [Some(0), Some(0), Some(0), Some(0), Some(1), Some(1)];
        let cm = from_labels(&labels, &g).unwrap();
        let printed = fixtures::toy_q();
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i == j { 0.0 } else { printed.get(i, j) };
                assert_eq!(cm.q().get(i, j), expected);
            }
        }
    }

    #[test]
    fn source_equal_target_gives_identity_minus_laplacian() {
        let g = fixtures::toy_graph();
        let cm = from_source_graph(&g, &g).unwrap();
        let expected = DMatrix::identity(6, 6) - g.lbar().as_matrix();
        assert!((cm.qbar().as_matrix() - expected).amax() < 1e-14);
    }

    #[test]
    fn toy_beta_bounds() {
        let g = fixtures::toy_graph();
        let cm = fixtures::toy_constraints(&g);
        let vol = g.vol();
        assert_eq!(resolve_beta(BetaPolicy::Explicit(vol), &cm, &g, BoundKind::TwoWay, 0).unwrap(), 14.0);
        let err = resolve_beta(BetaPolicy::Explicit(3.0 * vol), &cm, &g, BoundKind::TwoWay, 0).unwrap_err();
        match err {
            Error::BetaOutOfRange { eigenvalue, .. } => assert!((eigenvalue - 2.6667).abs() < 1e-4),
            other => panic!("{other:?}"),
        }
        let h = resolve_beta(BetaPolicy::Heuristic, &cm, &g, BoundKind::TwoWay, 0).unwrap();
        assert!((h - 0.5 * cm.lambda_max() * vol).abs() < 1e-12);
    }

    #[test]
    fn fraction_is_monotone() {
        let g = fixtures::toy_graph();
        let cm = fixtures::toy_constraints(&g);
        let mut prev = f64::NEG_INFINITY;
        for k in 1..20 {
            let b = resolve_beta(BetaPolicy::Fraction(k as f64 / 20.0), &cm, &g, BoundKind::TwoWay, 0).unwrap();
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("auto".parse::<BetaPolicy>().unwrap(), BetaPolicy::Heuristic);
        assert_eq!("frac:0.25".parse::<BetaPolicy>().unwrap(), BetaPolicy::Fraction(0.25));
        assert_eq!("14".parse::<BetaPolicy>().unwrap(), BetaPolicy::Explicit(14.0));
        assert!("frac:1".parse::<BetaPolicy>().is_err());
        assert_eq!("single".parse::<BetaPolicy>().unwrap(), BetaPolicy::SingleCut);
    }

    #[test]
    fn misclustered_needs_disagreement() {
        let truth = [0, 0, 1, 1];
        let err = sample_constraints(&truth, Some(&truth), 1, 0, SamplingStrategy::Misclustered).unwrap_err();
        assert!(matches!(err, Error::InsufficientPairs { available: 0, .. }));
    }

    #[test]
    fn single_pair_uniform() {
        let list = sample_constraints(&[0, 1], None, 1, 5, SamplingStrategy::Uniform).unwrap();
        assert_eq!(list.triples(), &[(0, 1, -1.0)]);
        let list = sample_constraints(&[2, 2], None, 1, 5, SamplingStrategy::Uniform).unwrap();
        assert_eq!(list.triples(), &[(0, 1, 1.0)]);
    }

    #[test]
    fn misclustered_pairs_are_the_wrong_ones() {
        let truth = [0, 0, 0, 1, 1, 1];
        let base = [0, 0, 1, 1, 1, 1];
        let list = sample_constraints(&truth, Some(&base), 5, 3, SamplingStrategy::Misclustered).unwrap();
        for &(i, j, w) in list.triples() {
            assert_ne!(truth[i] == truth[j], base[i] == base[j]);
            assert_eq!(w > 0.0, truth[i] == truth[j]);
        }
        assert!(sample_constraints(&truth, Some(&base), 6, 3, SamplingStrategy::Misclustered).is_err());
    }
}
