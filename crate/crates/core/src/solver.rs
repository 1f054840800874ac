//! Constrained spectral cuts.
//!
//! For a threshold β the candidate cuts are the generalized eigenvectors of
//!
//! ```text
//! L̄·v = λ·(Q̄ − (β/vol)·I)·v
//! ```
//!
//! with `λ > 0`, rescaled to `vᵀv = vol`, minus the trivial vector
//! `D^{1/2}1`. Each candidate has a cost `γ = vᵀL̄v` and a purity
//! `α = vᵀQ̄v`. Multiplying the equation by `vᵀ` gives `γ = λ(α − β)`,
//! so every candidate satisfies `α > β`. The best 2-way cut is the candidate
//! with minimum cost. K-way uses the `K−1` cheapest.
//!
//! The Lagrange multiplier of the normalization constraint never appears
//! here. It is `μ = −λβ/vol` if needed.

use nalgebra::{DMatrix, DVector};

use crate::constraints::{
    beta_bound, from_source_graph, resolve_beta, BetaPolicy, BoundKind, ConstraintMatrix,
};
use crate::error::{Error, Result};
use crate::graph::AffinityGraph;
use crate::linalg::{kmeans, solve_pencil_with, sym_eigenvalues, SymMatrix, Tolerances};

/// Restarts used for every K-means discretization.
pub const KMEANS_RESTARTS: usize = 10;

/// Seed used where an operation has no seed parameter.
pub const DEFAULT_SEED: u64 = 0;

/// One candidate cut.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleCut {
    /// Generalized eigenvalue.
    pub lambda: f64,
    /// `vᵀv = vol`.
    pub v: DVector<f64>,
    /// Relaxed indicator `D^{-1/2}v`.
    pub u: DVector<f64>,
    /// `vᵀL̄v`.
    pub cost: f64,
    /// `vᵀQ̄v`.
    pub purity: f64,
    /// Position in the ascending pencil spectrum.
    pub index: usize,
}

/// Feasible cuts for one β, cheapest first, plus what was filtered out.
#[derive(Debug, Clone)]
pub struct FeasibleSet {
    pub beta: f64,
    pub cuts: Vec<FeasibleCut>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub n_feasible: usize,
    pub filtered_complex: usize,
    pub filtered_nonpositive: usize,
    pub filtered_infinite: usize,
    pub filtered_trivial: usize,
    pub filtered_residual: usize,
}

impl Diagnostics {
    fn no_feasible(&self, needed: usize) -> Error {
        Error::NoFeasibleCut {
            needed,
            found: self.n_feasible,
            filtered_complex: self.filtered_complex,
            filtered_nonpositive: self.filtered_nonpositive,
            filtered_infinite: self.filtered_infinite,
            filtered_trivial: self.filtered_trivial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KWayMode {
    /// K-means on the rows of `D^{-1/2}V*`.
    Embed,
    /// K-means on `sign(D^{-1/2}V*)`.
    Sign,
    /// K-means on `sign(D^{-1/2}V*(V*ᵀL̄V*)⁻¹)`.
    WeightedSign,
}

impl std::str::FromStr for KWayMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "embed" => Ok(KWayMode::Embed),
            "sign" => Ok(KWayMode::Sign),
            "wsign" => Ok(KWayMode::WeightedSign),
            _ => Err(format!("unknown k-way mode `{s}` (expected embed, sign or wsign)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionSource {
    TwoWay,
    KWay(KWayMode),
    Transfer,
    Unconstrained,
}

/// How a 2-way indicator becomes labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TwoWaySplit {
    /// `u_i ≥ 0` → cluster 0, otherwise cluster 1.
    #[default]
    Sign,
    /// 2-means on the entries of `u`.
    KMeans,
}

impl std::str::FromStr for TwoWaySplit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sign" => Ok(TwoWaySplit::Sign),
            "kmeans" => Ok(TwoWaySplit::KMeans),
            _ => Err(format!("unknown split `{s}` (expected sign or kmeans)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub k: usize,
    /// β actually used; `None` for unconstrained cuts.
    pub beta: Option<f64>,
    pub source: PartitionSource,
    /// The cut(s) the labels were derived from, cheapest first.
    pub cuts: Vec<FeasibleCut>,
    pub diagnostics: Diagnostics,
}

impl Partition {
    /// The relaxed indicator of the chosen cut.
    pub fn indicator(&self) -> Option<&DVector<f64>> {
        self.cuts.first().map(|c| &c.u)
    }

    /// Relabels a 2-way partition from its indicator.
    pub fn resplit(&self, split: TwoWaySplit) -> Result<Partition> {
        let u = self
            .indicator()
            .ok_or_else(|| Error::InvalidInput("partition has no indicator to split".into()))?;
        Ok(Partition {
            labels: split_indicator(u, split)?,
            ..self.clone()
        })
    }
}

/// Discretizes a relaxed 2-way indicator.
pub fn split_indicator(u: &DVector<f64>, split: TwoWaySplit) -> Result<Vec<usize>> {
    match split {
        TwoWaySplit::Sign => Ok(u.iter().map(|&x| if x >= 0.0 { 0 } else { 1 }).collect()),
        TwoWaySplit::KMeans => {
            let rows = DMatrix::from_column_slice(u.len(), 1, u.as_slice());
            let km = kmeans(&rows, 2, DEFAULT_SEED, KMEANS_RESTARTS)?;
            // Cluster containing the largest entry is 0, matching the sign split.
            let top = km.labels[argmax(u)];
            Ok(km.labels.iter().map(|&l| usize::from(l != top)).collect())
        }
    }
}

fn argmax(u: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..u.len() {
        if u[i] > u[best] {
            best = i;
        }
    }
    best
}

/// Solves the generalized eigenproblem for `beta` and keeps the feasible cuts.
///
/// Does not check β against any bound; [`resolve_beta`] does that.
pub fn feasible_set(graph: &AffinityGraph, cm: &ConstraintMatrix, beta: f64) -> Result<FeasibleSet> {
    if cm.q().n() != graph.n() {
        return Err(Error::InvalidConstraint("constraint matrix and graph differ in size".into()));
    }
    let tol = Tolerances::default();
    let vol = graph.vol();
    let b = cm.qbar().shifted(beta / vol);
    let pencil = solve_pencil_with(graph.lbar(), Some(graph.spectrum()?), &b, &tol)?;
    let trivial = graph.trivial_vector().normalize();
    let scale = vol.sqrt();
    let mut diagnostics = Diagnostics {
        filtered_complex: pencil.filtered_complex,
        filtered_infinite: pencil.filtered_infinite,
        filtered_residual: pencil.filtered_residual,
        ..Diagnostics::default()
    };
    let mut cuts = Vec::new();
    for (index, pair) in pencil.pairs.iter().enumerate() {
        if pair.value <= tol.positive_lambda {
            diagnostics.filtered_nonpositive += 1;
            continue;
        }
        let unit = &pair.vector;
        if trivial.dot(unit).abs() >= 1.0 - tol.trivial_cos {
            diagnostics.filtered_trivial += 1;
            continue;
        }
        let v = unit * scale;
        cuts.push(FeasibleCut {
            lambda: pair.value,
            u: graph.to_indicator(&v),
            cost: graph.lbar().quad_form(&v),
            purity: cm.qbar().quad_form(&v),
            v,
            index,
        });
    }
    cuts.sort_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then(b.purity.total_cmp(&a.purity))
            .then(a.index.cmp(&b.index))
    });
    diagnostics.n_feasible = cuts.len();
    if cuts.is_empty() {
        return Err(diagnostics.no_feasible(1));
    }
    Ok(FeasibleSet {
        beta,
        cuts,
        diagnostics,
    })
}

fn two_way_partition(set: FeasibleSet, source: PartitionSource) -> Result<Partition> {
    let best = set.cuts.into_iter().next().expect("non-empty feasible set");
    Ok(Partition {
        labels: split_indicator(&best.u, TwoWaySplit::Sign)?,
        k: 2,
        beta: Some(set.beta),
        source,
        cuts: vec![best],
        diagnostics: set.diagnostics,
    })
}

/// Two-way constrained cut.
///
/// An all-zero `Q` under a fraction or heuristic policy has no admissible β
/// (its bound is 0); it is treated as carrying no information and solved as
/// `Q̄ = I`, `β = 0`, which is plain normalized cut.
pub fn csp_two_way(graph: &AffinityGraph, cm: &ConstraintMatrix, policy: BetaPolicy) -> Result<Partition> {
    if cm.is_zero() && !matches!(policy, BetaPolicy::Explicit(_)) {
        let identity = ConstraintMatrix::no_information(graph)?;
        return two_way_partition(feasible_set(graph, &identity, 0.0)?, PartitionSource::TwoWay);
    }
    let beta = resolve_beta(policy, cm, graph, BoundKind::TwoWay, cm.n_constraints())?;
    csp_two_way_at(graph, cm, beta)
}

/// Two-way cut for an already-resolved β.
pub fn csp_two_way_at(graph: &AffinityGraph, cm: &ConstraintMatrix, beta: f64) -> Result<Partition> {
    two_way_partition(feasible_set(graph, cm, beta)?, PartitionSource::TwoWay)
}

/// K-way constrained partition from the `K−1` cheapest feasible cuts.
pub fn csp_k_way(
    graph: &AffinityGraph,
    cm: &ConstraintMatrix,
    policy: BetaPolicy,
    k: usize,
    mode: KWayMode,
    seed: u64,
) -> Result<Partition> {
    if k < 2 || k > graph.n() {
        return Err(Error::InvalidK { k, n: graph.n() });
    }
    let beta = resolve_beta(policy, cm, graph, BoundKind::KWay(k), cm.n_constraints())?;
    csp_k_way_at(graph, cm, beta, k, mode, seed)
}

pub fn csp_k_way_at(
    graph: &AffinityGraph,
    cm: &ConstraintMatrix,
    beta: f64,
    k: usize,
    mode: KWayMode,
    seed: u64,
) -> Result<Partition> {
    if k < 2 || k > graph.n() {
        return Err(Error::InvalidK { k, n: graph.n() });
    }
    let set = feasible_set(graph, cm, beta)?;
    if set.cuts.len() < k - 1 {
        return Err(set.diagnostics.no_feasible(k - 1));
    }
    let cuts: Vec<FeasibleCut> = set.cuts.into_iter().take(k - 1).collect();
    let n = graph.n();
    let v_star = DMatrix::from_fn(n, k - 1, |i, c| cuts[c].v[i]);
    let rows = match mode {
        KWayMode::Embed => indicator_rows(graph, &v_star),
        KWayMode::Sign => sign_matrix(&indicator_rows(graph, &v_star)),
        KWayMode::WeightedSign => sign_matrix(&weighted_embedding(graph.lbar(), graph.inv_sqrt_degrees(), &v_star)?),
    };
    let km = kmeans(&rows, k, seed, KMEANS_RESTARTS)?;
    Ok(Partition {
        labels: km.labels,
        k,
        beta: Some(beta),
        source: PartitionSource::KWay(mode),
        cuts,
        diagnostics: set.diagnostics,
    })
}

fn indicator_rows(graph: &AffinityGraph, v: &DMatrix<f64>) -> DMatrix<f64> {
    let s = graph.inv_sqrt_degrees();
    DMatrix::from_fn(v.nrows(), v.ncols(), |i, c| s[i] * v[(i, c)])
}

fn sign_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|x| if x >= 0.0 { 1.0 } else { -1.0 })
}

/// `D^{-1/2}·V·(VᵀL̄V)⁻¹`: columns weighted by inverse cost.
pub fn weighted_embedding(lbar: &SymMatrix, inv_sqrt_deg: &[f64], v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let w = SymMatrix::new(v.transpose() * lbar.as_matrix() * v)?;
    let vals = sym_eigenvalues(&w)?;
    let scale = vals.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let smallest = vals.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if smallest <= 1e-12 * scale.max(1.0) {
        return Err(Error::SingularWeighting);
    }
    let w_inv = w.into_inner().try_inverse().ok_or(Error::SingularWeighting)?;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, c| inv_sqrt_deg[i] * v[(i, c)]);
    Ok(scaled * w_inv)
}

/// Plain normalized-cut spectral clustering.
///
/// For `k = 2` the Fiedler vector is returned as a cut with `Q̄ = I`,
/// `β = 0` semantics: purity `vᵀv = vol` and `cost = λ·vol`.
pub fn unconstrained_ncut(graph: &AffinityGraph, k: usize) -> Result<Partition> {
    let n = graph.n();
    if k < 2 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let spec = graph.spectrum()?;
    let scale = graph.vol().sqrt();
    let cuts: Vec<FeasibleCut> = (1..k)
        .map(|idx| {
            let v = spec.vectors.column(idx).into_owned() * scale;
            FeasibleCut {
                lambda: spec.values[idx],
                u: graph.to_indicator(&v),
                cost: graph.lbar().quad_form(&v),
                purity: v.norm_squared(),
                v,
                index: idx,
            }
        })
        .collect();
    let labels = if k == 2 {
        split_indicator(&cuts[0].u, TwoWaySplit::Sign)?
    } else {
        let rows = DMatrix::from_fn(n, k - 1, |i, c| cuts[c].u[i]);
        kmeans(&rows, k, DEFAULT_SEED, KMEANS_RESTARTS)?.labels
    };
    Ok(Partition {
        labels,
        k,
        beta: None,
        source: PartitionSource::Unconstrained,
        cuts,
        diagnostics: Diagnostics::default(),
    })
}

#[derive(Debug, Clone)]
pub struct TransferResult {
    pub partition: Partition,
    /// Cost `γ` of the selected cut on the target graph.
    pub transfer_cost: f64,
}

/// Constrained cut of `target` using `source`'s affinities as soft must-links.
pub fn transfer_cut(target: &AffinityGraph, source: &AffinityGraph, policy: BetaPolicy) -> Result<TransferResult> {
    let cm = from_source_graph(source, target)?;
    let beta = resolve_beta(policy, &cm, target, BoundKind::Transfer, cm.n_constraints())?;
    let partition = two_way_partition(feasible_set(target, &cm, beta)?, PartitionSource::Transfer)?;
    Ok(TransferResult {
        transfer_cost: partition.cuts[0].cost,
        partition,
    })
}

/// Upper β bound that applies to a run with `k` clusters.
pub fn bound_for(cm: &ConstraintMatrix, graph: &AffinityGraph, k: usize) -> Result<f64> {
    let kind = if k == 2 { BoundKind::TwoWay } else { BoundKind::KWay(k) };
    Ok(beta_bound(cm, graph, kind)?.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JnrOrigin {
    UnconstrainedEigvec,
    FeasibleCut,
}

/// A point of the joint numerical range `{(vᵀL̄v, vᵀQ̄v) : vᵀv = 1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JnrSample {
    pub cost_coord: f64,
    pub purity_coord: f64,
    pub origin: JnrOrigin,
}

/// Maps cuts (and optionally every eigenvector of `L̄`) into the joint numerical range.
pub fn jnr_samples(
    graph: &AffinityGraph,
    cm: &ConstraintMatrix,
    cuts: &[FeasibleCut],
    include_unconstrained: bool,
) -> Result<Vec<JnrSample>> {
    let sample = |v: DVector<f64>, origin| {
        let v = v.normalize();
        JnrSample {
            cost_coord: graph.lbar().quad_form(&v),
            purity_coord: cm.qbar().quad_form(&v),
            origin,
        }
    };
    let mut out = Vec::new();
    if include_unconstrained {
        let spec = graph.spectrum()?;
        for c in 0..graph.n() {
            out.push(sample(spec.vectors.column(c).into_owned(), JnrOrigin::UnconstrainedEigvec));
        }
    }
    out.extend(cuts.iter().map(|c| sample(c.v.clone(), JnrOrigin::FeasibleCut)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{materialize, ConstraintList};
    use crate::fixtures;

    #[test]
    fn toy_unconstrained_cut_is_at_the_bridge() {
        let g = fixtures::toy_graph();
        let p = unconstrained_ncut(&g, 2).unwrap();
        assert_eq!(p.labels[0], p.labels[1]);
        assert_eq!(p.labels[1], p.labels[2]);
        assert_eq!(p.labels[3], p.labels[4]);
        assert_eq!(p.labels[4], p.labels[5]);
        assert_ne!(p.labels[0], p.labels[3]);
    }

    #[test]
    fn empty_constraints_fall_back_to_ncut() {
        let g = fixtures::toy_graph();
        let cm = materialize(&ConstraintList::new(6), &g).unwrap();
        let p = csp_two_way(&g, &cm, BetaPolicy::Fraction(0.5)).unwrap();
        let base = unconstrained_ncut(&g, 2).unwrap();
        assert_eq!(p.labels, base.labels);
    }

    #[test]
    fn toy_beta_two_vol_moves_node_four() {
        let g = fixtures::toy_graph();
        let cm = fixtures::toy_constraints(&g);
        let p = csp_two_way(&g, &cm, BetaPolicy::Explicit(2.0 * g.vol())).unwrap();
        assert_eq!(p.labels, vec![0, 0, 0, 0, 1, 1]);
    }

    #[test]
    fn single_cut_policy_leaves_one_cut() {
        let g = fixtures::toy_graph();
        let cm = fixtures::toy_constraints(&g);
        // Q = ccᵀ with four +1 and two −1 colors: 1ᵀQ1 = 4 exceeds λ₂·vol = 0.
        let beta = resolve_beta(BetaPolicy::SingleCut, &cm, &g, BoundKind::TwoWay, 0).unwrap();
        assert!((beta - (4.0 + 0.5 * (8.0 / 3.0 * g.vol() - 4.0))).abs() < 1e-9);
        let set = feasible_set(&g, &cm, beta).unwrap();
        assert_eq!(set.cuts.len(), 1);
    }

    #[test]
    fn weighted_embedding_rejects_zero_cost_column() {
        let g = fixtures::toy_graph();
        let trivial = g.trivial_vector();
        let v = DMatrix::from_fn(6, 2, |i, c| if c == 0 { trivial[i] } else { (i as f64) - 2.5 });
        let err = weighted_embedding(g.lbar(), g.inv_sqrt_degrees(), &v).unwrap_err();
        assert!(matches!(err, Error::SingularWeighting));
    }

    #[test]
    fn kmeans_split_orients_like_sign() {
        let u = DVector::from_vec(vec![1.5, 1.4, 1.2, 0.4, -0.2, -0.2]);
        assert_eq!(split_indicator(&u, TwoWaySplit::KMeans).unwrap(), vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(split_indicator(&u, TwoWaySplit::Sign).unwrap(), vec![0, 0, 0, 0, 1, 1]);
    }

    #[test]
    fn jnr_of_trivial_vector_has_zero_cost() {
        let g = fixtures::toy_graph();
        let cm = fixtures::toy_constraints(&g);
        let samples = jnr_samples(&g, &cm, &[], true).unwrap();
        assert_eq!(samples.len(), 6);
        assert!(samples[0].cost_coord.abs() < 1e-12);
        assert!(samples.windows(2).all(|w| w[0].cost_coord <= w[1].cost_coord + 1e-12));
    }
}
