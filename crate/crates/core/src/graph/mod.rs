//! Affinity graphs, their degree structure, and the normalized Laplacian.
//!
//! An [`AffinityGraph`] is always connected with strictly positive degrees.
//! That is what makes `L̄ = I − D^{-1/2}AD^{-1/2}` have exactly one zero
//! eigenvalue, with eigenvector `D^{1/2}1`.

mod datasets;

use std::collections::VecDeque;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io::{self, GraphFormat};
use crate::linalg::{sym_decompose, SymEigen, SymMatrix};

pub use datasets::{gaussian_blobs, two_moons};

/// Points in `ℝᵈ`, optionally with ground-truth class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: DMatrix<f64>,
    labels: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(coords: DMatrix<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if coords.nrows() == 0 || coords.ncols() == 0 {
            return Err(Error::InvalidInput("point cloud is empty".into()));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("point coordinates must be finite".into()));
        }
        if let Some(l) = &labels {
            if l.len() != coords.nrows() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} points",
                    l.len(),
                    coords.nrows()
                )));
            }
        }
        Ok(Self { coords, labels })
    }

    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::InvalidInput(format!("{} labels for {} points", labels.len(), self.n())));
        }
        self.labels = Some(labels);
        Ok(self)
    }
}

/// RBF kernel width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    Fixed(f64),
    /// Median of all pairwise Euclidean distances.
    Auto,
}

impl std::str::FromStr for Sigma {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Sigma::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Sigma::Fixed(v)),
            _ => Err(format!("sigma must be a positive number or `auto`, got `{s}`")),
        }
    }
}

/// A connected weighted graph with its degrees, volume and normalized Laplacian.
#[derive(Debug, Clone)]
pub struct AffinityGraph {
    a: SymMatrix,
    degrees: Vec<f64>,
    vol: f64,
    lbar: SymMatrix,
    sqrt_deg: Vec<f64>,
    inv_sqrt_deg: Vec<f64>,
    spectrum: OnceLock<SymEigen>,
}

impl AffinityGraph {
    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn affinity(&self) -> &SymMatrix {
        &self.a
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn vol(&self) -> f64 {
        self.vol
    }

    /// `L̄ = I − D^{-1/2}AD^{-1/2}`.
    pub fn lbar(&self) -> &SymMatrix {
        &self.lbar
    }

    pub fn sqrt_degrees(&self) -> &[f64] {
        &self.sqrt_deg
    }

    pub fn inv_sqrt_degrees(&self) -> &[f64] {
        &self.inv_sqrt_deg
    }

    /// `D^{1/2}1`, the null vector of `L̄`.
    pub fn trivial_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.sqrt_deg)
    }

    /// `u = D^{-1/2}v`.
    pub fn to_indicator(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| v[i] * self.inv_sqrt_deg[i])
    }

    /// Eigen-decomposition of `L̄`, computed once and cached.
    pub fn spectrum(&self) -> Result<&SymEigen> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let s = sym_decompose(&self.lbar)?;
        Ok(self.spectrum.get_or_init(|| s))
    }
}

/// Validates `a` and derives degrees, volume and `L̄`.
pub fn build_laplacian(a: SymMatrix) -> Result<AffinityGraph> {
    let n = a.n();
    for i in 0..n {
        if a.get(i, i) != 0.0 {
            return Err(Error::InvalidMatrix(format!("self-loop at node {i}: affinity diagonal must be 0")));
        }
        for j in 0..n {
            if a.get(i, j) < 0.0 {
                return Err(Error::InvalidMatrix(format!("negative affinity at ({i}, {j})")));
            }
        }
    }
    let degrees: Vec<f64> = (0..n).map(|i| a.as_matrix().row(i).sum()).collect();
    if let Some(i) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::IsolatedNode(i));
    }
    let reached = reachable_from_zero(&a);
    if reached < n {
        return Err(Error::DisconnectedGraph { reached, n });
    }
    let vol = degrees.iter().sum();
    let sqrt_deg: Vec<f64> = degrees.iter().map(|d| d.sqrt()).collect();
    let inv_sqrt_deg: Vec<f64> = sqrt_deg.iter().map(|s| s.recip()).collect();
    let lbar = SymMatrix::symmetrized(DMatrix::from_fn(n, n, |i, j| {
        let off = a.get(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
        if i == j { 1.0 - off } else { -off }
    }));
    Ok(AffinityGraph {
        a,
        degrees,
        vol,
        lbar,
        sqrt_deg,
        inv_sqrt_deg,
        spectrum: OnceLock::new(),
    })
}

fn reachable_from_zero(a: &SymMatrix) -> usize {
    let n = a.n();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && a.get(i, j) > 0.0 {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count
}

fn pairwise_sq_dists(points: &PointCloud) -> DMatrix<f64> {
    let x = points.coords();
    let n = points.n();
    DMatrix::from_fn(n, n, |i, j| {
        (0..x.ncols()).map(|d| (x[(i, d)] - x[(j, d)]).powi(2)).sum::<f64>()
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) }
}

/// Resolves [`Sigma::Auto`] against `points`.
pub fn resolve_sigma(points: &PointCloud, sigma: Sigma) -> Result<f64> {
    match sigma {
        Sigma::Fixed(s) if s > 0.0 && s.is_finite() => Ok(s),
        Sigma::Fixed(s) => Err(Error::InvalidInput(format!("sigma must be positive, got {s}"))),
        Sigma::Auto => {
            let d2 = pairwise_sq_dists(points);
            let n = points.n();
            let dists: Vec<f64> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| d2[(i, j)].sqrt())
                .collect();
            if dists.is_empty() {
                return Err(Error::DegenerateData("need at least 2 points".into()));
            }
            let m = median(dists);
            if m <= 0.0 {
                return Err(Error::DegenerateData("median pairwise distance is 0".into()));
            }
            Ok(m)
        }
    }
}

/// `a_ij = exp(−‖xᵢ−xⱼ‖² / 2σ²)`, zero diagonal.
pub fn rbf_affinity(points: &PointCloud, sigma: Sigma) -> Result<AffinityGraph> {
    if points.n() < 2 {
        return Err(Error::DegenerateData("need at least 2 points".into()));
    }
    let s = resolve_sigma(points, sigma)?;
    let d2 = pairwise_sq_dists(points);
    let scale = 1.0 / (2.0 * s * s);
    let a = DMatrix::from_fn(points.n(), points.n(), |i, j| {
        if i == j { 0.0 } else { (-d2[(i, j)] * scale).exp() }
    });
    build_laplacian(SymMatrix::symmetrized(a))
}

/// Cosine similarity between rows, negatives clamped to 0, zero diagonal.
pub fn cosine_affinity(vectors: &DMatrix<f64>) -> Result<AffinityGraph> {
    let n = vectors.nrows();
    if n < 2 {
        return Err(Error::DegenerateData("need at least 2 vectors".into()));
    }
    if vectors.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("vectors must be finite".into()));
    }
    let norms: Vec<f64> = (0..n).map(|i| vectors.row(i).norm()).collect();
    if let Some(i) = norms.iter().position(|&x| x == 0.0) {
        return Err(Error::DegenerateData(format!("row {i} is all zeros")));
    }
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (vectors.row(i).dot(&vectors.row(j)) / (norms[i] * norms[j])).max(0.0)
        }
    });
    build_laplacian(SymMatrix::symmetrized(a))
}

/// What [`load_graph`] produced.
#[derive(Debug, Clone)]
pub enum LoadedGraph {
    Points(PointCloud),
    Graph(AffinityGraph),
}

pub fn load_graph(path: &Path, format: GraphFormat) -> Result<LoadedGraph> {
    match format {
        GraphFormat::PointsCsv => Ok(LoadedGraph::Points(io::read_points(path, false)?)),
        GraphFormat::EdgeList => Ok(LoadedGraph::Graph(build_laplacian(io::read_edge_list(path)?)?)),
        GraphFormat::DenseCsv => Ok(LoadedGraph::Graph(build_laplacian(io::read_dense(path)?)?)),
    }
}
