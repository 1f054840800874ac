//! Dense numerical substrate: symmetric matrices, symmetric and generalized
//! eigensolvers, and seeded K-means.
//!
//! Everything here is a pure function over immutable inputs. Matrices are
//! `nalgebra` types; symmetric eigendecomposition runs on `faer`, whose
//! solver stays finite on the sparse, block-decoupled matrices that
//! constraint sets produce. What this module adds is the contract the
//! clustering code depends on (sorted output, a fixed eigenvector sign, the
//! tolerance record, and the pencil reduction in [`pencil`]).

mod kmeans;
mod pencil;

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use kmeans::{kmeans, KMeansResult};
pub use pencil::{solve_pencil, solve_pencil_with, PencilRoute, PencilSolution};

/// Numerical tolerances shared by every module.
///
/// The defaults are the values the test suite is written against; changing
/// them changes which eigenpairs count as feasible.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Tolerances {
    /// Symmetric eigenpair residual, relative to `1 + |value|`.
    pub sym_residual: f64,
    /// `|Im λ| ≤ reality·(1 + |Re λ|)` for a pencil eigenvalue to count as real.
    pub reality: f64,
    /// Pencil eigenpair residual, relative to `(1 + |λ|)·‖v‖∞`.
    pub pencil_residual: f64,
    /// `b` is treated as positive definite when its smallest eigenvalue exceeds this.
    pub definite: f64,
    /// Ridge values tried, in order, when the deflated pivot block is singular.
    pub jitter_ladder: [f64; 3],
    /// Eigenvalues of `a` at or below `null_space·max(1, λmax(a))` span its null space.
    pub null_space: f64,
    /// Reciprocal eigenvalues `|θ| ≤ infinite·max|θ|` are treated as λ = ∞.
    pub infinite: f64,
    /// A generalized eigenvalue must exceed this to be a feasible cut.
    pub positive_lambda: f64,
    /// Cuts with `|cos∠(v, D^{1/2}1)| ≥ 1 − trivial_cos` are the trivial solution.
    pub trivial_cos: f64,
    /// Strict-bound slack on β, in units of vol.
    pub beta_slack: f64,
    /// K-means stops once no center moves farther than this.
    pub kmeans_shift: f64,
    pub kmeans_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sym_residual: 1e-8,
            reality: 1e-8,
            pencil_residual: 1e-6,
            definite: 1e-10,
            jitter_ladder: [1e-12, 1e-10, 1e-8],
            null_space: 1e-10,
            infinite: 1e-12,
            positive_lambda: 1e-8,
            trivial_cos: 1e-6,
            beta_slack: 1e-12,
            kmeans_shift: 1e-6,
            kmeans_max_iter: 100,
        }
    }
}

/// A dense, exactly symmetric matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Symmetrizes `m` as `(m + mᵀ)/2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "matrix is not square: {} x {}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidMatrix("matrix is empty".into()));
        }
        if let Some(pos) = m.iter().position(|x| !x.is_finite()) {
            let n = m.nrows();
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at ({}, {})",
                pos % n,
                pos / n
            )));
        }
        Ok(Self::symmetrized(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidMatrix("rows are not all of length n".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, f))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    // Caller guarantees finiteness.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// `vᵀ·M·v`.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.0 * v))
    }

    /// `M − s·I`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] -= s;
        }
        Self(m)
    }

    /// `diag(s)·M·diag(s)`, which preserves symmetry.
    pub fn scaled_congruence(&self, s: &[f64]) -> Self {
        let n = self.n();
        Self(DMatrix::from_fn(n, n, |i, j| s[i] * self.0[(i, j)] * s[j]))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    /// `1ᵀ·M·1`.
    pub fn total(&self) -> f64 {
        self.0.sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// One eigenpair with unit-norm vector in canonical sign.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: DVector<f64>,
    /// Magnitude of the imaginary part discarded by the reality filter.
    pub imag_residual: f64,
}

/// Ascending eigen-decomposition of a symmetric matrix, columns in canonical sign.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn pairs(&self) -> Vec<EigenPair> {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &value)| EigenPair {
                value,
                vector: self.vectors.column(k).into_owned(),
                imag_residual: 0.0,
            })
            .collect()
    }
}

/// Flips `v` so that its entry of largest magnitude is positive; ties go to
/// the lowest index.
pub fn canonicalize_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Full eigendecomposition, ascending, unit eigenvectors with canonical sign.
///
/// The matrix is split into the connected components of its off-diagonal
/// nonzero pattern and each block is solved on its own. This is exact, and
/// it keeps the dense solvers away from exactly decoupled input, on which
/// they can fail to converge.
pub fn sym_decompose(m: &SymMatrix) -> Result<SymEigen> {
    let n = m.n();
    let mut pairs: Vec<(f64, DVector<f64>)> = Vec::with_capacity(n);
    for block in components(m) {
        let (values, vectors) = block_eig(m, &block, true)?;
        for (k, value) in values.into_iter().enumerate() {
            let mut v = DVector::zeros(n);
            for (r, &i) in block.iter().enumerate() {
                v[i] = vectors[(r, k)];
            }
            pairs.push((value, v));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut vectors = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, (value, mut v)) in pairs.into_iter().enumerate() {
        let norm = v.norm();
        if norm > 0.0 {
            v /= norm;
        }
        canonicalize_sign(&mut v);
        vectors.set_column(dst, &v);
        values.push(value);
    }
    Ok(SymEigen { values, vectors })
}

/// Connected components of the off-diagonal nonzero pattern, each sorted,
/// ordered by smallest member.
fn components(m: &SymMatrix) -> Vec<Vec<usize>> {
    let n = m.n();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut block = vec![root];
        let mut head = 0;
        while head < block.len() {
            let i = block[head];
            head += 1;
            for j in 0..n {
                if !seen[j] && m.0[(i, j)] != 0.0 {
                    seen[j] = true;
                    block.push(j);
                }
            }
        }
        block.sort_unstable();
        out.push(block);
    }
    out
}

/// Eigenpairs of the principal submatrix on `block`: faer first, nalgebra if
/// faer does not converge. Vectors are empty when `want_vectors` is false.
fn block_eig(m: &SymMatrix, block: &[usize], want_vectors: bool) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let k = block.len();
    if k == 1 {
        return Ok((vec![m.0[(block[0], block[0])]], DMatrix::from_element(1, 1, 1.0)));
    }
    let sub = Mat::from_fn(k, k, |r, c| m.0[(block[r], block[c])]);
    let faer = if want_vectors {
        sub.self_adjoint_eigen(Side::Lower).ok().map(|e| {
            let (s, u) = (e.S().column_vector(), e.U());
            ((0..k).map(|i| s[i]).collect::<Vec<_>>(), DMatrix::from_fn(k, k, |r, c| u[(r, c)]))
        })
    } else {
        sub.self_adjoint_eigenvalues(Side::Lower).ok().map(|v| (v, DMatrix::zeros(0, 0)))
    };
    if let Some((values, vectors)) = faer.filter(|(v, _)| all_finite(v)) {
        return Ok((values, vectors));
    }
    let dense = DMatrix::from_fn(k, k, |r, c| m.0[(block[r], block[c])]);
    let eig = nalgebra::SymmetricEigen::try_new(dense, f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidMatrix("symmetric eigensolver did not converge".into()))?;
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if !all_finite(&values) {
        return Err(Error::InvalidMatrix("eigenvalues are not finite".into()));
    }
    Ok((values, eig.eigenvectors))
}

fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|x| x.is_finite())
}

/// All eigenpairs of `m`, ascending by value.
pub fn sym_eig(m: &SymMatrix) -> Result<Vec<EigenPair>> {
    Ok(sym_decompose(m)?.pairs())
}

/// Eigenvalues only, ascending.
pub fn sym_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>> {
    let mut vals = Vec::with_capacity(m.n());
    for block in components(m) {
        vals.extend(block_eig(m, &block, false)?.0);
    }
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}
