//! Generalized symmetric eigenproblem `a·v = λ·b·v` with `a` positive
//! semi-definite and `b` symmetric but possibly indefinite or singular.
//!
//! Two routes, both ending in a dense symmetric eigensolve:
//!
//! * **Cholesky** when `b` is positive definite: `b = LLᵀ` and the problem
//!   becomes `L⁻¹aL⁻ᵀ·y = λ·y`, `v = L⁻ᵀy`.
//! * **Range deflation** otherwise. Split `ℝⁿ` into the range `P` and null
//!   space `N` of `a` (`a = PΛPᵀ`). Eliminating the null-space component
//!   through the pivot block `G = NᵀbN` leaves
//!   `Λx = λ·S·x` with `S = PᵀbP − PᵀbN·G⁻¹·NᵀbP`,
//!   which is symmetric-definite in the reciprocal `θ = 1/λ`:
//!   `Λ^{-1/2}SΛ^{-1/2}·w = θ·w`. Every finite nonzero eigenvalue is
//!   therefore real. `θ ≈ 0` is an infinite eigenvalue (a direction where `b`
//!   vanishes) and is dropped; null vectors of `a` come back with `λ = 0`.
//!
//! A ridge `εI` is added to `b` only if `G` is singular, escalating through
//! [`Tolerances::jitter_ladder`].

use nalgebra::{DMatrix, DVector};

use super::{canonicalize_sign, sym_decompose, sym_eigenvalues, EigenPair, SymEigen, SymMatrix, Tolerances};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PencilRoute {
    Cholesky,
    RangeDeflation,
}

/// Output of [`solve_pencil`]: the real eigenpairs plus counts of what was
/// discarded and why.
#[derive(Debug, Clone)]
pub struct PencilSolution {
    /// Ascending by value.
    pub pairs: Vec<EigenPair>,
    pub filtered_complex: usize,
    pub filtered_infinite: usize,
    /// Pairs whose residual exceeded [`Tolerances::pencil_residual`].
    pub filtered_residual: usize,
    /// Ridge added to `b` (0 when none was needed).
    pub jitter: f64,
    pub route: PencilRoute,
}

/// Solves `a·v = λ·b·v` with default tolerances.
pub fn solve_pencil(a: &SymMatrix, b: &SymMatrix) -> Result<PencilSolution> {
    solve_pencil_with(a, None, b, &Tolerances::default())
}

/// Like [`solve_pencil`] but reuses a precomputed decomposition of `a`.
pub fn solve_pencil_with(
    a: &SymMatrix,
    a_eig: Option<&SymEigen>,
    b: &SymMatrix,
    tol: &Tolerances,
) -> Result<PencilSolution> {
    if a.n() != b.n() {
        return Err(Error::InvalidMatrix(format!(
            "pencil dimension mismatch: {} vs {}",
            a.n(),
            b.n()
        )));
    }
    let b_vals = sym_eigenvalues(b)?;
    if b_vals[0] > tol.definite {
        if let Some(sol) = cholesky_route(a, b, tol) {
            return Ok(sol);
        }
    }
    let owned;
    let a_eig = match a_eig {
        Some(e) => e,
        None => {
            owned = sym_decompose(a)?;
            &owned
        }
    };
    deflation_route(a, a_eig, b, tol)
}

fn cholesky_route(a: &SymMatrix, b: &SymMatrix, tol: &Tolerances) -> Option<PencilSolution> {
    let chol = b.as_matrix().clone().cholesky()?;
    let l = chol.l();
    let x = l.solve_lower_triangular(a.as_matrix())?;
    let c = l.solve_lower_triangular(&x.transpose())?;
    let c = SymMatrix::new(c).ok()?;
    let eig = sym_decompose(&c).ok()?;
    let lt = l.transpose();
    let mut candidates = Vec::with_capacity(a.n());
    for (k, &value) in eig.values.iter().enumerate() {
        let y = eig.vectors.column(k).into_owned();
        let v = lt.solve_upper_triangular(&y)?;
        candidates.push((value, v));
    }
    Some(finish(a, b, candidates, 0, 0.0, PencilRoute::Cholesky, tol))
}

fn deflation_route(
    a: &SymMatrix,
    a_eig: &SymEigen,
    b: &SymMatrix,
    tol: &Tolerances,
) -> Result<PencilSolution> {
    let n = a.n();
    let a_max = a_eig.values.last().copied().unwrap_or(0.0).max(1.0);
    if a_eig.values[0] < -1e-8 * a_max {
        return Err(Error::InvalidMatrix(format!(
            "left matrix of the pencil is not positive semi-definite (min eigenvalue {:e})",
            a_eig.values[0]
        )));
    }
    let null_cut = tol.null_space * a_max;
    let null_idx: Vec<usize> = (0..n).filter(|&k| a_eig.values[k] <= null_cut).collect();
    let range_idx: Vec<usize> = (0..n).filter(|&k| a_eig.values[k] > null_cut).collect();
    let p = a_eig.vectors.select_columns(&range_idx);
    let nul = a_eig.vectors.select_columns(&null_idx);
    let inv_sqrt: Vec<f64> = range_idx.iter().map(|&k| a_eig.values[k].sqrt().recip()).collect();

    let b_scale = b.max_abs().max(1.0);
    let ladder = std::iter::once(0.0).chain(tol.jitter_ladder.iter().copied());
    for eps in ladder {
        let b_eps = if eps == 0.0 { b.clone() } else { b.shifted(-eps) };
        let bm = b_eps.as_matrix();
        let bp = bm * &p;
        let mut schur = p.transpose() * &bp;
        let mut pivot_inv: Option<DMatrix<f64>> = None;
        if !null_idx.is_empty() {
            let bn = bm * &nul;
            let g = SymMatrix::new(nul.transpose() * &bn)?;
            let g_vals = sym_eigenvalues(&g)?;
            let g_min = g_vals.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
            if g_min <= 1e-14 * b_scale {
                continue;
            }
            let Some(g_inv) = g.as_matrix().clone().try_inverse() else {
                continue;
            };
            let coupling = bn.transpose() * &p; // NᵀbP
            schur -= coupling.transpose() * &g_inv * &coupling;
            pivot_inv = Some(g_inv * coupling);
        }
        let r = range_idx.len();
        let m = SymMatrix::new(DMatrix::from_fn(r, r, |i, j| {
            inv_sqrt[i] * schur[(i, j)] * inv_sqrt[j]
        }))?;
        let eig = sym_decompose(&m)?;
        let theta_max = eig.values.iter().fold(0.0_f64, |acc, t| acc.max(t.abs()));
        let mut infinite = 0;
        let mut candidates = Vec::with_capacity(n);
        for &k in &null_idx {
            candidates.push((0.0, a_eig.vectors.column(k).into_owned()));
        }
        for (k, &theta) in eig.values.iter().enumerate() {
            if theta.abs() <= tol.infinite * theta_max || theta == 0.0 {
                infinite += 1;
                continue;
            }
            let w = eig.vectors.column(k);
            let x = DVector::from_fn(r, |i, _| inv_sqrt[i] * w[i]);
            let mut v = &p * &x;
            if let Some(pi) = &pivot_inv {
                v -= &nul * (pi * &x);
            }
            candidates.push((theta.recip(), v));
        }
        return Ok(finish(a, b, candidates, infinite, eps, PencilRoute::RangeDeflation, tol));
    }
    Err(Error::SingularPencil(format!(
        "null-space pivot block stays singular after ridge {:e}",
        tol.jitter_ladder[tol.jitter_ladder.len() - 1]
    )))
}

/// Normalizes, sign-fixes, applies the reality and residual filters, sorts.
fn finish(
    a: &SymMatrix,
    b: &SymMatrix,
    candidates: Vec<(f64, DVector<f64>)>,
    filtered_infinite: usize,
    jitter: f64,
    route: PencilRoute,
    tol: &Tolerances,
) -> PencilSolution {
    let mut pairs = Vec::with_capacity(candidates.len());
    let mut filtered_complex = 0;
    let mut filtered_residual = 0;
    for (value, mut v) in candidates {
        // Both routes produce real spectra; the imaginary part is identically
        // zero and kept so callers can audit it uniformly.
        let imag = 0.0_f64;
        if imag.abs() > tol.reality * (1.0 + value.abs()) {
            filtered_complex += 1;
            continue;
        }
        let norm = v.norm();
        if !(norm > 0.0) || !value.is_finite() {
            filtered_residual += 1;
            continue;
        }
        v /= norm;
        canonicalize_sign(&mut v);
        let res = (a.as_matrix() * &v - b.as_matrix() * &v * value).amax();
        if res > tol.pencil_residual * (1.0 + value.abs()) * v.amax() {
            filtered_residual += 1;
            continue;
        }
        pairs.push(EigenPair {
            value,
            vector: v,
            imag_residual: imag.abs(),
        });
    }
    pairs.sort_by(|x, y| x.value.total_cmp(&y.value));
    PencilSolution {
        pairs,
        filtered_complex,
        filtered_infinite,
        filtered_residual,
        jitter,
        route,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;

    fn path_laplacian(n: usize) -> SymMatrix {
        SymMatrix::from_fn(n, |i, j| {
            if i == j {
                if i == 0 || i == n - 1 { 1.0 } else { 2.0 }
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn identity_b_matches_standard_problem() {
        let a = path_laplacian(5);
        let sol = solve_pencil(&a, &SymMatrix::identity(5)).unwrap();
        let std = sym_eig(&a).unwrap();
        assert_eq!(sol.route, PencilRoute::Cholesky);
        assert_eq!(sol.pairs.len(), 5);
        for (p, q) in sol.pairs.iter().zip(&std) {
            assert!((p.value - q.value).abs() < 1e-8);
            assert!((&p.vector - &q.vector).amax() < 1e-8);
        }
    }

    #[test]
    fn indefinite_b_keeps_real_pairs_with_small_residual() {
        let a = path_laplacian(6);
        let b = SymMatrix::from_fn(6, |i, j| if i == j { [1.0, -2.0, 0.5, -0.3, 2.0, -1.0][i] } else { 0.1 }).unwrap();
        let sol = solve_pencil(&a, &b).unwrap();
        assert_eq!(sol.route, PencilRoute::RangeDeflation);
        assert_eq!(sol.pairs.len() + sol.filtered_infinite, 6);
        for p in &sol.pairs {
            let r = (a.as_matrix() * &p.vector - b.as_matrix() * &p.vector * p.value).amax();
            assert!(r <= 1e-6 * (1.0 + p.value.abs()) * p.vector.amax());
        }
    }

    #[test]
    fn singular_b_drops_infinite_eigenvalues() {
        let a = path_laplacian(4);
        // b has a 2-dimensional null space, so two eigenvalues are infinite.
        let b = SymMatrix::diagonal(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        let sol = solve_pencil(&a, &b).unwrap();
        assert_eq!(sol.filtered_infinite, 2);
        assert_eq!(sol.pairs.len(), 2);
    }

    #[test]
    fn dimension_mismatch() {
        let err = solve_pencil(&SymMatrix::identity(2), &SymMatrix::identity(3)).unwrap_err();
        assert!(matches!(err, Error::InvalidMatrix(_)));
    }

    #[test]
    fn zero_pivot_takes_the_ridge() {
        // The null vector of `a` is (1,1)/√2 and b is zero on it.
        let a = path_laplacian(2);
        let b = SymMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let sol = solve_pencil(&a, &b).unwrap();
        assert!(sol.jitter > 0.0);
    }
}
