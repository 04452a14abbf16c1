//! Small dense linear-algebra helpers shared by the solver and the spectral code.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::Matrix;

pub(crate) const SVD_MAX_ITER: usize = 10_000;
pub(crate) const EIGEN_MAX_ITER: usize = 10_000;

pub(crate) fn ensure_finite(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains non-finite entries")))
    }
}

/// Thin SVD with singular values sorted in descending order.
pub fn svd(a: &Matrix) -> Result<(Matrix, DVector<f64>, Matrix)> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok((
            DMatrix::zeros(rows, 0),
            DVector::zeros(0),
            DMatrix::zeros(0, cols),
        ));
    }
    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(Error::SvdNonConvergence {
            rows,
            cols,
            max_iter: SVD_MAX_ITER,
        })?;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    Ok((u, svd.singular_values, v_t))
}

pub fn singular_values(a: &Matrix) -> Result<DVector<f64>> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok(DVector::zeros(0));
    }
    a.clone()
        .try_svd(false, false, f64::EPSILON, SVD_MAX_ITER)
        .map(|s| s.singular_values)
        .ok_or(Error::SvdNonConvergence {
            rows,
            cols,
            max_iter: SVD_MAX_ITER,
        })
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
pub fn symmetric_eigen_desc(a: &Matrix) -> Result<(DVector<f64>, Matrix)> {
    let dim = a.nrows();
    let eig = a
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenNonConvergence {
            dim,
            max_iter: EIGEN_MAX_ITER,
        })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(dim, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by power iteration.
///
/// `apply` computes the operator-vector product. Stops when successive Rayleigh
/// quotients agree to `rel_tol`.
pub fn power_iteration<F>(dim: usize, rel_tol: f64, max_iter: usize, mut apply: F) -> f64
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    if dim == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = DVector::from_fn(dim, |_, _| rng.random::<f64>() + 0.5);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = apply(&v);
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= rel_tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Spectral norm squared of the stacked operator `[-I; X]`, i.e. the top
/// eigenvalue of `I + XᵀX`.
pub fn stacked_identity_norm_sq(x: &Matrix, rel_tol: f64) -> f64 {
    let n = x.ncols();
    // Tighter inner tolerance so the returned estimate meets `rel_tol`.
    power_iteration(n, rel_tol * 1e-3, 100_000, |v| {
        let xv = x * v;
        v + x.transpose() * xv
    })
}

pub fn zero_diagonal(a: &mut Matrix) {
    let k = a.nrows().min(a.ncols());
    for i in 0..k {
        a[(i, i)] = 0.0;
    }
}

pub fn max_abs_diagonal(a: &Matrix) -> f64 {
    let k = a.nrows().min(a.ncols());
    (0..k).map(|i| a[(i, i)].abs()).fold(0.0, f64::max)
}
