//! Proximal operators and norm evaluators for the code and noise regularizers.
//!
//! Every `prox_*` function returns `argmin_Z tau * R(Z) + 0.5 * ||Z - A||_F^2`
//! for its regularizer `R`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, singular_values, svd};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegularizerKind {
    SquaredFrobenius,
    L1,
    Nuclear,
    L21,
    /// `||Z||_1` together with `||Z||_F^2`; only meaningful with two weights.
    ElasticNet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegularizerValue {
    Single(f64),
    ElasticNet { l1: f64, sq_frobenius: f64 },
}

impl RegularizerValue {
    pub fn single(self) -> Option<f64> {
        match self {
            RegularizerValue::Single(v) => Some(v),
            RegularizerValue::ElasticNet { .. } => None,
        }
    }

    /// `l1_weight * l1 + f2_weight * sq_frobenius` for the elastic net, the
    /// plain value (scaled by `l1_weight`) otherwise.
    pub fn weighted(self, l1_weight: f64, f2_weight: f64) -> f64 {
        match self {
            RegularizerValue::Single(v) => l1_weight * v,
            RegularizerValue::ElasticNet { l1, sq_frobenius } => {
                l1_weight * l1 + f2_weight * sq_frobenius
            }
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "prox weight must be finite and nonnegative, got {tau}"
        )))
    }
}

#[inline]
pub fn soft_threshold(a: f64, tau: f64) -> f64 {
    a.signum() * (a.abs() - tau).max(0.0)
}

pub fn prox_l1(a: &Matrix, tau: f64) -> Result<Matrix> {
    check_tau(tau)?;
    ensure_finite(a, "prox_l1 input")?;
    Ok(a.map(|v| soft_threshold(v, tau)))
}

/// Singular value thresholding.
pub fn prox_nuclear(a: &Matrix, tau: f64) -> Result<Matrix> {
    check_tau(tau)?;
    ensure_finite(a, "prox_nuclear input")?;
    if tau == 0.0 {
        return Ok(a.clone());
    }
    let (u, s, v_t) = svd(a)?;
    let kept = s.iter().take_while(|&&sv| sv > tau).count();
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for i in 0..kept {
        let shrunk = s[i] - tau;
        out += (u.column(i) * shrunk) * v_t.row(i);
    }
    Ok(out)
}

/// Column-wise group shrinkage; columns with norm at most `tau` map to zero.
pub fn prox_l21(a: &Matrix, tau: f64) -> Result<Matrix> {
    check_tau(tau)?;
    ensure_finite(a, "prox_l21 input")?;
    let mut out = a.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        if norm <= tau {
            col.fill(0.0);
        } else {
            col *= (norm - tau) / norm;
        }
    }
    Ok(out)
}

pub fn prox_sq_frobenius(a: &Matrix, tau: f64) -> Result<Matrix> {
    check_tau(tau)?;
    ensure_finite(a, "prox_sq_frobenius input")?;
    Ok(a / (1.0 + 2.0 * tau))
}

/// Prox of `tau_l1 * ||Z||_1 + tau_f2 * ||Z||_F^2`.
pub fn prox_elastic_net(a: &Matrix, tau_l1: f64, tau_f2: f64) -> Result<Matrix> {
    check_tau(tau_f2)?;
    let shrunk = prox_l1(a, tau_l1)?;
    Ok(shrunk / (1.0 + 2.0 * tau_f2))
}

/// Dispatch on a single-weight regularizer.
pub fn prox(kind: RegularizerKind, a: &Matrix, tau: f64) -> Result<Matrix> {
    match kind {
        RegularizerKind::SquaredFrobenius => prox_sq_frobenius(a, tau),
        RegularizerKind::L1 => prox_l1(a, tau),
        RegularizerKind::Nuclear => prox_nuclear(a, tau),
        RegularizerKind::L21 => prox_l21(a, tau),
        RegularizerKind::ElasticNet => Err(Error::InvalidInput(
            "the elastic-net prox needs an l1 and a squared-Frobenius weight".into(),
        )),
    }
}

pub fn l1_norm(a: &Matrix) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

pub fn l21_norm(a: &Matrix) -> f64 {
    a.column_iter().map(|c| c.norm()).sum()
}

pub fn sq_frobenius(a: &Matrix) -> f64 {
    a.norm_squared()
}

pub fn nuclear_norm(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?.sum())
}

pub fn regularizer_value(a: &Matrix, kind: RegularizerKind) -> Result<RegularizerValue> {
    ensure_finite(a, "regularizer argument")?;
    Ok(match kind {
        RegularizerKind::SquaredFrobenius => RegularizerValue::Single(sq_frobenius(a)),
        RegularizerKind::L1 => RegularizerValue::Single(l1_norm(a)),
        RegularizerKind::Nuclear => RegularizerValue::Single(nuclear_norm(a)?),
        RegularizerKind::L21 => RegularizerValue::Single(l21_norm(a)),
        RegularizerKind::ElasticNet => RegularizerValue::ElasticNet {
            l1: l1_norm(a),
            sq_frobenius: sq_frobenius(a),
        },
    })
}
