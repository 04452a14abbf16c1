//! The robust predictive coding machine: Jacobi-proximal ADMM over the codes
//! `Z`, their split copy `J` and the noise `E`, alternated with training the
//! encoder to reproduce the codes.
//!
//! The augmented Lagrangian is written as
//!
//! ```text
//! ᾱ R1(J) + α R2(Z) + β R3(E)
//!     + μ/2 ||J - Z + Q1/μ||² + μ/2 ||X - XZ - E + Q2/μ||²
//! ```
//!
//! and each block takes one linearized proximal step per iteration.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::encoder::{encoder_init, train_to_target, EncoderConfig, EncoderParams, TrainReport};
use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, stacked_identity_norm_sq, zero_diagonal};
use crate::prox::{prox, prox_sq_frobenius, RegularizerKind};
use crate::{DataMatrix, Matrix};

/// The four regularizer choices for `(R1, R2, R3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    /// `||J||_F^2`, no `R2`, `||E||_F^2`.
    #[default]
    SquaredFrobenius,
    /// `||J||_1`, no `R2`, `||E||_{2,1}`.
    L1,
    /// `||J||_*`, no `R2`, `||E||_{2,1}`; no diagonal constraint.
    Nuclear,
    /// `||J||_1`, `||Z||_F^2`, `||E||_{2,1}`.
    ElasticNet,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::SquaredFrobenius,
        Variant::L1,
        Variant::Nuclear,
        Variant::ElasticNet,
    ];

    pub fn r1(self) -> RegularizerKind {
        match self {
            Variant::SquaredFrobenius => RegularizerKind::SquaredFrobenius,
            Variant::L1 | Variant::ElasticNet => RegularizerKind::L1,
            Variant::Nuclear => RegularizerKind::Nuclear,
        }
    }

    pub fn r2(self) -> Option<RegularizerKind> {
        match self {
            Variant::ElasticNet => Some(RegularizerKind::SquaredFrobenius),
            _ => None,
        }
    }

    pub fn r3(self) -> RegularizerKind {
        match self {
            Variant::SquaredFrobenius => RegularizerKind::SquaredFrobenius,
            _ => RegularizerKind::L21,
        }
    }

    /// Whether `diag(Z) = 0` is enforced.
    pub fn zero_diagonal(self) -> bool {
        self != Variant::Nuclear
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::SquaredFrobenius => "f2",
            Variant::L1 => "l1",
            Variant::Nuclear => "nuclear",
            Variant::ElasticNet => "elastic",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f2" | "frobenius" => Ok(Variant::SquaredFrobenius),
            "l1" => Ok(Variant::L1),
            "nuclear" | "nuc" => Ok(Variant::Nuclear),
            "elastic" | "elastic-net" | "l1+f2" => Ok(Variant::ElasticNet),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant `{other}` (expected f2, l1, nuclear or elastic)"
            ))),
        }
    }
}

/// When the encoder is fitted to the codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainSchedule {
    /// Train every outer iteration and use `f(X)` as the code anchor.
    PerIteration,
    /// Run the ADMM loop alone, then train once on the final codes.
    #[default]
    TrainLast,
}

impl FromStr for TrainSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "per-iteration" | "per_iteration" | "each" => Ok(TrainSchedule::PerIteration),
            "last" | "train-last" | "train_last" => Ok(TrainSchedule::TrainLast),
            other => Err(Error::InvalidConfig(format!(
                "unknown train schedule `{other}` (expected last or per-iteration)"
            ))),
        }
    }
}

impl fmt::Display for TrainSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainSchedule::PerIteration => "per-iteration",
            TrainSchedule::TrainLast => "last",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpcmConfig {
    pub variant: Variant,
    pub alpha_bar: f64,
    /// Weight of `R2`; must be zero unless the variant is the elastic net.
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mu0: f64,
    pub mu_growth: f64,
    pub mu_max: f64,
    /// Encoder loss target.
    pub eps1: f64,
    /// Constraint residual target.
    pub eps2: f64,
    pub max_outer: usize,
    /// Factor `c > 1` on the minimal proximal step sizes.
    pub step_safety: f64,
    pub train_schedule: TrainSchedule,
    pub encoder: EncoderConfig,
}

impl Default for RpcmConfig {
    fn default() -> Self {
        Self {
            variant: Variant::SquaredFrobenius,
            alpha_bar: 1.0,
            alpha: 0.0,
            beta: 0.1,
            gamma: 1.0,
            mu0: 1e-2,
            mu_growth: 1.2,
            mu_max: 1e6,
            eps1: 1e-2,
            eps2: 1e-4,
            max_outer: 300,
            step_safety: 1.01,
            train_schedule: TrainSchedule::TrainLast,
            encoder: EncoderConfig::default(),
        }
    }
}

impl RpcmConfig {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            variant,
            alpha: if variant == Variant::ElasticNet { 100.0 } else { 0.0 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !nonneg(self.alpha_bar) {
            return bad(format!("alpha_bar must be nonnegative, got {}", self.alpha_bar));
        }
        if !nonneg(self.alpha) {
            return bad(format!("alpha must be nonnegative, got {}", self.alpha));
        }
        if self.alpha != 0.0 && self.variant != Variant::ElasticNet {
            return bad(format!(
                "alpha = {} has no effect for the {} variant; set it to 0",
                self.alpha, self.variant
            ));
        }
        if !pos(self.beta) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.gamma > 0.0 && self.gamma < 2.0) {
            return bad(format!("gamma must lie in (0, 2), got {}", self.gamma));
        }
        if !pos(self.mu0) || !pos(self.mu_max) || self.mu0 > self.mu_max {
            return bad(format!(
                "need 0 < mu0 <= mu_max, got mu0 = {}, mu_max = {}",
                self.mu0, self.mu_max
            ));
        }
        if !(self.mu_growth.is_finite() && self.mu_growth > 1.0) {
            return bad(format!("mu growth must exceed 1, got {}", self.mu_growth));
        }
        if !pos(self.eps1) || !pos(self.eps2) {
            return bad("tolerances must be positive".into());
        }
        if self.max_outer == 0 {
            return bad("max_outer must be positive".into());
        }
        if !(self.step_safety.is_finite() && self.step_safety > 1.0) {
            return bad(format!("step safety factor must exceed 1, got {}", self.step_safety));
        }
        self.encoder.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpcmState {
    pub z: Matrix,
    pub j: Matrix,
    pub e: Matrix,
    pub q1: Matrix,
    pub q2: Matrix,
    pub mu: f64,
    pub iter: usize,
    pub residual_history: Vec<f64>,
}

impl RpcmState {
    /// All-zero iterates for `d × n` data.
    pub fn zeros(d: usize, n: usize, mu: f64) -> Self {
        Self {
            z: DMatrix::zeros(n, n),
            j: DMatrix::zeros(n, n),
            e: DMatrix::zeros(d, n),
            q1: DMatrix::zeros(n, n),
            q2: DMatrix::zeros(d, n),
            mu,
            iter: 0,
            residual_history: Vec::new(),
        }
    }

    fn check_shapes(&self, x: &DataMatrix) -> Result<()> {
        let (d, n) = x.shape();
        let ok = self.z.shape() == (n, n)
            && self.j.shape() == (n, n)
            && self.q1.shape() == (n, n)
            && self.e.shape() == (d, n)
            && self.q2.shape() == (d, n);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "solver state does not match {d}x{n} data"
            )))
        }
    }

    /// `||X - XZ - E||_F^2 + ||J - Z||_F^2`.
    pub fn residual(&self, x: &DataMatrix) -> f64 {
        let r2 = x - x * &self.z - &self.e;
        r2.norm_squared() + (&self.j - &self.z).norm_squared()
    }

    fn is_finite(&self) -> bool {
        [&self.z, &self.j, &self.e, &self.q1, &self.q2]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()))
            && self.mu.is_finite()
    }
}

/// Proximal step sizes for one value of `μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub tau_j: f64,
    pub tau_z: f64,
    pub tau_e: f64,
}

impl StepSizes {
    /// `a1_norm_sq` is `||[-I; X]||_2^2`.
    pub fn new(mu: f64, a1_norm_sq: f64, gamma: f64, safety: f64) -> Self {
        let base = safety * 2.0 * mu / (2.0 - gamma);
        Self {
            tau_j: base,
            tau_z: base * a1_norm_sq,
            tau_e: base,
        }
    }

    /// Errors unless every step size strictly exceeds its lower bound.
    pub fn check(&self, mu: f64, a1_norm_sq: f64, gamma: f64) -> Result<()> {
        let bound = 2.0 * mu / (2.0 - gamma);
        let checks = [
            ("tau_j", self.tau_j, bound),
            ("tau_z", self.tau_z, bound * a1_norm_sq),
            ("tau_e", self.tau_e, bound),
        ];
        for (name, tau, lower) in checks {
            if !(tau > lower) {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {tau:e} does not exceed its bound {lower:e}"
                )));
            }
        }
        Ok(())
    }
}

fn prox_r1(variant: Variant, a: &Matrix, tau: f64) -> Result<Matrix> {
    prox(variant.r1(), a, tau)
}

fn prox_r3(variant: Variant, a: &Matrix, tau: f64) -> Result<Matrix> {
    prox(variant.r3(), a, tau)
}

/// One simultaneous proximal update of `J`, `Z` and `E` from the iteration-k
/// values. `anchor_z` stands in for `Z` in the `Z` and `E` gradients.
pub fn jacobi_step(
    state: &RpcmState,
    x: &DataMatrix,
    anchor_z: &Matrix,
    steps: &StepSizes,
    config: &RpcmConfig,
) -> Result<RpcmState> {
    state.check_shapes(x)?;
    if anchor_z.shape() != state.z.shape() {
        return Err(Error::Shape(format!(
            "anchor is {}x{}, codes are {}x{}",
            anchor_z.nrows(),
            anchor_z.ncols(),
            state.z.nrows(),
            state.z.ncols()
        )));
    }
    let mu = state.mu;
    let variant = config.variant;

    let coupling = &state.j - &state.z + &state.q1 / mu;
    let fit = x * anchor_z + &state.e - x - &state.q2 / mu;

    let j_point = &state.j - (mu / steps.tau_j) * &coupling;
    let mut j = prox_r1(variant, &j_point, config.alpha_bar / steps.tau_j)?;

    let anchor_coupling = &state.j - anchor_z + &state.q1 / mu;
    let z_grad = x.transpose() * &fit - anchor_coupling;
    let z_point = anchor_z - (mu / steps.tau_z) * z_grad;
    let mut z = match variant.r2() {
        Some(RegularizerKind::SquaredFrobenius) => {
            prox_sq_frobenius(&z_point, config.alpha / steps.tau_z)?
        }
        Some(kind) => prox(kind, &z_point, config.alpha / steps.tau_z)?,
        None => z_point,
    };

    let e_point = &state.e - (mu / steps.tau_e) * &fit;
    let e = prox_r3(variant, &e_point, config.beta / steps.tau_e)?;

    if variant.zero_diagonal() {
        zero_diagonal(&mut j);
        zero_diagonal(&mut z);
    }
    Ok(RpcmState {
        z,
        j,
        e,
        q1: state.q1.clone(),
        q2: state.q2.clone(),
        mu,
        iter: state.iter,
        residual_history: state.residual_history.clone(),
    })
}

/// `Q1 += γμ(J - Z)`, `Q2 += γμ(X - XZ - E)`.
pub fn dual_step(state: &mut RpcmState, x: &DataMatrix, gamma: f64) {
    let scale = gamma * state.mu;
    state.q1 += scale * (&state.j - &state.z);
    state.q2 += scale * (x - x * &state.z - &state.e);
}

#[derive(Debug, Clone)]
pub struct RpcmResult {
    pub params: EncoderParams,
    pub z: Matrix,
    pub j: Matrix,
    pub e: Matrix,
    pub converged: bool,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Outcome of the last encoder training pass.
    pub train: TrainReport,
}

/// Fit the codes and the encoder on the representatives `x` (`d × n`).
pub fn rpcm_fit(x: &DataMatrix, config: &RpcmConfig) -> Result<RpcmResult> {
    config.validate()?;
    let (d, n) = x.shape();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 representatives, got {n}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidInput("representatives have no features".into()));
    }
    ensure_finite(x, "representative matrix")?;

    let a1_norm_sq = stacked_identity_norm_sq(x, 1e-6);
    let mut params = encoder_init(d, n, &config.encoder)?;
    let mut state = RpcmState::zeros(d, n, config.mu0);
    let mut train = None;
    let mut converged = false;

    while state.iter < config.max_outer {
        let anchor = match config.train_schedule {
            TrainSchedule::PerIteration => {
                train = Some(train_to_target(x, &state.z, &mut params, &config.encoder, config.eps1)?);
                let mut anchor = params.forward(x)?;
                if config.variant.zero_diagonal() {
                    zero_diagonal(&mut anchor);
                }
                anchor
            }
            TrainSchedule::TrainLast => state.z.clone(),
        };

        let steps = StepSizes::new(state.mu, a1_norm_sq, config.gamma, config.step_safety);
        steps.check(state.mu, a1_norm_sq, config.gamma)?;
        let mut next = jacobi_step(&state, x, &anchor, &steps, config)?;
        dual_step(&mut next, x, config.gamma);
        next.mu = (config.mu_growth * next.mu).min(config.mu_max);
        next.iter += 1;

        if !next.is_finite() {
            return Err(Error::Divergence {
                stage: "rpcm",
                iteration: next.iter,
                detail: "iterate is not finite".into(),
            });
        }
        let residual = next.residual(x);
        next.residual_history.push(residual);
        state = next;
        if residual < config.eps2 {
            converged = true;
            break;
        }
    }

    let train = match (config.train_schedule, train) {
        (TrainSchedule::PerIteration, Some(report)) if !converged => report,
        _ => train_to_target(x, &state.z, &mut params, &config.encoder, config.eps1)?,
    };

    Ok(RpcmResult {
        params,
        z: state.z,
        j: state.j,
        e: state.e,
        converged,
        iterations: state.iter,
        residual_history: state.residual_history,
        train,
    })
}

/// Least-squares regression codes `(XᵀX + λI)⁻¹XᵀX` with the diagonal zeroed.
pub fn lsr_closed_form(x: &DataMatrix, lambda: f64) -> Result<Matrix> {
    let mut z = lsr_normal_solution(x, lambda)?;
    zero_diagonal(&mut z);
    Ok(z)
}

fn lsr_normal_solution(x: &DataMatrix, lambda: f64) -> Result<Matrix> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    ensure_finite(x, "data matrix")?;
    let n = x.ncols();
    let gram = x.transpose() * x;
    let system = &gram + DMatrix::identity(n, n) * lambda;
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::Degenerate("regularized Gram matrix is not positive definite".into()))?;
    Ok(chol.solve(&gram))
}
