//! Independent oracles shared by the property and acceptance tests.
#![allow(dead_code)]

use leasc::encoder::{Activation, EncoderParams};
use leasc::prox::{self, RegularizerKind};
use leasc::Matrix;
use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Matrix {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// The four single-weight regularizers.
pub const KINDS: [RegularizerKind; 4] = [
    RegularizerKind::L1,
    RegularizerKind::Nuclear,
    RegularizerKind::L21,
    RegularizerKind::SquaredFrobenius,
];

pub fn reg_value(kind: RegularizerKind, a: &Matrix) -> f64 {
    match kind {
        RegularizerKind::L1 => a.iter().map(|v| v.abs()).sum(),
        RegularizerKind::L21 => a.column_iter().map(|c| c.norm()).sum(),
        RegularizerKind::SquaredFrobenius => a.norm_squared(),
        RegularizerKind::Nuclear => a.clone().svd(false, false).singular_values.sum(),
        RegularizerKind::ElasticNet => unreachable!(),
    }
}

pub fn prox_objective(kind: RegularizerKind, p: &Matrix, a: &Matrix, tau: f64) -> f64 {
    tau * reg_value(kind, p) + 0.5 * (p - a).norm_squared()
}

/// No random perturbation of the prox output lowers the prox objective.
pub fn check_optimality(kind: RegularizerKind, a: &Matrix, tau: f64, rng: &mut impl Rng) -> Result<(), String> {
    let p = prox::prox(kind, a, tau).map_err(|e| e.to_string())?;
    let base = prox_objective(kind, &p, a, tau);
    for eps in [1e-2, 1e-4] {
        for _ in 0..20 {
            let dir = random_matrix(a.nrows(), a.ncols(), 1.0, rng);
            let q = &p + dir * eps;
            let v = prox_objective(kind, &q, a, tau);
            if v < base - 1e-12 * (1.0 + base.abs()) {
                return Err(format!("{kind:?}: perturbation lowered objective {base} to {v}"));
            }
        }
    }
    Ok(())
}

pub fn check_nonexpansive(kind: RegularizerKind, a: &Matrix, b: &Matrix, tau: f64) -> Result<(), String> {
    let pa = prox::prox(kind, a, tau).map_err(|e| e.to_string())?;
    let pb = prox::prox(kind, b, tau).map_err(|e| e.to_string())?;
    let lhs = (pa - pb).norm();
    let rhs = (a - b).norm();
    if lhs <= rhs + 1e-12 {
        Ok(())
    } else {
        Err(format!("{kind:?}: ||prox(a)-prox(b)|| = {lhs} > ||a-b|| = {rhs}"))
    }
}

/// Scalar minimizer of `tau*r(p) + (p-a)^2/2` by a dense grid.
fn grid_min(a: f64, tau: f64, r: impl Fn(f64) -> f64) -> f64 {
    let span = a.abs() + 1.0;
    let steps = 200_000;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=steps {
        let p = -span + 2.0 * span * i as f64 / steps as f64;
        let v = tau * r(p) + 0.5 * (p - a) * (p - a);
        if v < best.0 {
            best = (v, p);
        }
    }
    best.1
}

/// Elementwise ops against a grid search, the column op along its own
/// direction, and singular value thresholding against the SVD spectrum.
pub fn check_oracle(kind: RegularizerKind, a: &Matrix, tau: f64) -> Result<(), String> {
    let p = prox::prox(kind, a, tau).map_err(|e| e.to_string())?;
    let grid_tol = 2.0 * (a.abs().max() + 1.0) / 200_000.0 + 1e-12;
    match kind {
        RegularizerKind::L1 | RegularizerKind::SquaredFrobenius => {
            let r = |v: f64| if kind == RegularizerKind::L1 { v.abs() } else { v * v };
            for (pv, &av) in p.iter().zip(a.iter()) {
                let g = grid_min(av, tau, r);
                if (pv - g).abs() > grid_tol {
                    return Err(format!("{kind:?}: entry {pv} vs grid {g}"));
                }
            }
        }
        RegularizerKind::L21 => {
            for (pc, ac) in p.column_iter().zip(a.column_iter()) {
                let norm = ac.norm();
                // The minimizer is a nonnegative multiple of the column.
                let s = grid_min(norm, tau, |t| t.abs());
                let expected = if norm > 0.0 { ac * (s.max(0.0) / norm) } else { ac.into_owned() };
                let off = (pc - expected).norm();
                if off > grid_tol {
                    return Err(format!("L21: column off by {off}"));
                }
            }
        }
        RegularizerKind::Nuclear => {
            let sa = a.clone().svd(true, true);
            let sp = p.clone().svd(false, false).singular_values;
            let mut expected: Vec<f64> = sa.singular_values.iter().map(|s| (s - tau).max(0.0)).collect();
            let mut got: Vec<f64> = sp.iter().cloned().collect();
            expected.sort_by(|x, y| y.total_cmp(x));
            got.sort_by(|x, y| y.total_cmp(x));
            for (g, e) in got.iter().zip(&expected) {
                if (g - e).abs() > 1e-9 * (1.0 + e) {
                    return Err(format!("nuclear: singular value {g} vs {e}"));
                }
            }
            let u = sa.u.unwrap();
            let vt = sa.v_t.unwrap();
            let rebuilt = &u * DMatrix::from_diagonal(&DVector::from_iterator(
                sa.singular_values.len(),
                sa.singular_values.iter().map(|s| (s - tau).max(0.0)),
            )) * &vt;
            if (&rebuilt - &p).norm() > 1e-9 * (1.0 + a.norm()) {
                return Err("nuclear: singular vectors not preserved".into());
            }
        }
        RegularizerKind::ElasticNet => unreachable!(),
    }
    Ok(())
}

pub fn random_net(rng: &mut impl Rng) -> (EncoderParams, usize) {
    let layers = rng.random_range(1..=3);
    let d = rng.random_range(1..=10);
    let mut sizes = vec![d];
    for _ in 0..layers {
        sizes.push(rng.random_range(1..=10));
    }
    let acts = [Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::Identity];
    let hidden = acts[rng.random_range(0..acts.len())];
    let output = acts[rng.random_range(0..acts.len())];
    let weights: Vec<Matrix> = sizes
        .windows(2)
        .map(|w| random_matrix(w[1], w[0], 1.0, rng))
        .collect();
    let mut params = EncoderParams::new(weights, hidden, output).unwrap();
    if rng.random_bool(0.5) {
        params.biases = sizes[1..]
            .iter()
            .map(|&n| DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5)))
            .collect();
    }
    (params, d)
}

/// Largest relative error between the analytic gradient and central finite
/// differences of the loss.
pub fn gradient_error(params: &EncoderParams, x: &Matrix, target: &Matrix) -> f64 {
    let (_, grad) = params.loss_and_gradient(x, target).unwrap();
    let h = 1e-6;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for l in 0..params.layers.len() {
        for idx in 0..params.layers[l].len() {
            let mut plus = params.clone();
            plus.layers[l][idx] += h;
            let mut minus = params.clone();
            minus.layers[l][idx] -= h;
            let fd = (plus.loss(x, target).unwrap() - minus.loss(x, target).unwrap()) / (2.0 * h);
            analytic.push(grad.weights[l][idx]);
            numeric.push(fd);
        }
        if params.has_bias() {
            for idx in 0..params.biases[l].len() {
                let mut plus = params.clone();
                plus.biases[l][idx] += h;
                let mut minus = params.clone();
                minus.biases[l][idx] -= h;
                let fd = (plus.loss(x, target).unwrap() - minus.loss(x, target).unwrap()) / (2.0 * h);
                analytic.push(grad.biases[l][idx]);
                numeric.push(fd);
            }
        }
    }
    let a = DVector::from_vec(analytic);
    let n = DVector::from_vec(numeric);
    (&a - &n).norm() / a.norm().max(n.norm()).max(1e-8)
}

/// Exact coverage probability by inclusion-exclusion over missed subspaces.
pub fn coverage_inclusion_exclusion(sizes: &[usize], n: usize) -> f64 {
    fn choose(a: usize, b: usize) -> BigInt {
        if b > a {
            return BigInt::zero();
        }
        let mut c = BigInt::one();
        for i in 0..b {
            c = c * BigInt::from(a - i) / BigInt::from(i + 1);
        }
        c
    }
    let m: usize = sizes.iter().sum();
    let mut num = BigInt::zero();
    for mask in 0u64..(1 << sizes.len()) {
        let missed: usize = (0..sizes.len()).filter(|i| mask >> i & 1 == 1).map(|i| sizes[i]).sum();
        let term = choose(m - missed, n);
        if mask.count_ones() % 2 == 0 {
            num += term;
        } else {
            num -= term;
        }
    }
    assert!(!num.is_negative());
    let den = choose(m, n);
    num.to_f64().unwrap() / den.to_f64().unwrap()
}

/// Every bijection-based matching of predicted onto true labels, brute force.
pub fn brute_force_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let kp = pred.iter().max().map_or(0, |v| v + 1);
    let kt = truth.iter().max().map_or(0, |v| v + 1);
    let k = kp.max(kt);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let hits = pred.iter().zip(truth).filter(|(a, b)| p[**a] == **b).count();
        best = best.max(hits);
    });
    if pred.is_empty() {
        1.0
    } else {
        best as f64 / pred.len() as f64
    }
}

fn permute(v: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == v.len() {
        f(v);
        return;
    }
    for j in i..v.len() {
        v.swap(i, j);
        permute(v, i + 1, f);
        v.swap(i, j);
    }
}

/// Mutual information normalized by the geometric mean of entropies, from
/// the definition.
pub fn reference_nmi(pred: &[usize], truth: &[usize]) -> f64 {
    let m = pred.len() as f64;
    let entropy = |labels: &[usize]| {
        let mut counts = std::collections::HashMap::new();
        for &l in labels {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        counts.values().map(|&c| {
            let p = c as f64 / m;
            -p * p.ln()
        }).sum::<f64>()
    };
    let mut joint = std::collections::HashMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        *joint.entry((p, t)).or_insert(0usize) += 1;
    }
    let count = |labels: &[usize], v: usize| labels.iter().filter(|&&l| l == v).count() as f64;
    let mi: f64 = joint
        .iter()
        .map(|(&(p, t), &c)| {
            let pj = c as f64 / m;
            pj * (pj * m * m / (count(pred, p) * count(truth, t))).ln()
        })
        .sum();
    let (hp, ht) = (entropy(pred), entropy(truth));
    if hp == 0.0 && ht == 0.0 {
        1.0
    } else if hp == 0.0 || ht == 0.0 {
        0.0
    } else {
        mi / (hp * ht).sqrt()
    }
}

/// Labels relabeled to first-appearance order, for comparing partitions.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}
