//! Choosing representatives, and the probability that a random choice covers
//! every subspace.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kmeans::KMeans;
use crate::{DataMatrix, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeSet {
    /// Column indices into the source matrix, unique.
    pub indices: Vec<usize>,
    /// The selected columns, in `indices` order.
    pub x: DataMatrix,
}

impl RepresentativeSet {
    pub fn from_indices(y: &DataMatrix, indices: Vec<usize>) -> Result<Self> {
        let m = y.ncols();
        let mut seen = vec![false; m];
        for &i in &indices {
            if i >= m {
                return Err(Error::InvalidInput(format!(
                    "representative index {i} out of range for {m} columns"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidInput(format!(
                    "representative index {i} repeated"
                )));
            }
        }
        let x = y.select_columns(indices.iter());
        Ok(Self { indices, x })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn check_count(y: &DataMatrix, n: usize) -> Result<()> {
    let m = y.ncols();
    if n == 0 || n > m {
        return Err(Error::InvalidInput(format!(
            "representative count {n} must lie in 1..={m}"
        )));
    }
    Ok(())
}

/// Uniform sample of `n` distinct columns.
pub fn select_random(y: &DataMatrix, n: usize, seed: u64) -> Result<RepresentativeSet> {
    check_count(y, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = rand::seq::index::sample(&mut rng, y.ncols(), n).into_vec();
    RepresentativeSet::from_indices(y, indices)
}

/// Prefixes of one random permutation, so each set contains the previous
/// ones. `counts` must be non-decreasing.
pub fn select_random_nested(
    y: &DataMatrix,
    counts: &[usize],
    seed: u64,
) -> Result<Vec<RepresentativeSet>> {
    for &n in counts {
        check_count(y, n)?;
    }
    if counts.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput(
            "nested representative counts must be non-decreasing".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..y.ncols()).collect();
    order.shuffle(&mut rng);
    counts
        .iter()
        .map(|&n| RepresentativeSet::from_indices(y, order[..n].to_vec()))
        .collect()
}

/// k-means with `k = n` over the columns; each centroid is replaced by the
/// nearest data column not already taken.
pub fn select_kmeans(y: &DataMatrix, n: usize, seed: u64) -> Result<RepresentativeSet> {
    check_count(y, n)?;
    let points = y.transpose();
    let fit = KMeans::new(n, seed).with_restarts(3).fit(&points)?;
    let m = y.ncols();
    let mut taken = vec![false; m];
    let mut indices = Vec::with_capacity(n);
    for c in 0..n {
        let centroid = fit.centroids.row(c).transpose();
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 0..m {
            if taken[j] {
                continue;
            }
            let d = (y.column(j) - &centroid).norm_squared();
            if d < best.1 {
                best = (j, d);
            }
        }
        taken[best.0] = true;
        indices.push(best.0);
    }
    RepresentativeSet::from_indices(y, indices)
}

/// Number of points `(m_1, ..., m_s)` in each subspace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceSizes(Vec<usize>);

impl SubspaceSizes {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidInput("at least one subspace is required".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidInput("every subspace needs at least one point".into()));
        }
        Ok(Self(sizes))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn count(&self) -> usize {
        self.0.len()
    }
}

/// Above this many points the convolution runs in log space.
pub const EXACT_LIMIT: usize = 1000;

/// Probability that `n` points drawn without replacement include at least one
/// point of every subspace.
pub fn coverage_probability(sizes: &SubspaceSizes, n: usize) -> Result<f64> {
    let m = sizes.total();
    if n > m {
        return Err(Error::InvalidInput(format!(
            "cannot draw {n} representatives from {m} points"
        )));
    }
    if n < sizes.count() {
        return Ok(0.0);
    }
    let largest_complement = sizes.as_slice().iter().map(|&mi| m - mi).max().unwrap_or(0);
    if n > largest_complement {
        return Ok(1.0);
    }
    if m <= EXACT_LIMIT {
        Ok(coverage_exact(sizes, n))
    } else {
        Ok(coverage_log_space(sizes, n))
    }
}

fn binomial_row(m: usize, upto: usize) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(upto + 1);
    let mut c = BigUint::one();
    row.push(c.clone());
    for j in 1..=upto.min(m) {
        c = c * BigUint::from(m - j + 1) / BigUint::from(j);
        row.push(c.clone());
    }
    row
}

/// Exact big-integer convolution of `Σ_{j>=1} C(m_i, j) t^j` over subspaces.
pub fn coverage_exact(sizes: &SubspaceSizes, n: usize) -> f64 {
    let mut dp = vec![BigUint::zero(); n + 1];
    dp[0] = BigUint::one();
    for &mi in sizes.as_slice() {
        let row = binomial_row(mi, n);
        let mut next = vec![BigUint::zero(); n + 1];
        for (t, slot) in next.iter_mut().enumerate().skip(1) {
            let mut acc = BigUint::zero();
            for j in 1..=mi.min(t) {
                if !dp[t - j].is_zero() {
                    acc += &dp[t - j] * &row[j];
                }
            }
            *slot = acc;
        }
        dp = next;
    }
    let total = binomial_row(sizes.total(), n).pop().expect("non-empty row");
    ratio_to_f64(&dp[n], &total)
}

fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    // Scale so the integer quotient carries ~64 significant bits.
    let shift = (den.bits() as i64 - num.bits() as i64).max(0) + 64;
    let q = (num << shift as usize) / den;
    let mut value = q.to_f64().unwrap_or(f64::INFINITY);
    let mut remaining = shift;
    while remaining > 0 {
        let step = remaining.min(1000);
        value *= 2f64.powi(-(step as i32));
        remaining -= step;
    }
    value
}

fn log_factorials(m: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(m + 1);
    table.push(0.0);
    let mut acc = 0.0;
    for k in 1..=m {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// The same convolution carried out on log-coefficients.
pub fn coverage_log_space(sizes: &SubspaceSizes, n: usize) -> f64 {
    let m = sizes.total();
    let lf = log_factorials(m);
    let ln_choose = |a: usize, b: usize| lf[a] - lf[b] - lf[a - b];
    let mut dp = vec![f64::NEG_INFINITY; n + 1];
    dp[0] = 0.0;
    let mut terms = Vec::with_capacity(n);
    for &mi in sizes.as_slice() {
        let mut next = vec![f64::NEG_INFINITY; n + 1];
        for (t, slot) in next.iter_mut().enumerate().skip(1) {
            terms.clear();
            for j in 1..=mi.min(t) {
                if dp[t - j] > f64::NEG_INFINITY {
                    terms.push(dp[t - j] + ln_choose(mi, j));
                }
            }
            *slot = log_sum_exp(&terms);
        }
        dp = next;
    }
    (dp[n] - ln_choose(m, n)).exp().min(1.0)
}

/// Smallest `n` whose coverage probability reaches `target`.
pub fn suggest_representative_count(sizes: &SubspaceSizes, target: f64) -> Result<usize> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(format!(
            "target probability must lie in (0, 1), got {target}"
        )));
    }
    let mut lo = sizes.count();
    let mut hi = sizes.total();
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if coverage_probability(sizes, mid)? >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Nearest representative column, and its Euclidean distance, for every point.
pub(crate) fn nearest_column(points: &Matrix, reps: &Matrix) -> Vec<(usize, f64)> {
    points
        .column_iter()
        .map(|p| {
            let mut best = (0usize, f64::INFINITY);
            for (r, rep) in reps.column_iter().enumerate() {
                let d = (p - rep).norm_squared();
                if d < best.1 {
                    best = (r, d);
                }
            }
            (best.0, best.1.sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn sizes(v: &[usize]) -> SubspaceSizes {
        SubspaceSizes::new(v.to_vec()).unwrap()
    }

    /// Inclusion-exclusion over the set of missed subspaces.
    fn inclusion_exclusion(s: &[usize], n: usize) -> f64 {
        let m: usize = s.iter().sum();
        let lf = log_factorials(m);
        let choose = |a: usize, b: usize| -> f64 {
            if b > a {
                0.0
            } else {
                (lf[a] - lf[b] - lf[a - b]).exp()
            }
        };
        let total = choose(m, n);
        let mut p = 0.0;
        for mask in 0u32..(1 << s.len()) {
            let missed: usize = (0..s.len()).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).sum();
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            p += sign * choose(m - missed, n) / total;
        }
        p
    }

    #[test]
    fn two_halves_of_a_hundred() {
        let p = coverage_probability(&sizes(&[50, 50]), 7).unwrap();
        assert!((p - 0.9875).abs() < 1e-4, "{p}");
    }

    #[test]
    fn remark_cases() {
        assert_eq!(coverage_probability(&sizes(&[4, 5, 6]), 2).unwrap(), 0.0);
        assert_eq!(coverage_probability(&sizes(&[2, 3]), 4).unwrap(), 1.0);
        let mid = coverage_probability(&sizes(&[2, 3]), 3).unwrap();
        assert!(mid > 0.0 && mid < 1.0);
        assert!(coverage_probability(&sizes(&[2, 3]), 6).is_err());
    }

    #[test]
    fn matches_inclusion_exclusion() {
        let p = coverage_exact(&sizes(&[3, 4, 5]), 5);
        assert!((p - inclusion_exclusion(&[3, 4, 5], 5)).abs() <= 1e-12);
    }

    #[test]
    fn log_space_agrees_with_exact() {
        for (s, n) in [(vec![50, 50], 7), (vec![30, 10, 60, 25], 12), (vec![200, 300, 400], 9)] {
            let s = sizes(&s);
            let exact = coverage_exact(&s, n);
            let logd = coverage_log_space(&s, n);
            assert!((exact - logd).abs() <= 1e-9 * exact.max(1e-300), "{exact} vs {logd}");
        }
    }

    #[test]
    fn large_populations_use_log_space() {
        let s = sizes(&[250_000; 4]);
        let p = coverage_probability(&s, 40).unwrap();
        // Nearly independent draws: 1 - P ~ 4 * (3/4)^40.
        let approx = 1.0 - 4.0 * 0.75f64.powi(40);
        assert!((p - approx).abs() < 1e-5);
    }

    #[test]
    fn suggested_counts() {
        assert_eq!(suggest_representative_count(&sizes(&[50, 50]), 0.98).unwrap(), 7);
        assert!(coverage_probability(&sizes(&[50, 50]), 6).unwrap() < 0.98);
        assert_eq!(suggest_representative_count(&sizes(&[7, 9, 4]), 1e-9).unwrap(), 3);
        assert_eq!(suggest_representative_count(&sizes(&[2, 2]), 0.999).unwrap(), 3);
        assert!(suggest_representative_count(&sizes(&[2, 2]), 1.0).is_err());
    }

    #[test]
    fn random_selection_edges() {
        let y = DMatrix::from_fn(2, 6, |i, j| (i * 6 + j) as f64);
        let all = select_random(&y, 6, 1).unwrap();
        let mut idx = all.indices.clone();
        idx.sort_unstable();
        assert_eq!(idx, (0..6).collect::<Vec<_>>());
        let one = select_random(&y, 1, 1).unwrap();
        assert_eq!(one.x.column(0), y.column(one.indices[0]));
        assert!(select_random(&y, 0, 1).is_err());
        assert!(select_random(&y, 7, 1).is_err());
        assert_eq!(select_random(&y, 3, 9).unwrap(), select_random(&y, 3, 9).unwrap());
    }

    #[test]
    fn random_pairs_are_uniform() {
        let y = DMatrix::from_fn(1, 4, |_, j| j as f64);
        let draws = 100_000;
        let mut counts = [[0usize; 4]; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..draws {
            let seed: u64 = rng.random();
            let mut s = select_random(&y, 2, seed).unwrap().indices;
            s.sort_unstable();
            counts[s[0]][s[1]] += 1;
        }
        let p = 1.0 / 6.0;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for a in 0..4 {
            for b in a + 1..4 {
                let dev = (counts[a][b] as f64 - draws as f64 * p).abs();
                assert!(dev <= 3.0 * sd, "pair ({a},{b}) count {}", counts[a][b]);
            }
        }
    }

    #[test]
    fn kmeans_selection_recovers_duplicated_columns() {
        let base = [[0.0, 0.0], [5.0, 5.0], [-5.0, 5.0]];
        let mut data = Vec::new();
        for _ in 0..4 {
            for p in base {
                data.extend_from_slice(&p);
            }
        }
        let y = DMatrix::from_column_slice(2, 12, &data);
        let reps = select_kmeans(&y, 3, 0).unwrap();
        let mut found: Vec<(i64, i64)> = reps
            .x
            .column_iter()
            .map(|c| (c[0] as i64, c[1] as i64))
            .collect();
        found.sort_unstable();
        assert_eq!(found, vec![(-5, 5), (0, 0), (5, 5)]);
    }

    #[test]
    fn kmeans_single_representative_is_nearest_to_mean() {
        let y = DMatrix::from_column_slice(1, 5, &[0.0, 1.0, 2.2, 3.0, 10.0]);
        let reps = select_kmeans(&y, 1, 0).unwrap();
        // Mean is 3.24.
        assert_eq!(reps.indices, vec![3]);
    }

    #[test]
    fn duplicate_indices_are_rejected() {
        let y = DMatrix::<f64>::zeros(2, 3);
        assert!(RepresentativeSet::from_indices(&y, vec![0, 0]).is_err());
        assert!(RepresentativeSet::from_indices(&y, vec![3]).is_err());
    }

    #[test]
    fn nested_selection_is_nested() {
        let y = DMatrix::from_fn(2, 20, |i, j| (i + j) as f64);
        let sets = select_random_nested(&y, &[2, 5, 10], 4).unwrap();
        assert_eq!(&sets[1].indices[..2], &sets[0].indices[..]);
        assert_eq!(&sets[2].indices[..5], &sets[1].indices[..]);
        assert!(select_random_nested(&y, &[5, 2], 4).is_err());
    }
}
