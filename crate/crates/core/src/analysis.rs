//! Empirical checks of how tightly a trained encoder contracts each point
//! onto the code of its representative.

use nalgebra::DVector;

use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::sampling::{nearest_column, RepresentativeSet};
use crate::{DataMatrix, Matrix};

/// Dissimilarity used to assign points to representatives.
#[derive(Debug, Clone, Copy)]
pub enum Dissimilarity<'a> {
    Euclidean,
    /// Distance between encoder outputs, `||f(x) - f(y)||`.
    EncodingError(&'a EncoderParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusReport {
    pub rho: f64,
    /// Index into the representative set for every column of `Y`.
    pub assignment: Vec<usize>,
    pub distances: Vec<f64>,
}

pub fn representative_radius(y: &DataMatrix, reps: &RepresentativeSet) -> Result<RadiusReport> {
    representative_radius_with(y, reps, Dissimilarity::Euclidean)
}

pub fn representative_radius_with(
    y: &DataMatrix,
    reps: &RepresentativeSet,
    dissimilarity: Dissimilarity<'_>,
) -> Result<RadiusReport> {
    if reps.is_empty() {
        return Err(Error::InvalidInput("representative set is empty".into()));
    }
    if reps.x.nrows() != y.nrows() {
        return Err(Error::Shape(format!(
            "representatives have {} features, data has {}",
            reps.x.nrows(),
            y.nrows()
        )));
    }
    let nearest = match dissimilarity {
        Dissimilarity::Euclidean => nearest_column(y, &reps.x),
        Dissimilarity::EncodingError(params) => {
            nearest_column(&params.forward(y)?, &params.forward(&reps.x)?)
        }
    };
    let (assignment, distances): (Vec<usize>, Vec<f64>) = nearest.into_iter().unzip();
    let rho = distances.iter().cloned().fold(0.0, f64::max);
    Ok(RadiusReport {
        rho,
        assignment,
        distances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRecord {
    pub point: usize,
    pub representative: usize,
    /// `||f(x) - f(y)||`.
    pub lhs: f64,
    /// `||J_f(x)||_F ||x - y||`.
    pub bound: f64,
    /// `bound - lhs`.
    pub slack: f64,
    /// `||f(y) - f(x) - J_f(x)(y - x)||`.
    pub remainder: f64,
    /// `lhs <= bound * (1 + margin)`.
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub rho: f64,
    pub margin: f64,
    pub pairs: Vec<PairRecord>,
    pub fraction_satisfied: f64,
    pub max_remainder: f64,
}

pub const DEFAULT_MARGIN: f64 = 0.25;

pub fn check_contraction(
    y: &DataMatrix,
    reps: &RepresentativeSet,
    params: &EncoderParams,
) -> Result<ContractionReport> {
    check_contraction_with(y, reps, params, DEFAULT_MARGIN)
}

pub fn check_contraction_with(
    y: &DataMatrix,
    reps: &RepresentativeSet,
    params: &EncoderParams,
    margin: f64,
) -> Result<ContractionReport> {
    if params.input_dim() != y.nrows() {
        return Err(Error::Shape(format!(
            "encoder expects {} features, data has {}",
            params.input_dim(),
            y.nrows()
        )));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::InvalidInput(format!("margin must be nonnegative, got {margin}")));
    }
    let radius = representative_radius(y, reps)?;
    let fy = params.forward(y)?;
    let fx = params.forward(&reps.x)?;
    let jacobians: Vec<Matrix> = reps
        .x
        .column_iter()
        .map(|c| params.jacobian(&c.into_owned()))
        .collect::<Result<_>>()?;
    let jac_norms: Vec<f64> = jacobians.iter().map(|j| j.norm()).collect();

    let mut pairs = Vec::with_capacity(y.ncols());
    let mut satisfied = 0usize;
    let mut max_remainder = 0.0f64;
    for (point, &r) in radius.assignment.iter().enumerate() {
        let step: DVector<f64> = y.column(point) - reps.x.column(r);
        let diff = fy.column(point) - fx.column(r);
        let lhs = diff.norm();
        let bound = jac_norms[r] * step.norm();
        let remainder = (diff - &jacobians[r] * &step).norm();
        let ok = lhs <= bound * (1.0 + margin);
        satisfied += ok as usize;
        max_remainder = max_remainder.max(remainder);
        pairs.push(PairRecord {
            point,
            representative: r,
            lhs,
            bound,
            slack: bound - lhs,
            remainder,
            satisfied: ok,
        });
    }
    let fraction_satisfied = if pairs.is_empty() {
        1.0
    } else {
        satisfied as f64 / pairs.len() as f64
    };
    Ok(ContractionReport {
        rho: radius.rho,
        margin,
        pairs,
        fraction_satisfied,
        max_remainder,
    })
}

/// Least-squares slope of `log(ys)` against `log(xs)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput(
            "slope fit needs at least two paired values".into(),
        ));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("slope fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all radii are equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{encoder_init, Activation, EncoderConfig};
    use crate::sampling::select_random_nested;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn tanh_net(d: usize, out: usize, hidden: Vec<usize>, seed: u64) -> EncoderParams {
        let config = EncoderConfig {
            hidden_sizes: hidden,
            init_scale: 0.8,
            seed,
            hidden_activation: Activation::Tanh,
            ..EncoderConfig::default()
        };
        encoder_init(d, out, &config).unwrap()
    }

    #[test]
    fn self_cover_has_zero_radius() {
        let y = random(3, 9, 1);
        let reps = RepresentativeSet::from_indices(&y, (0..9).collect()).unwrap();
        let r = representative_radius(&y, &reps).unwrap();
        assert_eq!(r.rho, 0.0);
        assert_eq!(r.assignment, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn radius_of_single_origin_representative() {
        let y = DMatrix::from_column_slice(2, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 3.0]);
        let reps = RepresentativeSet::from_indices(&y, vec![0]).unwrap();
        assert_eq!(representative_radius(&y, &reps).unwrap().rho, 3.0);
    }

    #[test]
    fn nested_doubling_never_increases_radius() {
        let y = random(4, 300, 2);
        let sets = select_random_nested(&y, &[5, 10, 20, 40, 80], 3).unwrap();
        let rhos: Vec<f64> = sets
            .iter()
            .map(|s| representative_radius(&y, s).unwrap().rho)
            .collect();
        assert!(rhos.windows(2).all(|w| w[1] <= w[0]), "{rhos:?}");
    }

    #[test]
    fn encoding_error_dissimilarity() {
        let y = random(3, 20, 4);
        let reps = RepresentativeSet::from_indices(&y, vec![0, 5, 9]).unwrap();
        let params = tanh_net(3, 2, vec![4], 5);
        let r = representative_radius_with(&y, &reps, Dissimilarity::EncodingError(&params)).unwrap();
        let fy = params.forward(&y).unwrap();
        for (p, &a) in r.assignment.iter().enumerate() {
            let d = (fy.column(p) - fy.column(reps.indices[a])).norm();
            assert!((d - r.distances[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_net_is_exact() {
        let y = random(4, 50, 6);
        let reps = RepresentativeSet::from_indices(&y, vec![1, 7, 30]).unwrap();
        let w = random(3, 4, 7);
        let params = EncoderParams::new(vec![w], Activation::Identity, Activation::Identity).unwrap();
        let report = check_contraction_with(&y, &reps, &params, 0.0).unwrap();
        assert_eq!(report.fraction_satisfied, 1.0);
        for p in &report.pairs {
            assert!(p.slack >= -1e-12);
            assert!(p.remainder <= 1e-12);
        }
    }

    #[test]
    fn coincident_pair_has_zero_bound() {
        let y = random(2, 4, 8);
        let reps = RepresentativeSet::from_indices(&y, vec![2]).unwrap();
        let report = check_contraction(&y, &reps, &tanh_net(2, 3, vec![5], 9)).unwrap();
        let own = report.pairs[2];
        assert_eq!((own.lhs, own.bound), (0.0, 0.0));
        assert!(own.satisfied);
    }

    #[test]
    fn remainder_is_second_order_for_smooth_nets() {
        // Points at radius r around fixed centers: the remainder scales like r^2.
        let params = tanh_net(3, 2, vec![6, 6], 10);
        let centers = random(3, 5, 11);
        let dirs = random(3, 40, 12);
        let radii = [0.2, 0.1, 0.05, 0.025];
        let mut remainders = Vec::new();
        for &r in &radii {
            let mut cols = vec![];
            for c in 0..5 {
                cols.push(centers.column(c).into_owned());
                for k in 0..8 {
                    let dvec = dirs.column(c * 8 + k).normalize();
                    cols.push(centers.column(c) + dvec * r);
                }
            }
            let y = DMatrix::from_columns(&cols);
            let reps = RepresentativeSet::from_indices(&y, (0..5).map(|c| c * 9).collect()).unwrap();
            remainders.push(check_contraction(&y, &reps, &params).unwrap().max_remainder);
        }
        let slope = loglog_slope(&radii, &remainders).unwrap();
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn slope_of_a_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.7)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 1.7).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
        assert!(loglog_slope(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let y = random(3, 5, 13);
        let reps = RepresentativeSet::from_indices(&y, vec![0]).unwrap();
        assert!(matches!(
            check_contraction(&y, &reps, &tanh_net(4, 2, vec![3], 0)),
            Err(Error::Shape(_))
        ));
    }
}
