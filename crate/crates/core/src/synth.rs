//! Points drawn from a union of linear subspaces.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::spectral::ClusterLabels;
use crate::{DataMatrix, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisLayout {
    /// Haar-random orthonormal bases from QR of a Gaussian matrix.
    #[default]
    Random,
    /// Lines through the origin of the plane at angles `k·180°/s`.
    /// Needs `d = 2` and every subspace of dimension 1.
    EvenlySpacedLines,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub ambient_dim: usize,
    pub subspace_dims: Vec<usize>,
    pub points_per_subspace: Vec<usize>,
    pub noise_sigma: f64,
    /// Coefficient magnitudes are uniform on `[lo, hi]` with a random sign.
    pub coefficient_range: (f64, f64),
    pub layout: BasisLayout,
    pub seed: u64,
}

impl SynthConfig {
    /// `s` random subspaces of equal dimension and size.
    pub fn uniform(d: usize, s: usize, dim: usize, per: usize, seed: u64) -> Self {
        Self {
            ambient_dim: d,
            subspace_dims: vec![dim; s],
            points_per_subspace: vec![per; s],
            noise_sigma: 0.0,
            coefficient_range: (0.2, 1.0),
            layout: BasisLayout::Random,
            seed,
        }
    }

    /// Four lines in the plane, 200 noisy points on each.
    pub fn replica(seed: u64) -> Self {
        Self {
            ambient_dim: 2,
            subspace_dims: vec![1; 4],
            points_per_subspace: vec![200; 4],
            noise_sigma: 0.02,
            coefficient_range: (0.2, 1.0),
            layout: BasisLayout::EvenlySpacedLines,
            seed,
        }
    }

    pub fn num_subspaces(&self) -> usize {
        self.subspace_dims.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let d = self.ambient_dim;
        if self.subspace_dims.is_empty() {
            return bad("at least one subspace is required".into());
        }
        if self.points_per_subspace.len() != self.subspace_dims.len() {
            return bad(format!(
                "{} subspace dimensions but {} point counts",
                self.subspace_dims.len(),
                self.points_per_subspace.len()
            ));
        }
        if let Some(&bad_dim) = self.subspace_dims.iter().find(|&&k| k == 0 || k >= d) {
            return bad(format!("subspace dimension {bad_dim} must lie in 1..{d}"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise sigma must be nonnegative, got {}", self.noise_sigma));
        }
        let (lo, hi) = self.coefficient_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return bad(format!("coefficient range [{lo}, {hi}] is invalid"));
        }
        if self.layout == BasisLayout::EvenlySpacedLines
            && (d != 2 || self.subspace_dims.iter().any(|&k| k != 1))
        {
            return bad("evenly spaced lines need d = 2 and one-dimensional subspaces".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub y: DataMatrix,
    pub labels: ClusterLabels,
    pub bases: Vec<Matrix>,
}

/// Orthonormal `d × k` basis from the QR factor of a Gaussian matrix.
pub fn random_basis(d: usize, k: usize, rng: &mut impl Rng) -> Matrix {
    let g = DMatrix::from_fn(d, k, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    // Fix column signs so the draw is Haar-distributed.
    let r = qr.r();
    for c in 0..k {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

pub fn generate(config: &SynthConfig) -> Result<LabeledDataset> {
    config.validate()?;
    let d = config.ambient_dim;
    let s = config.num_subspaces();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bases: Vec<Matrix> = match config.layout {
        BasisLayout::Random => config
            .subspace_dims
            .iter()
            .map(|&k| random_basis(d, k, &mut rng))
            .collect(),
        BasisLayout::EvenlySpacedLines => (0..s)
            .map(|i| {
                let angle = std::f64::consts::PI * i as f64 / s as f64;
                DMatrix::from_column_slice(2, 1, &[angle.cos(), angle.sin()])
            })
            .collect(),
    };

    let total: usize = config.points_per_subspace.iter().sum();
    let mut y = DMatrix::zeros(d, total);
    let mut labels = Vec::with_capacity(total);
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let (lo, hi) = config.coefficient_range;
    let mut col = 0;
    for (i, (basis, &count)) in bases.iter().zip(&config.points_per_subspace).enumerate() {
        let k = basis.ncols();
        for _ in 0..count {
            let coeffs = nalgebra::DVector::from_fn(k, |_, _| {
                let magnitude = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                if rng.random_bool(0.5) {
                    magnitude
                } else {
                    -magnitude
                }
            });
            let mut point = basis * coeffs;
            if config.noise_sigma > 0.0 {
                for v in point.iter_mut() {
                    *v += noise.sample(&mut rng);
                }
            }
            y.set_column(col, &point);
            labels.push(i);
            col += 1;
        }
    }
    Ok(LabeledDataset {
        y,
        labels: ClusterLabels::new(labels),
        bases,
    })
}
