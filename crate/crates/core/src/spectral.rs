//! Landmark-style spectral clustering of code matrices.
//!
//! The similarity `W = Z̃ᵀ Z̃` over all `m` points is never formed: its top
//! eigenvectors are the right singular vectors of the `n x m` matrix `Z̃`,
//! recovered from the small `n x n` Gram matrix `Z̃ Z̃ᵀ`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kmeans::KMeans;
use crate::linalg::{svd, symmetric_eigen_desc};
use crate::Matrix;

/// One cluster index per point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClusterLabels(Vec<usize>);

impl ClusterLabels {
    pub fn new(labels: Vec<usize>) -> Self {
        Self(labels)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of label values, `max + 1`.
    pub fn num_clusters(&self) -> usize {
        self.0.iter().max().map_or(0, |&m| m + 1)
    }

    pub fn distinct(&self) -> usize {
        let mut seen = self.0.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

impl From<Vec<usize>> for ClusterLabels {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone)]
pub struct SimilarityEmbedding {
    /// `m x k`, one embedding row per point.
    pub v: Matrix,
    /// Descending singular values of `Z̃`.
    pub sigma: DVector<f64>,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbedMethod {
    /// Eigendecomposition of the `n x n` Gram matrix; linear in `m`.
    #[default]
    Gram,
    /// Thin SVD of `Z̃` itself, for `n` close to `m`.
    Svd,
}

/// `D^{-1/2} |Z|` with `D_ii = Σ_j |Z_ij|`. Zero rows stay zero.
pub fn normalize_codes(codes: &Matrix) -> Result<Matrix> {
    if !codes.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("codes contain non-finite entries".into()));
    }
    let mut out = codes.abs();
    let mut any = false;
    for mut row in out.row_iter_mut() {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            any = true;
            row /= sum.sqrt();
        }
    }
    if !any {
        return Err(Error::Degenerate("code matrix is entirely zero".into()));
    }
    Ok(out)
}

fn rank_check(sigma: &DVector<f64>, k: usize) -> Result<()> {
    let top = sigma.get(0).copied().unwrap_or(0.0);
    for i in 0..k {
        let s = sigma.get(i).copied().unwrap_or(0.0);
        if !(s > 1e-12 * top) || top == 0.0 {
            return Err(Error::RankDeficient {
                index: i,
                sigma: s,
                sigma_max: top,
            });
        }
    }
    Ok(())
}

/// Top-`k` right singular vectors of `Z̃` (`m x k`) via the `n x n` Gram matrix.
pub fn spectral_embed(ztilde: &Matrix, k: usize) -> Result<SimilarityEmbedding> {
    spectral_embed_with(ztilde, k, EmbedMethod::Gram)
}

pub fn spectral_embed_with(
    ztilde: &Matrix,
    k: usize,
    method: EmbedMethod,
) -> Result<SimilarityEmbedding> {
    let (n, m) = ztilde.shape();
    if k == 0 || k > n || k > m {
        return Err(Error::InvalidInput(format!(
            "embedding dimension {k} must lie in 1..={}",
            n.min(m)
        )));
    }
    match method {
        EmbedMethod::Gram => {
            let gram = ztilde * ztilde.transpose();
            let (values, vectors) = symmetric_eigen_desc(&gram)?;
            let sigma = DVector::from_iterator(k, values.iter().take(k).map(|l| l.max(0.0).sqrt()));
            rank_check(&sigma, k)?;
            let u = vectors.columns(0, k).into_owned();
            let mut v = ztilde.transpose() * u;
            for (j, mut col) in v.column_iter_mut().enumerate() {
                col /= sigma[j];
            }
            Ok(SimilarityEmbedding { v, sigma, k })
        }
        EmbedMethod::Svd => {
            let (_, s, v_t) = svd(ztilde)?;
            let sigma = DVector::from_iterator(k, s.iter().take(k).cloned());
            rank_check(&sigma, k)?;
            let v = v_t.rows(0, k).transpose();
            Ok(SimilarityEmbedding { v, sigma, k })
        }
    }
}

/// Scale every nonzero row to unit Euclidean norm.
pub fn normalize_rows(v: &mut Matrix) {
    for mut row in v.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptions {
    pub row_normalize: bool,
    pub method: EmbedMethod,
    pub max_iter: usize,
    pub restarts: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            row_normalize: true,
            method: EmbedMethod::Gram,
            max_iter: 300,
            restarts: 10,
        }
    }
}

/// Normalize codes, embed, optionally row-normalize, then k-means.
pub fn cluster_embedding(codes: &Matrix, k: usize, seed: u64) -> Result<ClusterLabels> {
    Ok(cluster_embedding_with(codes, k, seed, &ClusterOptions::default())?.0)
}

/// As [`cluster_embedding`], also returning the embedding.
pub fn cluster_embedding_with(
    codes: &Matrix,
    k: usize,
    seed: u64,
    options: &ClusterOptions,
) -> Result<(ClusterLabels, SimilarityEmbedding)> {
    let ztilde = normalize_codes(codes)?;
    let mut embedding = spectral_embed_with(&ztilde, k, options.method)?;
    let labels = cluster_rows(&mut embedding.v, k, seed, options)?;
    Ok((labels, embedding))
}

/// The k-means stage on an explicit embedding (rows are points).
pub fn cluster_rows(
    v: &mut Matrix,
    k: usize,
    seed: u64,
    options: &ClusterOptions,
) -> Result<ClusterLabels> {
    if options.row_normalize {
        normalize_rows(v);
    }
    Ok(KMeans::new(k, seed)
        .with_max_iter(options.max_iter)
        .with_restarts(options.restarts)
        .fit(v)?
        .labels)
}
