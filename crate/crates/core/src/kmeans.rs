//! Lloyd's k-means with k-means++ seeding, over the rows of a matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::ClusterLabels;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeans {
    pub k: usize,
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest inertia wins.
    pub n_init: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub labels: ClusterLabels,
    /// One centroid per row.
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations: usize,
}

impl KMeans {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iter: 300,
            n_init: 1,
            seed,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_restarts(mut self, n_init: usize) -> Self {
        self.n_init = n_init.max(1);
        self
    }

    /// Cluster the rows of `points`.
    pub fn fit(&self, points: &Matrix) -> Result<KMeansFit> {
        let (m, dim) = points.shape();
        if self.k == 0 {
            return Err(Error::InvalidInput("k-means needs k >= 1".into()));
        }
        if self.k > m {
            return Err(Error::InvalidInput(format!(
                "k-means with k = {} on only {m} points",
                self.k
            )));
        }
        if !points.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("k-means input is not finite".into()));
        }
        let rows = RowMajor::new(points);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut best: Option<Run> = None;
        for _ in 0..self.n_init.max(1) {
            let run = lloyd(&rows, self.k, self.max_iter, &mut rng);
            if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
                best = Some(run);
            }
        }
        let best = best.expect("at least one restart");
        Ok(KMeansFit {
            labels: ClusterLabels::new(best.labels),
            centroids: Matrix::from_row_slice(self.k, dim, &best.centroids),
            inertia: best.inertia,
            iterations: best.iterations,
        })
    }
}

/// Single k-means++ / Lloyd run over the rows of `points`.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, max_iter: usize) -> Result<ClusterLabels> {
    Ok(KMeans::new(k, seed).with_max_iter(max_iter).fit(points)?.labels)
}

struct RowMajor {
    data: Vec<f64>,
    m: usize,
    dim: usize,
}

impl RowMajor {
    fn new(points: &Matrix) -> Self {
        let (m, dim) = points.shape();
        let mut data = Vec::with_capacity(m * dim);
        for r in 0..m {
            data.extend(points.row(r).iter());
        }
        Self { data, m, dim }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Run {
    labels: Vec<usize>,
    centroids: Vec<f64>,
    inertia: f64,
    iterations: usize,
}

fn plus_plus(rows: &RowMajor, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dim = rows.dim;
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..rows.m);
    centroids.extend_from_slice(rows.row(first));
    let mut d2: Vec<f64> = (0..rows.m)
        .map(|i| sq_dist(rows.row(i), rows.row(first)))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = rows.m - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..rows.m)
        };
        let start = centroids.len();
        centroids.extend_from_slice(rows.row(pick));
        let c = centroids[start..start + dim].to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(rows.row(i), &c));
        }
    }
    centroids
}

fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(rows: &RowMajor, k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> Run {
    let (m, dim) = (rows.m, rows.dim);
    let mut centroids = plus_plus(rows, k, rng);
    let mut labels = vec![usize::MAX; m];
    let mut dists = vec![0.0; m];
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for i in 0..m {
            let (c, d) = nearest(rows.row(i), &centroids, dim);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
            dists[i] = d;
        }
        if !changed || iterations >= max_iter {
            break;
        }
        iterations += 1;

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..m {
            let c = labels[i];
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(rows.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its centroid.
                let far = (0..m)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]))
                    .expect("m >= k >= 1");
                let old = labels[far];
                counts[old] -= 1;
                for (s, v) in sums[old * dim..(old + 1) * dim].iter_mut().zip(rows.row(far)) {
                    *s -= v;
                }
                labels[far] = c;
                dists[far] = 0.0;
                counts[c] = 1;
                sums[c * dim..(c + 1) * dim].copy_from_slice(rows.row(far));
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids[c * dim..(c + 1) * dim]
                    .iter_mut()
                    .zip(&sums[c * dim..(c + 1) * dim])
                {
                    *dst = s * inv;
                }
            }
        }
    }
    let inertia = dists.iter().sum();
    Run {
        labels,
        centroids,
        inertia,
        iterations,
    }
}
