//! External clustering quality: accuracy under the best label matching and
//! normalized mutual information.

use crate::error::{Error, Result};
use crate::spectral::ClusterLabels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NmiNormalization {
    #[default]
    Geometric,
    Arithmetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub acc: f64,
    pub nmi: f64,
    /// `contingency[p][t]` counts points with predicted label `p` and true label `t`.
    pub contingency: Vec<Vec<usize>>,
}

fn check_lengths(pred: &ClusterLabels, truth: &ClusterLabels) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "label lengths differ: {} predicted vs {} true",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

pub fn contingency(pred: &ClusterLabels, truth: &ClusterLabels) -> Result<Vec<Vec<usize>>> {
    check_lengths(pred, truth)?;
    let (kp, kt) = (pred.num_clusters(), truth.num_clusters());
    let mut table = vec![vec![0usize; kt]; kp];
    for (&p, &t) in pred.as_slice().iter().zip(truth.as_slice()) {
        table[p][t] += 1;
    }
    Ok(table)
}

/// Fraction of points matched under the best one-to-one label mapping.
pub fn accuracy(pred: &ClusterLabels, truth: &ClusterLabels) -> Result<f64> {
    let table = contingency(pred, truth)?;
    Ok(accuracy_from_table(&table, pred.len()))
}

fn accuracy_from_table(table: &[Vec<usize>], m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let matched = max_weight_matching(table);
    matched as f64 / m as f64
}

/// Maximum total weight of a matching between rows and columns.
pub fn max_weight_matching(weights: &[Vec<usize>]) -> usize {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let size = rows.max(cols);
    if size == 0 {
        return 0;
    }
    let max_w = weights.iter().flatten().copied().max().unwrap_or(0) as i64;
    // Minimise cost = max_w - weight over a square matrix padded with zero weights.
    let cost = |i: usize, j: usize| -> i64 {
        let w = weights.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0) as i64;
        max_w - w
    };
    let assignment = hungarian(size, cost);
    assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| weights.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0))
        .sum()
}

/// Shortest augmenting path Hungarian algorithm on an `n x n` cost matrix.
/// Returns the column assigned to every row.
fn hungarian(n: usize, cost: impl Fn(usize, usize) -> i64) -> Vec<usize> {
    const INF: i64 = i64::MAX / 4;
    // 1-based potentials; column 0 is a virtual start.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut owner = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

fn entropy(counts: impl Iterator<Item = usize>, m: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / m;
            -p * p.ln()
        })
        .sum()
}

pub fn nmi(pred: &ClusterLabels, truth: &ClusterLabels) -> Result<f64> {
    nmi_with(pred, truth, NmiNormalization::Geometric)
}

/// Mutual information (natural log) over the normalizing mean of the two
/// entropies. Two constant partitions score 1, one constant partition 0.
pub fn nmi_with(
    pred: &ClusterLabels,
    truth: &ClusterLabels,
    norm: NmiNormalization,
) -> Result<f64> {
    let table = contingency(pred, truth)?;
    Ok(nmi_from_table(&table, pred.len(), norm))
}

fn nmi_from_table(table: &[Vec<usize>], m: usize, norm: NmiNormalization) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mf = m as f64;
    let rows: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..table.first().map_or(0, Vec::len))
        .map(|j| table.iter().map(|r| r[j]).sum())
        .collect();
    let hp = entropy(rows.iter().copied(), mf);
    let ht = entropy(cols.iter().copied(), mf);
    if hp == 0.0 && ht == 0.0 {
        return 1.0;
    }
    if hp == 0.0 || ht == 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let pij = c as f64 / mf;
                mi += pij * (c as f64 * mf / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    let denom = match norm {
        NmiNormalization::Geometric => (hp * ht).sqrt(),
        NmiNormalization::Arithmetic => 0.5 * (hp + ht),
    };
    (mi / denom).clamp(0.0, 1.0)
}

pub fn evaluate(pred: &ClusterLabels, truth: &ClusterLabels) -> Result<EvalReport> {
    let table = contingency(pred, truth)?;
    let m = pred.len();
    Ok(EvalReport {
        acc: accuracy_from_table(&table, m),
        nmi: nmi_from_table(&table, m, NmiNormalization::Geometric),
        contingency: table,
    })
}
