//! Embedding-space structure: cosine similarity, SMACOF MDS, and regression
//! of semantic distance onto the theoretical distances.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{compare_metrics_by, MetricComparison};
use crate::error::{Error, Result};
use crate::matrix::YearGrid;
use crate::metrics::TheoreticalMetric;
use crate::years::{PairSet, StimulusTemplate, YearRange};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    pub model: String,
    pub template: StimulusTemplate,
    pub range: YearRange,
    pub dim: usize,
    /// One vector per year in range order.
    pub vectors: Vec<Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(
        model: impl Into<String>,
        template: StimulusTemplate,
        range: YearRange,
        vectors: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if vectors.len() != range.len() {
            return Err(Error::structure(format!(
                "{} vectors for {} years",
                vectors.len(),
                range.len()
            )));
        }
        let dim = vectors.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::structure("embedding dimension is zero"));
        }
        if let Some((k, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != dim) {
            return Err(Error::structure(format!(
                "vector for {} has dim {}, expected {dim}",
                range.start() + k as i32,
                v.len()
            )));
        }
        Ok(Self {
            model: model.into(),
            template,
            range,
            dim,
            vectors,
        })
    }
}

/// Cosine similarities; cells touching a zero vector are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMatrix {
    grid: YearGrid,
}

impl SemanticMatrix {
    pub fn grid(&self) -> &YearGrid {
        &self.grid
    }

    pub fn range(&self) -> YearRange {
        self.grid.range()
    }

    pub fn get(&self, i: i32, j: i32) -> Option<f64> {
        self.grid.get(i, j)
    }

    /// `1 - S` as a dense dissimilarity matrix, or `None` if any cell is
    /// undefined.
    pub fn to_dissimilarity(&self) -> Option<Vec<Vec<f64>>> {
        let n = self.grid.n();
        (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        if r == c {
                            Some(0.0)
                        } else {
                            self.grid.at(r, c).map(|s| (1.0 - s).max(0.0))
                        }
                    })
                    .collect::<Option<Vec<f64>>>()
            })
            .collect()
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn cosine_matrix(e: &EmbeddingSet) -> SemanticMatrix {
    let n = e.vectors.len();
    let upper: Vec<Vec<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| cosine(&e.vectors[i], &e.vectors[j])).collect())
        .collect();
    let mut cells = vec![None; n * n];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            let v = if off == 0 { v.map(|_| 1.0) } else { v };
            cells[i * n + j] = v;
            cells[j * n + i] = v;
        }
    }
    SemanticMatrix {
        grid: YearGrid::from_cells(e.range, cells).expect("n x n cells"),
    }
}

/// Regresses `1 - S` onto each metric over the pairs; undefined cells drop.
pub fn semantic_regression(
    s: &SemanticMatrix,
    pairs: &PairSet,
    metrics: &[TheoreticalMetric],
) -> Result<MetricComparison> {
    compare_metrics_by(pairs, metrics, |i, j| s.get(i, j).map(|v| 1.0 - v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdsConfig {
    pub dims: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MdsConfig {
    fn default() -> Self {
        Self {
            dims: 2,
            tol: 1e-6,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsResult {
    /// `n x dims` coordinates.
    pub coords: Vec<Vec<f64>>,
    /// Kruskal stress-1 of `coords`.
    pub stress: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Stress of the start configuration followed by one entry per iteration.
    pub stress_history: Vec<f64>,
}

fn validate_dissimilarity(d: &[Vec<f64>]) -> Result<()> {
    let n = d.len();
    for (i, row) in d.iter().enumerate() {
        if row.len() != n {
            return Err(Error::structure(format!("row {i} has {} entries, expected {n}", row.len())));
        }
        if row[i] != 0.0 {
            return Err(Error::domain(format!("diagonal entry {i} is {}", row[i])));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(format!("dissimilarity ({i}, {j}) = {v}")));
            }
            if v != d[j][i] {
                return Err(Error::domain(format!("dissimilarity not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `sqrt(sum_{i<j} (d_ij - |y_i - y_j|)^2 / sum_{i<j} d_ij^2)`.
pub fn kruskal_stress(d: &[Vec<f64>], coords: &[Vec<f64>]) -> f64 {
    let n = d.len();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let e = d[i][j] - euclid(&coords[i], &coords[j]);
            num += e * e;
            den += d[i][j] * d[i][j];
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Classical (Torgerson) scaling: top eigenvectors of the double-centered
/// squared dissimilarities, negative eigenvalues clipped to zero.
pub fn classical_mds(d: &[Vec<f64>], dims: usize) -> Result<Vec<Vec<f64>>> {
    validate_dissimilarity(d)?;
    let n = d.len();
    let sq = DMatrix::from_fn(n, n, |i, j| d[i][j] * d[i][j]);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut coords = vec![vec![0.0; dims]; n];
    for (axis, &k) in order.iter().take(dims).enumerate() {
        let scale = eig.eigenvalues[k].max(0.0).sqrt();
        // fix the eigenvector sign so the start is reproducible
        let col = eig.eigenvectors.column(k);
        let pivot = col.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[i][axis] = sign * col[i] * scale;
        }
    }
    Ok(coords)
}

/// SMACOF stress majorization from a classical-MDS start.
pub fn mds_embed(d: &[Vec<f64>], config: MdsConfig) -> Result<MdsResult> {
    validate_dissimilarity(d)?;
    if config.dims == 0 {
        return Err(Error::Config("MDS needs at least one dimension".into()));
    }
    let mut start = classical_mds(d, config.dims)?;
    if start.iter().flatten().all(|&v| v == 0.0) && d.len() > 1 {
        // all-zero start (e.g. every eigenvalue <= 0) leaves the Guttman
        // transform stuck; spread points along the first axis instead
        for (i, p) in start.iter_mut().enumerate() {
            p[0] = i as f64;
        }
    }
    smacof_from(d, start, config)
}

/// SMACOF iterations from a given start configuration.
pub fn smacof_from(d: &[Vec<f64>], start: Vec<Vec<f64>>, config: MdsConfig) -> Result<MdsResult> {
    validate_dissimilarity(d)?;
    let n = d.len();
    if start.len() != n || start.iter().any(|p| p.len() != config.dims) {
        return Err(Error::structure("start configuration has the wrong shape"));
    }
    let mut x = start;
    let mut stress = kruskal_stress(d, &x);
    let mut history = vec![stress];
    let mut converged = false;
    let mut iterations = 0;
    let k = config.dims;
    while iterations < config.max_iter {
        // Guttman transform: X' = B(X) X / n
        let next: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = vec![0.0; k];
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let dist = euclid(&x[i], &x[j]);
                    let ratio = if dist > 0.0 { d[i][j] / dist } else { 0.0 };
                    for a in 0..k {
                        acc[a] += ratio * (x[i][a] - x[j][a]);
                    }
                }
                acc.iter_mut().for_each(|v| *v /= n as f64);
                acc
            })
            .collect();
        x = next;
        iterations += 1;
        let new_stress = kruskal_stress(d, &x);
        debug_assert!(
            new_stress <= stress * (1.0 + 1e-12) + 1e-15,
            "stress increased: {stress} -> {new_stress}"
        );
        history.push(new_stress);
        let decrease = stress - new_stress;
        stress = new_stress;
        if stress == 0.0 || decrease <= config.tol * stress.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(MdsResult {
        coords: x,
        stress,
        iterations,
        converged,
        stress_history: history,
    })
}
