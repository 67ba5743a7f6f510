//! Regression of judged distances onto theoretical distances, and the
//! diagonal sliding-window reference estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DistanceMatrix, SimilarityMatrix, YearGrid};
use crate::metrics::TheoreticalMetric;
use crate::years::PairSet;

/// Below this total sum of squares the target is treated as constant.
pub const DEGENERATE_SS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    /// Slope.
    pub alpha: f64,
    /// Intercept.
    pub beta: f64,
    pub r2: f64,
    pub n: usize,
    /// Set when the target (or predictor) has no variance; `r2` is then 0.
    pub degenerate: bool,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.alpha * x + self.beta
    }
}

/// Simple least squares `y = alpha * x + beta`.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<RegressionFit> {
    if x.len() != y.len() {
        return Err(Error::structure(format!(
            "x has {} samples, y has {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::insufficient(format!("regression needs n >= 2, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite regression input"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if syy < DEGENERATE_SS || sxx == 0.0 {
        let alpha = if sxx == 0.0 { 0.0 } else { sxy / sxx };
        return Ok(RegressionFit {
            alpha,
            beta: my - alpha * mx,
            r2: 0.0,
            n,
            degenerate: true,
        });
    }
    let alpha = sxy / sxx;
    let beta = my - alpha * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let e = yi - (alpha * xi + beta);
            e * e
        })
        .sum();
    Ok(RegressionFit {
        alpha,
        beta,
        r2: (1.0 - ss_res / syy).clamp(0.0, 1.0),
        n,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFit {
    pub metric: TheoreticalMetric,
    pub fit: RegressionFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub fits: Vec<MetricFit>,
    pub best: TheoreticalMetric,
}

impl MetricComparison {
    pub fn fit_for(&self, key: &str) -> Option<&RegressionFit> {
        self.fits.iter().find(|f| f.metric.key() == key).map(|f| &f.fit)
    }
}

/// Fits every metric against the same filtered sample. A pair is kept only
/// if `target` yields a value and every metric is defined on it.
pub fn compare_metrics_by<F>(
    pairs: &PairSet,
    metrics: &[TheoreticalMetric],
    target: F,
) -> Result<MetricComparison>
where
    F: Fn(i32, i32) -> Option<f64>,
{
    if metrics.is_empty() {
        return Err(Error::Config("no metrics to compare".into()));
    }
    let mut y = Vec::with_capacity(pairs.len());
    let mut xs: Vec<Vec<f64>> = vec![Vec::with_capacity(pairs.len()); metrics.len()];
    let mut row = vec![0.0; metrics.len()];
    'pairs: for (i, j) in pairs.iter() {
        let Some(v) = target(i, j) else { continue };
        for (slot, m) in row.iter_mut().zip(metrics) {
            match m.eval(i, j) {
                Ok(x) => *slot = x,
                Err(_) => continue 'pairs,
            }
        }
        y.push(v);
        for (col, &x) in xs.iter_mut().zip(&row) {
            col.push(x);
        }
    }
    if y.len() < 2 {
        return Err(Error::insufficient(format!(
            "only {} usable pairs after dropping missing cells",
            y.len()
        )));
    }
    let fits = xs
        .par_iter()
        .zip(metrics.par_iter())
        .map(|(x, &metric)| ols_fit(x, &y).map(|fit| MetricFit { metric, fit }))
        .collect::<Result<Vec<_>>>()?;
    let best = pick_best(&fits);
    Ok(MetricComparison { fits, best })
}

fn pick_best(fits: &[MetricFit]) -> TheoreticalMetric {
    let mut best = &fits[0];
    for f in &fits[1..] {
        let better = f.fit.r2 > best.fit.r2
            || (f.fit.r2 == best.fit.r2 && f.metric.rank() < best.metric.rank());
        if better {
            best = f;
        }
    }
    best.metric
}

pub fn compare_metrics(
    d: &DistanceMatrix,
    pairs: &PairSet,
    metrics: &[TheoreticalMetric],
) -> Result<MetricComparison> {
    compare_metrics_by(pairs, metrics, |i, j| d.get(i, j))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPoint {
    pub center: i32,
    pub mean_similarity: f64,
    /// Present off-diagonal cells that entered the mean.
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEstimate {
    pub window: usize,
    pub profile: Vec<WindowPoint>,
    pub argmin: i32,
}

pub const DEFAULT_WINDOW: usize = 5;

/// Slides a `window x window` block along the diagonal and returns the center
/// with the lowest mean off-diagonal similarity. Centers whose block would
/// leave the matrix are not evaluated; blocks with no present cells are
/// skipped; ties go to the earliest year.
pub fn estimate_reference(s: &SimilarityMatrix, window: usize) -> Result<ReferenceEstimate> {
    window_profile(s.grid(), window)
}

pub(crate) fn window_profile(grid: &YearGrid, window: usize) -> Result<ReferenceEstimate> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::Config(format!("window must be odd and positive, got {window}")));
    }
    let n = grid.n();
    if n < window {
        return Err(Error::insufficient(format!(
            "matrix has {n} rows, window needs {window}"
        )));
    }
    let half = window / 2;
    let profile: Vec<WindowPoint> = (half..n - half)
        .into_par_iter()
        .filter_map(|c| {
            let mut sum = 0.0;
            let mut cells = 0usize;
            for r in c - half..=c + half {
                for k in c - half..=c + half {
                    if r == k {
                        continue;
                    }
                    if let Some(v) = grid.at(r, k) {
                        sum += v;
                        cells += 1;
                    }
                }
            }
            (cells > 0).then(|| WindowPoint {
                center: grid.range().year_at(c).expect("center within range"),
                mean_similarity: sum / cells as f64,
                cells,
            })
        })
        .collect();
    let argmin = profile
        .iter()
        .fold(None::<&WindowPoint>, |best, p| match best {
            Some(b) if b.mean_similarity <= p.mean_similarity => Some(b),
            _ => Some(p),
        })
        .map(|p| p.center)
        .ok_or_else(|| Error::insufficient("every window was empty"))?;
    Ok(ReferenceEstimate {
        window,
        profile,
        argmin,
    })
}
