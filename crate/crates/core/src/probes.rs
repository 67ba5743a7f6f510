//! Affine probes trained on per-layer hidden states to decode the
//! theoretical distances.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::DEGENERATE_SS;
use crate::error::{Error, Result};
use crate::metrics::TheoreticalMetric;
use crate::years::PairSet;

/// Residual-stream states at the last token, row-major `[pair x dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStateBatch {
    pub layer: u32,
    /// Indices into the declared pair set, one per row.
    pub pair_indices: Vec<usize>,
    pub dim: usize,
    pub values: Vec<f32>,
}

impl HiddenStateBatch {
    pub fn new(layer: u32, pair_indices: Vec<usize>, dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::structure("hidden dimension must be at least 1"));
        }
        if values.len() != pair_indices.len() * dim {
            return Err(Error::structure(format!(
                "layer {layer}: {} values for {} rows x {dim}",
                values.len(),
                pair_indices.len()
            )));
        }
        Ok(Self {
            layer,
            pair_indices,
            dim,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.pair_indices.len()
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.values[r * self.dim..(r + 1) * self.dim]
    }

    pub fn select_rows(&self, rows: &[usize]) -> HiddenStateBatch {
        let mut values = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        HiddenStateBatch {
            layer: self.layer,
            pair_indices: rows.iter().map(|&r| self.pair_indices[r]).collect(),
            dim: self.dim,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ProbeModel {
    pub fn predict(&self, row: &[f32]) -> f64 {
        self.weights
            .iter()
            .zip(row)
            .map(|(w, &x)| w * f64::from(x))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub standardize: bool,
    /// Fraction of the final epochs over which the iterates are averaged
    /// (0 returns the last iterate). Averaging removes the step-size jitter
    /// a constant-rate Adam leaves around the optimum.
    pub average_tail: f64,
}

impl Default for ProbeTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 200,
            batch_size: 32,
            train_fraction: 0.8,
            seed: 0,
            standardize: true,
            average_tail: 0.25,
        }
    }
}

impl ProbeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction {} not in (0, 1)",
                self.train_fraction
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.average_tail) {
            return Err(Error::Config(format!(
                "average tail {} not in [0, 1)",
                self.average_tail
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Disjoint train / held-out row sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSplit {
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl ProbeSplit {
    pub fn new(rows: usize, train_fraction: f64, seed: u64) -> Result<Self> {
        if rows < 2 {
            return Err(Error::insufficient(format!("{rows} rows cannot be split")));
        }
        let mut idx: Vec<usize> = (0..rows).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = ((rows as f64 * train_fraction).round() as usize).clamp(1, rows - 1);
        let mut train = idx[..n_train].to_vec();
        let mut test = idx[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok(Self { seed, train, test })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedProbe {
    pub model: ProbeModel,
    pub split: ProbeSplit,
    /// Mean squared error on the train rows, in target units.
    pub train_mse: f64,
    /// Closed-form least-squares train MSE, computed when `dim <= 64`.
    pub least_squares_mse: Option<f64>,
    /// Adam ended more than 1% above the least-squares optimum.
    pub convexity_flag: bool,
    /// Train targets were constant; the model is that constant.
    pub degenerate: bool,
}

pub const CONVEXITY_CHECK_MAX_DIM: usize = 64;

fn validate_inputs(batch: &HiddenStateBatch, targets: &[f64]) -> Result<()> {
    if targets.len() != batch.rows() {
        return Err(Error::structure(format!(
            "{} targets for {} rows",
            targets.len(),
            batch.rows()
        )));
    }
    if batch.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("layer {}: non-finite hidden state", batch.layer)));
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite probe target".into()));
    }
    Ok(())
}

fn mean_std(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Trains an affine probe with Adam on the MSE loss over the train split.
///
/// Weights start at zero. With `standardize`, inputs and target are
/// z-scored using train-split statistics during optimization and the
/// scaling is folded back into the returned map.
pub fn train_probe(
    batch: &HiddenStateBatch,
    targets: &[f64],
    config: &ProbeTrainConfig,
) -> Result<TrainedProbe> {
    config.validate()?;
    validate_inputs(batch, targets)?;
    let split = ProbeSplit::new(batch.rows(), config.train_fraction, config.seed)?;
    train_on_split(batch, targets, config, split)
}

pub fn train_on_split(
    batch: &HiddenStateBatch,
    targets: &[f64],
    config: &ProbeTrainConfig,
    split: ProbeSplit,
) -> Result<TrainedProbe> {
    config.validate()?;
    validate_inputs(batch, targets)?;
    let dim = batch.dim;
    let train = &split.train;
    let n = train.len();
    if n == 0 {
        return Err(Error::insufficient("empty train split"));
    }

    let (mut x_mean, mut x_scale) = (vec![0.0; dim], vec![1.0; dim]);
    if config.standardize {
        for k in 0..dim {
            let (m, s) = mean_std(train.iter().map(|&r| f64::from(batch.row(r)[k])), n);
            x_mean[k] = m;
            x_scale[k] = if s > 0.0 { s } else { 1.0 };
        }
    }
    let (y_mean, y_sd) = mean_std(train.iter().map(|&r| targets[r]), n);
    if y_sd * y_sd * (n as f64) < DEGENERATE_SS {
        return Ok(TrainedProbe {
            model: ProbeModel {
                weights: vec![0.0; dim],
                bias: y_mean,
            },
            split,
            train_mse: 0.0,
            least_squares_mse: None,
            convexity_flag: false,
            degenerate: true,
        });
    }
    let (y_shift, y_scale) = if config.standardize { (y_mean, y_sd) } else { (0.0, 1.0) };

    let mut w = vec![0.0f64; dim];
    let mut b = 0.0f64;
    let (mut m_w, mut v_w) = (vec![0.0f64; dim], vec![0.0f64; dim]);
    let (mut m_b, mut v_b) = (0.0f64, 0.0f64);
    let mut grad_w = vec![0.0f64; dim];
    let mut xs = vec![0.0f64; dim];
    let mut order = train.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut step = 0i32;
    let first_avg_epoch = config.epochs - (config.epochs as f64 * config.average_tail).round() as usize;
    let (mut w_avg, mut b_avg, mut n_avg) = (vec![0.0f64; dim], 0.0f64, 0usize);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            for &r in chunk {
                let row = batch.row(r);
                let mut pred = b;
                for k in 0..dim {
                    xs[k] = (f64::from(row[k]) - x_mean[k]) / x_scale[k];
                    pred += w[k] * xs[k];
                }
                let err = pred - (targets[r] - y_shift) / y_scale;
                for k in 0..dim {
                    grad_w[k] += err * xs[k];
                }
                grad_b += err;
            }
            let scale = 2.0 / chunk.len() as f64;
            step += 1;
            let bc1 = 1.0 - config.beta1.powi(step);
            let bc2 = 1.0 - config.beta2.powi(step);
            for k in 0..dim {
                let g = grad_w[k] * scale;
                m_w[k] = config.beta1 * m_w[k] + (1.0 - config.beta1) * g;
                v_w[k] = config.beta2 * v_w[k] + (1.0 - config.beta2) * g * g;
                w[k] -= config.learning_rate * (m_w[k] / bc1) / ((v_w[k] / bc2).sqrt() + config.epsilon);
            }
            let g = grad_b * scale;
            m_b = config.beta1 * m_b + (1.0 - config.beta1) * g;
            v_b = config.beta2 * v_b + (1.0 - config.beta2) * g * g;
            b -= config.learning_rate * (m_b / bc1) / ((v_b / bc2).sqrt() + config.epsilon);
            if epoch >= first_avg_epoch {
                n_avg += 1;
                let inv = 1.0 / n_avg as f64;
                for k in 0..dim {
                    w_avg[k] += (w[k] - w_avg[k]) * inv;
                }
                b_avg += (b - b_avg) * inv;
            }
        }
    }
    if n_avg > 0 {
        w = w_avg;
        b = b_avg;
    }

    // fold the standardization into a map on raw inputs
    let weights: Vec<f64> = (0..dim).map(|k| y_scale * w[k] / x_scale[k]).collect();
    let bias = y_shift + y_scale * b - (0..dim).map(|k| weights[k] * x_mean[k]).sum::<f64>();
    let model = ProbeModel { weights, bias };

    let train_mse = train
        .iter()
        .map(|&r| {
            let e = model.predict(batch.row(r)) - targets[r];
            e * e
        })
        .sum::<f64>()
        / n as f64;
    let least_squares_mse = (dim <= CONVEXITY_CHECK_MAX_DIM)
        .then(|| least_squares_train_mse(batch, targets, train))
        .transpose()?;
    let convexity_flag = least_squares_mse
        .map(|ls| train_mse > ls * 1.01 + 1e-12 * y_sd * y_sd)
        .unwrap_or(false);
    Ok(TrainedProbe {
        model,
        split,
        train_mse,
        least_squares_mse,
        convexity_flag,
        degenerate: false,
    })
}

/// Minimum achievable affine MSE on `rows`, via SVD least squares.
pub fn least_squares_train_mse(batch: &HiddenStateBatch, targets: &[f64], rows: &[usize]) -> Result<f64> {
    let dim = batch.dim;
    let design = DMatrix::from_fn(rows.len(), dim + 1, |r, c| {
        if c == dim {
            1.0
        } else {
            f64::from(batch.row(rows[r])[c])
        }
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&r| targets[r]));
    let svd = design.clone().svd(true, true);
    let coef = svd
        .solve(&y, 1e-12)
        .map_err(|e| Error::Data(format!("least squares failed: {e}")))?;
    let resid = design * coef - y;
    Ok(resid.norm_squared() / rows.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeScore {
    pub r2: f64,
    /// Adjusted R^2; equals `r2` when `small_sample` is set.
    pub adjusted_r2: f64,
    pub n: usize,
    pub p: usize,
    pub small_sample: bool,
    pub degenerate: bool,
}

pub fn adjusted_r2(r2: f64, n: usize, p: usize) -> Option<f64> {
    (n > p + 1).then(|| 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64 - 1.0))
}

/// Held-out R^2 and adjusted R^2 with `p = dim` predictors.
pub fn evaluate_probe(model: &ProbeModel, batch: &HiddenStateBatch, targets: &[f64]) -> Result<ProbeScore> {
    if model.weights.len() != batch.dim {
        return Err(Error::structure(format!(
            "probe has {} weights, batch has dim {}",
            model.weights.len(),
            batch.dim
        )));
    }
    if targets.len() != batch.rows() {
        return Err(Error::structure(format!(
            "{} targets for {} rows",
            targets.len(),
            batch.rows()
        )));
    }
    let n = batch.rows();
    let p = batch.dim;
    if n == 0 {
        return Err(Error::insufficient("empty evaluation batch"));
    }
    let mean = targets.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = targets.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot < DEGENERATE_SS {
        return Ok(ProbeScore {
            r2: 0.0,
            adjusted_r2: 0.0,
            n,
            p,
            small_sample: n <= p + 1,
            degenerate: true,
        });
    }
    let ss_res: f64 = (0..n)
        .map(|r| {
            let e = targets[r] - model.predict(batch.row(r));
            e * e
        })
        .sum();
    let r2 = 1.0 - ss_res / ss_tot;
    let (adjusted_r2, small_sample) = match adjusted_r2(r2, n, p) {
        Some(a) => (a, false),
        None => (r2, true),
    };
    Ok(ProbeScore {
        r2,
        adjusted_r2,
        n,
        p,
        small_sample,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSamplingPlan {
    pub total_layers: usize,
    pub layers: Vec<u32>,
}

/// Evenly spaced layer ids including the first and last layer.
pub fn sample_layers(n_layers: usize, target: usize) -> LayerSamplingPlan {
    let n_layers = n_layers.max(1);
    let target = target.max(1);
    let layers = if n_layers <= target {
        (0..n_layers as u32).collect()
    } else if target == 1 {
        vec![0]
    } else {
        let last = (n_layers - 1) as f64;
        let mut ids: Vec<u32> = (0..target)
            .map(|k| (last * k as f64 / (target - 1) as f64).round() as u32)
            .collect();
        ids.dedup();
        ids
    };
    LayerSamplingPlan {
        total_layers: n_layers,
        layers,
    }
}

pub fn make_targets(pairs: &PairSet, metric: TheoreticalMetric) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(Error::insufficient("no pairs"));
    }
    pairs.iter().map(|(i, j)| metric.eval(i, j)).collect()
}

fn targets_for_rows(pairs: &PairSet, indices: &[usize], metric: TheoreticalMetric) -> Result<Vec<f64>> {
    indices
        .iter()
        .map(|&k| {
            let (i, j) = pairs
                .get(k)
                .ok_or_else(|| Error::structure(format!("pair index {k} outside the pair set")))?;
            metric.eval(i, j)
        })
        .collect()
}

/// Supplies one layer's hidden states at a time.
pub trait LayerSource {
    fn layer_ids(&self) -> Vec<u32>;
    fn load_layer(&mut self, layer: u32) -> Result<HiddenStateBatch>;
}

impl LayerSource for Vec<HiddenStateBatch> {
    fn layer_ids(&self) -> Vec<u32> {
        self.iter().map(|b| b.layer).collect()
    }

    fn load_layer(&mut self, layer: u32) -> Result<HiddenStateBatch> {
        self.iter()
            .find(|b| b.layer == layer)
            .cloned()
            .ok_or_else(|| Error::structure(format!("layer {layer} not present")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub layer: u32,
    pub metric: TheoreticalMetric,
    pub score: ProbeScore,
    pub train_n: usize,
    pub test_n: usize,
    pub convexity_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGap {
    pub layer: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub split_seed: u64,
    pub rows: Vec<ProbeRow>,
    pub gaps: Vec<ProbeGap>,
}

impl ProbeReport {
    /// `(layer, adjusted R^2)` series for one metric.
    pub fn series(&self, key: &str) -> Vec<(u32, f64)> {
        self.rows
            .iter()
            .filter(|r| r.metric.key() == key)
            .map(|r| (r.layer, r.score.adjusted_r2))
            .collect()
    }
}

/// Probes every requested layer for every metric. Layers load one at a time;
/// all metrics of a layer share one split. A layer that fails to load is
/// recorded as a gap and the sweep continues.
pub fn probe_sweep<S: LayerSource>(
    source: &mut S,
    layers: &[u32],
    pairs: &PairSet,
    metrics: &[TheoreticalMetric],
    config: &ProbeTrainConfig,
) -> Result<ProbeReport> {
    config.validate()?;
    if metrics.is_empty() {
        return Err(Error::Config("no metrics to probe".into()));
    }
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    for &layer in layers {
        let batch = match source.load_layer(layer) {
            Ok(b) => b,
            Err(e) => {
                gaps.push(ProbeGap {
                    layer,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let split = ProbeSplit::new(batch.rows(), config.train_fraction, config.seed)?;
        let test_batch = batch.select_rows(&split.test);
        for &metric in metrics {
            let targets = targets_for_rows(pairs, &batch.pair_indices, metric)?;
            let trained = train_on_split(&batch, &targets, config, split.clone())?;
            let test_targets: Vec<f64> = split.test.iter().map(|&r| targets[r]).collect();
            let score = evaluate_probe(&trained.model, &test_batch, &test_targets)?;
            rows.push(ProbeRow {
                layer,
                metric,
                score,
                train_n: split.train.len(),
                test_n: split.test.len(),
                convexity_flag: trained.convexity_flag,
            });
        }
    }
    Ok(ProbeReport {
        split_seed: config.seed,
        rows,
        gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::d_ref;
    use crate::years::{PairMode, YearRange};

    #[test]
    fn layer_sampling() {
        let plan = sample_layers(80, 25);
        assert_eq!(plan.layers.len(), 25);
        assert_eq!(plan.layers.first(), Some(&0));
        assert_eq!(plan.layers.last(), Some(&79));
        for w in plan.layers.windows(2) {
            assert!((3..=4).contains(&(w[1] - w[0])), "gap {:?}", w);
        }
        assert_eq!(sample_layers(24, 25).layers, (0..24).collect::<Vec<u32>>());
        assert_eq!(sample_layers(1, 25).layers, vec![0]);
    }

    #[test]
    fn targets_in_pair_order() {
        let pairs = PairSet::enumerate(YearRange::new(2000, 2002).unwrap(), PairMode::Upper);
        let t = make_targets(&pairs, TheoreticalMetric::LogLinear).unwrap();
        let l = |a: f64, b: f64| (a / b).ln();
        let expect = [0.0, l(2001.0, 2000.0), l(2002.0, 2000.0), 0.0, l(2002.0, 2001.0), 0.0];
        for (a, b) in t.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let lev = make_targets(&pairs, TheoreticalMetric::Levenshtein).unwrap();
        assert!(lev.iter().all(|v| v.fract() == 0.0));
        let r = make_targets(&pairs, TheoreticalMetric::reference_default()).unwrap();
        for ((i, j), v) in pairs.iter().zip(r) {
            assert_eq!(v, d_ref(i, j, 2025));
        }
    }

    #[test]
    fn split_is_disjoint_and_complete() {
        let s = ProbeSplit::new(101, 0.8, 3).unwrap();
        assert_eq!(s.train.len() + s.test.len(), 101);
        assert!(s.train.iter().all(|r| s.test.binary_search(r).is_err()));
        assert_eq!(s, ProbeSplit::new(101, 0.8, 3).unwrap());
    }

    #[test]
    fn adjusted_r2_formula() {
        let a = adjusted_r2(0.5, 10_001, 8192).unwrap();
        assert!((a - (1.0 - 0.5 * 10_000.0 / 1_808.0)).abs() < 1e-12);
        assert!(a < -1.76 && a > -1.77);
        assert_eq!(adjusted_r2(0.5, 10, 9), None);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let batch = HiddenStateBatch::new(0, vec![0, 1, 2, 3, 4], 1, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let model = ProbeModel {
            weights: vec![2.0],
            bias: 1.0,
        };
        let t = [3.0, 5.0, 7.0, 9.0, 11.0];
        let s = evaluate_probe(&model, &batch, &t).unwrap();
        assert_eq!(s.r2, 1.0);
        assert_eq!(s.adjusted_r2, 1.0);
        let flat = evaluate_probe(&model, &batch, &[2.0; 5]).unwrap();
        assert!(flat.degenerate);
        assert_eq!(flat.adjusted_r2, 0.0);
        let bad = ProbeModel {
            weights: vec![1.0, 1.0],
            bias: 0.0,
        };
        assert!(matches!(evaluate_probe(&bad, &batch, &t), Err(Error::Structure(_))));
    }

    #[test]
    fn zero_targets_give_constant_map() {
        let batch = HiddenStateBatch::new(0, (0..50).collect(), 2, (0..100).map(|v| v as f32).collect()).unwrap();
        let tp = train_probe(&batch, &[0.0; 50], &ProbeTrainConfig::default()).unwrap();
        assert!(tp.degenerate);
        assert!(tp.model.weights.iter().all(|&w| w == 0.0));
        assert_eq!(tp.model.bias, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let batch = HiddenStateBatch::new(0, vec![0, 1, 2], 1, vec![1.0, f32::NAN, 2.0]).unwrap();
        assert!(matches!(
            train_probe(&batch, &[1.0, 2.0, 3.0], &ProbeTrainConfig::default()),
            Err(Error::Data(_))
        ));
        let ok = HiddenStateBatch::new(0, vec![0, 1, 2], 1, vec![1.0, 0.0, 2.0]).unwrap();
        assert!(matches!(
            train_probe(&ok, &[1.0, 2.0], &ProbeTrainConfig::default()),
            Err(Error::Structure(_))
        ));
        assert!(HiddenStateBatch::new(0, vec![0], 0, vec![]).is_err());
        let cfg = ProbeTrainConfig {
            train_fraction: 1.0,
            ..Default::default()
        };
        assert!(matches!(train_probe(&ok, &[1.0, 2.0, 3.0], &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_records_missing_layers_as_gaps() {
        let pairs = PairSet::enumerate(YearRange::new(2000, 2009).unwrap(), PairMode::Upper);
        let n = pairs.len();
        let batch = HiddenStateBatch::new(
            1,
            (0..n).collect(),
            2,
            pairs.iter().flat_map(|(i, j)| [i as f32 / 1000.0, j as f32 / 1000.0]).collect(),
        )
        .unwrap();
        let mut source = vec![batch];
        let cfg = ProbeTrainConfig {
            epochs: 5,
            ..Default::default()
        };
        let rep = probe_sweep(&mut source, &[0, 1], &pairs, &TheoreticalMetric::all(2025), &cfg).unwrap();
        assert_eq!(rep.gaps.len(), 1);
        assert_eq!(rep.gaps[0].layer, 0);
        assert_eq!(rep.rows.len(), 3);
        assert!(rep.rows.iter().all(|r| r.layer == 1 && r.train_n + r.test_n == n));
    }
}
