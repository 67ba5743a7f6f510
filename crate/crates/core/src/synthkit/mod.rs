//! Seeded generators with known ground truth, plus naive oracles in
//! [`oracles`]. Every generator returns its parameters alongside the data.

pub mod oracles;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DistanceMatrix, MatrixMeta, SimilarityMatrix, YearGrid};
use crate::metrics::{d_ref, log_offset, TheoreticalMetric};
use crate::neurons::{ActivationTensor, LayerPair};
use crate::probes::HiddenStateBatch;
use crate::years::{Condition, PairSet, YearRange};

pub const SYNTH_MODEL: &str = "synthkit";

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn noise(sigma: f64) -> Result<Option<Normal<f64>>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")));
    }
    Ok((sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("valid sigma")))
}

// ---- similarity matrices ------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSimilaritySpec {
    pub range: YearRange,
    pub reference: i32,
    pub lambda: f64,
    pub sigma: f64,
    pub seed: u64,
}

/// `s(i,j) = clamp(exp(-lambda * d_ref(i,j,R)) + N(0, sigma), 0, 1)`,
/// independent noise per ordered cell.
pub fn gen_reference_similarity(spec: &ReferenceSimilaritySpec) -> Result<SimilarityMatrix> {
    if !(spec.lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be > 0, got {}", spec.lambda)));
    }
    let normal = noise(spec.sigma)?;
    let mut rng = rng(spec.seed);
    let grid = YearGrid::from_fn(spec.range, |i, j| {
        let e = normal.map(|n| n.sample(&mut rng)).unwrap_or(0.0);
        Some(((-spec.lambda * d_ref(i, j, spec.reference)).exp() + e).clamp(0.0, 1.0))
    });
    SimilarityMatrix::new(grid, MatrixMeta::new(SYNTH_MODEL, Condition::Year))
}

/// Distance matrix linear in one metric: `D = m / max(m) + N(0, sigma)`,
/// clamped to [0, 1]. Used to check that model selection recovers the
/// generating metric.
pub fn gen_metric_distance(
    range: YearRange,
    metric: TheoreticalMetric,
    sigma: f64,
    seed: u64,
) -> Result<DistanceMatrix> {
    let normal = noise(sigma)?;
    let years: Vec<i32> = range.years().collect();
    let mut raw = Vec::with_capacity(years.len() * years.len());
    for &i in &years {
        for &j in &years {
            raw.push(metric.eval(i, j)?);
        }
    }
    let max = raw.iter().copied().fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let mut rng = rng(seed);
    let cells = raw
        .into_iter()
        .map(|m| {
            let e = normal.map(|n| n.sample(&mut rng)).unwrap_or(0.0);
            Some((m * scale + e).clamp(0.0, 1.0))
        })
        .collect();
    DistanceMatrix::new(
        YearGrid::from_cells(range, cells)?,
        MatrixMeta::new(SYNTH_MODEL, Condition::Year),
    )
}

// ---- planted neurons ----------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedNeuronSpec {
    pub n_neurons: usize,
    pub n_planted: usize,
    pub d_effect: f64,
    /// Fraction of stimuli on which a planted neuron's temporal activation
    /// exceeds its numerical one.
    pub consistency: f64,
    pub n_layers: usize,
    pub range: YearRange,
    pub seed: u64,
}

impl PlantedNeuronSpec {
    pub fn new(n_neurons: usize, n_planted: usize, d_effect: f64, consistency: f64, seed: u64) -> Self {
        Self {
            n_neurons,
            n_planted,
            d_effect,
            consistency,
            n_layers: 10,
            range: YearRange::default(),
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedNeurons {
    pub spec: PlantedNeuronSpec,
    pub layers: Vec<LayerPair>,
    /// `(layer, neuron)` of every planted neuron, sorted.
    pub planted: Vec<(u32, usize)>,
}

/// Solves for the shift scale `k` so that `t = x + k e` has Cohen's d
/// equal to `target` against `x`. Falls back to the largest achievable
/// effect when the target exceeds it.
fn effect_scale(x: &[f64], e: &[f64], target: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let me = e.iter().sum::<f64>() / n;
    let var = |v: &[f64], m: f64| v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n - 1.0);
    let (vx, ve) = (var(x, mx), var(e, me));
    let cov = x.iter().zip(e).map(|(a, b)| (a - mx) * (b - me)).sum::<f64>() / (n - 1.0);
    let d2 = target * target;
    // k^2 (me^2 - d2 ve / 2) - d2 cov k - d2 vx = 0
    let a = me * me - d2 * ve / 2.0;
    let b = -d2 * cov;
    let c = -d2 * vx;
    if a <= 0.0 {
        return 1e3 * vx.sqrt() / me.abs().max(1e-12);
    }
    (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)
}

/// Null neurons have independent N(0,1) activations in both conditions.
/// A planted neuron gets `temporal = numerical + k e`, where `e` is
/// positive on `round(consistency * n)` stimuli and slightly negative on
/// the rest, and `k` makes the realized Cohen's d equal `d_effect`.
pub fn gen_planted_neurons(spec: &PlantedNeuronSpec) -> Result<PlantedNeurons> {
    if spec.n_planted > spec.n_neurons {
        return Err(Error::Config(format!(
            "{} planted neurons exceed {} total",
            spec.n_planted, spec.n_neurons
        )));
    }
    if spec.n_layers == 0 || spec.n_neurons < spec.n_layers {
        return Err(Error::Config("need at least one neuron per layer".into()));
    }
    if !(0.0..=1.0).contains(&spec.consistency) {
        return Err(Error::Config(format!("consistency {} outside [0, 1]", spec.consistency)));
    }
    let years: Vec<i32> = spec.range.years().collect();
    let n = years.len();
    if n < 2 {
        return Err(Error::insufficient("need at least two stimuli"));
    }
    let mut rng = rng(spec.seed);
    let mut global: Vec<usize> = (0..spec.n_neurons).collect();
    global.shuffle(&mut rng);
    let mut is_planted = vec![false; spec.n_neurons];
    for &g in &global[..spec.n_planted] {
        is_planted[g] = true;
    }

    let base = spec.n_neurons / spec.n_layers;
    let extra = spec.n_neurons % spec.n_layers;
    let n_positive = (spec.consistency * n as f64).round() as usize;
    let mut layers = Vec::with_capacity(spec.n_layers);
    let mut planted = Vec::new();
    let mut offset = 0;
    for layer in 0..spec.n_layers {
        let width = base + usize::from(layer < extra);
        let mut temporal = vec![0f32; n * width];
        let mut numerical = vec![0f32; n * width];
        for local in 0..width {
            let x: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();
            let t: Vec<f64> = if is_planted[offset + local] {
                planted.push((layer as u32, local));
                let mut positive: Vec<bool> = (0..n).map(|s| s < n_positive).collect();
                positive.shuffle(&mut rng);
                let e: Vec<f64> = positive
                    .iter()
                    .map(|&p| {
                        let jitter = gauss(&mut rng).abs();
                        if p {
                            1.0 + 0.1 * jitter
                        } else {
                            -0.01 * (1.0 + jitter)
                        }
                    })
                    .collect();
                let k = effect_scale(&x, &e, spec.d_effect);
                x.iter().zip(&e).map(|(a, b)| a + k * b).collect()
            } else {
                (0..n).map(|_| gauss(&mut rng)).collect()
            };
            for s in 0..n {
                temporal[s * width + local] = t[s] as f32;
                numerical[s * width + local] = x[s] as f32;
            }
        }
        offset += width;
        layers.push(LayerPair::new(
            ActivationTensor::new(layer as u32, Condition::Year, years.clone(), width, temporal)?,
            ActivationTensor::new(layer as u32, Condition::Number, years.clone(), width, numerical)?,
        )?);
    }
    planted.sort_unstable();
    Ok(PlantedNeurons {
        spec: spec.clone(),
        layers,
        planted,
    })
}

// ---- logarithmic coding -------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogCodingSpec {
    pub range: YearRange,
    pub reference: i32,
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    /// Share of the law kept on the future side; 0 replaces it with the
    /// same values in shuffled year order.
    pub future_fidelity: f64,
    pub n_layers: usize,
    pub coded_per_layer: usize,
    pub null_per_layer: usize,
    /// Numerical-condition activations sit this far below the temporal ones.
    pub condition_gap: f64,
    pub seed: u64,
}

impl LogCodingSpec {
    pub fn new(alpha: f64, beta: f64, sigma: f64, seed: u64) -> Self {
        Self {
            range: YearRange::default(),
            reference: crate::metrics::DEFAULT_REFERENCE,
            alpha,
            beta,
            sigma,
            future_fidelity: 1.0,
            n_layers: 4,
            coded_per_layer: 20,
            null_per_layer: 20,
            condition_gap: 3.0,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogCoding {
    pub spec: LogCodingSpec,
    pub layers: Vec<LayerPair>,
    /// Coded neurons occupy indices `0..coded_per_layer` in each layer.
    pub coded: Vec<(u32, usize)>,
}

/// Coded neurons follow `a(x) = alpha * ln max(|R - x|, 1) + beta + N(0, sigma)`
/// in the temporal condition; the numerical condition repeats the same
/// values shifted down by `condition_gap` with fresh noise. Null neurons are
/// N(0,1) in both conditions.
pub fn gen_log_coding(spec: &LogCodingSpec) -> Result<LogCoding> {
    let normal = noise(spec.sigma)?;
    if !(0.0..=1.0).contains(&spec.future_fidelity) {
        return Err(Error::Config(format!("future fidelity {} outside [0, 1]", spec.future_fidelity)));
    }
    let years: Vec<i32> = spec.range.years().collect();
    let n = years.len();
    let law: Vec<f64> = years
        .iter()
        .map(|&x| spec.alpha * log_offset(x, spec.reference) + spec.beta)
        .collect();
    let mut rng = rng(spec.seed);
    let future: Vec<usize> = (0..n).filter(|&s| years[s] > spec.reference).collect();
    let mut shuffled = future.clone();
    shuffled.shuffle(&mut rng);
    let mut shape = law.clone();
    for (&s, &src) in future.iter().zip(&shuffled) {
        shape[s] = spec.future_fidelity * law[s] + (1.0 - spec.future_fidelity) * law[src];
    }

    let width = spec.coded_per_layer + spec.null_per_layer;
    if width == 0 {
        return Err(Error::Config("layers need at least one neuron".into()));
    }
    let draw = |rng: &mut ChaCha8Rng| normal.map(|d| d.sample(rng)).unwrap_or(0.0);
    let mut layers = Vec::with_capacity(spec.n_layers);
    let mut coded = Vec::new();
    for layer in 0..spec.n_layers {
        let mut temporal = vec![0f32; n * width];
        let mut numerical = vec![0f32; n * width];
        for local in 0..width {
            let is_coded = local < spec.coded_per_layer;
            if is_coded {
                coded.push((layer as u32, local));
            }
            for s in 0..n {
                let (t, x) = if is_coded {
                    let t = shape[s] + draw(&mut rng);
                    (t, shape[s] - spec.condition_gap + draw(&mut rng))
                } else {
                    (gauss(&mut rng), gauss(&mut rng))
                };
                temporal[s * width + local] = t as f32;
                numerical[s * width + local] = x as f32;
            }
        }
        layers.push(LayerPair::new(
            ActivationTensor::new(layer as u32, Condition::Year, years.clone(), width, temporal)?,
            ActivationTensor::new(layer as u32, Condition::Number, years.clone(), width, numerical)?,
        )?);
    }
    Ok(LogCoding {
        spec: spec.clone(),
        layers,
        coded,
    })
}

// ---- probe codes --------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LinearCode {
    pub batch: HiddenStateBatch,
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Hidden states `h ~ N(0, I)` and targets `t = w . h + b + N(0, noise)`
/// with `w ~ N(0, I)`, `b ~ N(0, 1)`.
pub fn gen_linear_code(n: usize, dim: usize, noise_sd: f64, seed: u64) -> Result<LinearCode> {
    let normal = noise(noise_sd)?;
    let mut rng = rng(seed);
    let weights: Vec<f64> = (0..dim).map(|_| gauss(&mut rng)).collect();
    let bias = gauss(&mut rng);
    let mut values = Vec::with_capacity(n * dim);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let h: Vec<f32> = (0..dim).map(|_| gauss(&mut rng) as f32).collect();
        let t = h.iter().zip(&weights).map(|(&a, b)| f64::from(a) * b).sum::<f64>() + bias;
        targets.push(t + normal.map(|d| d.sample(&mut rng)).unwrap_or(0.0));
        values.extend(h);
    }
    Ok(LinearCode {
        batch: HiddenStateBatch::new(0, (0..n).collect(), dim, values)?,
        targets,
        weights,
        bias,
    })
}

#[derive(Debug, Clone)]
pub struct HierarchicalCode {
    pub layers: Vec<HiddenStateBatch>,
    /// Weight on the reference-anchored code per layer; `1 - w` goes to the
    /// plain log code.
    pub ref_weight: Vec<f64>,
}

fn zscore(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
    v.iter().map(|x| if sd > 0.0 { (x - m) / sd } else { 0.0 }).collect()
}

/// Layer `l` of `n_layers` linearly embeds the scalar
/// `(1 - w_l) z_log + w_l z_ref` along a random direction, with
/// `w_l = l / (n_layers - 1)` and isotropic noise: shallow layers carry
/// `d_log`, deep layers `d_ref`.
pub fn gen_hierarchical_code(
    pairs: &PairSet,
    pair_indices: &[usize],
    reference: i32,
    n_layers: usize,
    dim: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<HierarchicalCode> {
    let normal = noise(noise_sd)?;
    let mut d_log_v = Vec::with_capacity(pair_indices.len());
    let mut d_ref_v = Vec::with_capacity(pair_indices.len());
    for &idx in pair_indices {
        let (a, b) = pairs
            .get(idx)
            .ok_or_else(|| Error::structure(format!("pair index {idx} out of range")))?;
        d_log_v.push(TheoreticalMetric::LogLinear.eval(a, b)?);
        d_ref_v.push(d_ref(a, b, reference));
    }
    let (z_log, z_ref) = (zscore(&d_log_v), zscore(&d_ref_v));
    let mut rng = rng(seed);
    let mut layers = Vec::with_capacity(n_layers);
    let mut ref_weight = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let w = if n_layers > 1 { l as f64 / (n_layers - 1) as f64 } else { 1.0 };
        let direction: Vec<f64> = (0..dim).map(|_| gauss(&mut rng)).collect();
        let mut values = Vec::with_capacity(pair_indices.len() * dim);
        for r in 0..pair_indices.len() {
            let s = (1.0 - w) * z_log[r] + w * z_ref[r];
            for d in &direction {
                values.push((s * d + normal.map(|nd| nd.sample(&mut rng)).unwrap_or(0.0)) as f32);
            }
        }
        layers.push(HiddenStateBatch::new(l as u32, pair_indices.to_vec(), dim, values)?);
        ref_weight.push(w);
    }
    Ok(HierarchicalCode { layers, ref_weight })
}

// ---- embeddings ---------------------------------------------------------

/// Deterministic 2-d embedding `(cos theta, sin theta)` with
/// `theta = scale * ln max(|R - y|, 1)`.
pub fn mock_embedding(year: i32, reference: i32, scale: f64) -> Vec<f64> {
    let theta = scale * log_offset(year, reference);
    vec![theta.cos(), theta.sin()]
}

/// Uniform random points in the unit square; handy for MDS instances.
pub fn random_points(n: usize, dims: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng(seed);
    (0..n).map(|_| (0..dims).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Pairwise Euclidean distances of `points`.
pub fn distance_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|a| {
            points
                .iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
                .collect()
        })
        .collect()
}

/// Symmetric dissimilarities uniform in (0, 1) with a zero diagonal.
pub fn random_dissimilarity(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng(seed);
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random::<f64>().max(1e-6);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}
