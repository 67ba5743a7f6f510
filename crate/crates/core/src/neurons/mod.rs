//! Temporal-preferential FFN neuron screening and per-layer logarithmic
//! coding fits.

mod stats;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use stats::{bh_fdr, cohens_d, consistency, paired_t, t_two_sided_p, TTest};

use crate::analysis::{ols_fit, RegressionFit};
use crate::error::{Error, Result};
use crate::metrics::log_offset;
use crate::years::Condition;

/// Last-token FFN activations for one layer and one condition,
/// row-major `[stimulus x neuron]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTensor {
    pub layer: u32,
    pub condition: Condition,
    pub years: Vec<i32>,
    pub n_neurons: usize,
    pub values: Vec<f32>,
}

impl ActivationTensor {
    pub fn new(
        layer: u32,
        condition: Condition,
        years: Vec<i32>,
        n_neurons: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        if values.len() != years.len() * n_neurons {
            return Err(Error::structure(format!(
                "layer {layer}: {} values for {} stimuli x {n_neurons} neurons",
                values.len(),
                years.len()
            )));
        }
        Ok(Self {
            layer,
            condition,
            years,
            n_neurons,
            values,
        })
    }

    pub fn n_stimuli(&self) -> usize {
        self.years.len()
    }

    pub fn get(&self, stimulus: usize, neuron: usize) -> f32 {
        self.values[stimulus * self.n_neurons + neuron]
    }

    /// One neuron's activations across stimuli, widened to f64.
    pub fn neuron(&self, neuron: usize) -> Vec<f64> {
        (0..self.n_stimuli())
            .map(|s| f64::from(self.get(s, neuron)))
            .collect()
    }
}

/// Matched temporal / numerical tensors for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPair {
    pub temporal: ActivationTensor,
    pub numerical: ActivationTensor,
}

impl LayerPair {
    pub fn new(temporal: ActivationTensor, numerical: ActivationTensor) -> Result<Self> {
        if temporal.layer != numerical.layer {
            return Err(Error::structure(format!(
                "pairing layer {} with layer {}",
                temporal.layer, numerical.layer
            )));
        }
        if temporal.years != numerical.years {
            return Err(Error::structure(format!(
                "layer {}: conditions use different stimulus lists",
                temporal.layer
            )));
        }
        if temporal.n_neurons != numerical.n_neurons {
            return Err(Error::structure(format!(
                "layer {}: {} temporal vs {} numerical neurons",
                temporal.layer, temporal.n_neurons, numerical.n_neurons
            )));
        }
        Ok(Self {
            temporal,
            numerical,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronStats {
    pub layer: u32,
    pub neuron: usize,
    pub cohen_d: f64,
    pub t_stat: f64,
    pub p_raw: f64,
    pub p_fdr: f64,
    pub consistency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionCriteria {
    pub min_effect: f64,
    pub max_p_fdr: f64,
    pub min_consistency: f64,
    pub top_k: usize,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        Self {
            min_effect: 2.0,
            max_p_fdr: 1e-4,
            min_consistency: 0.95,
            top_k: 1000,
        }
    }
}

impl SelectionCriteria {
    /// All three gates, each a strict inequality.
    pub fn admits(&self, s: &NeuronStats) -> bool {
        s.cohen_d > self.min_effect
            && s.p_fdr < self.max_p_fdr
            && s.consistency > self.min_consistency
    }

    /// Parses `d=2.0,p=1e-4,c=0.95` (any subset, defaults for the rest).
    pub fn parse(spec: &str) -> Result<Self> {
        let mut out = Self::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("criteria entry {part:?} is not key=value")))?;
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("criteria value {v:?}: {e}")))?;
            match k.trim() {
                "d" => out.min_effect = value,
                "p" => out.max_p_fdr = value,
                "c" => out.min_consistency = value,
                "k" => out.top_k = value as usize,
                other => return Err(Error::Config(format!("unknown criterion {other:?}"))),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronSelection {
    pub criteria: SelectionCriteria,
    /// Sorted by effect size descending, then (layer, neuron) ascending.
    pub selected: Vec<NeuronStats>,
    pub per_layer: BTreeMap<u32, usize>,
    pub total_neurons: usize,
    pub proportion: f64,
}

impl NeuronSelection {
    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }
}

fn check_layers(layers: &[LayerPair]) -> Result<()> {
    let Some(first) = layers.first() else {
        return Err(Error::insufficient("no layers supplied"));
    };
    for l in layers {
        if l.temporal.years != first.temporal.years {
            return Err(Error::structure(format!(
                "layer {} uses a different stimulus list",
                l.temporal.layer
            )));
        }
    }
    Ok(())
}

/// Per-neuron effect size, paired t, and consistency, with BH-FDR applied
/// jointly over every neuron of every layer.
pub fn neuron_stats(layers: &[LayerPair]) -> Result<Vec<NeuronStats>> {
    check_layers(layers)?;
    let mut all = Vec::new();
    for pair in layers {
        let (t, n) = (&pair.temporal, &pair.numerical);
        let rows = t.n_stimuli();
        let layer_stats = (0..t.n_neurons)
            .into_par_iter()
            .map(|k| {
                let mut tv = Vec::with_capacity(rows);
                let mut nv = Vec::with_capacity(rows);
                let mut dv = Vec::with_capacity(rows);
                for s in 0..rows {
                    let (a, b) = (f64::from(t.get(s, k)), f64::from(n.get(s, k)));
                    tv.push(a);
                    nv.push(b);
                    dv.push(a - b);
                }
                let d = cohens_d(&tv, &nv)?;
                let test = paired_t(&dv)?;
                Ok(NeuronStats {
                    layer: t.layer,
                    neuron: k,
                    cohen_d: d,
                    t_stat: test.t,
                    p_raw: test.p,
                    p_fdr: f64::NAN,
                    consistency: consistency(&dv),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        all.extend(layer_stats);
    }
    let raw: Vec<f64> = all.iter().map(|s| s.p_raw).collect();
    for (s, q) in all.iter_mut().zip(bh_fdr(&raw)?) {
        s.p_fdr = q;
    }
    Ok(all)
}

pub fn select_neurons(
    stats: &[NeuronStats],
    criteria: SelectionCriteria,
    total_neurons: usize,
) -> NeuronSelection {
    let mut selected: Vec<NeuronStats> = stats.iter().copied().filter(|s| criteria.admits(s)).collect();
    selected.sort_by(|a, b| {
        b.cohen_d
            .total_cmp(&a.cohen_d)
            .then(a.layer.cmp(&b.layer))
            .then(a.neuron.cmp(&b.neuron))
    });
    let mut per_layer = BTreeMap::new();
    for s in &selected {
        *per_layer.entry(s.layer).or_insert(0) += 1;
    }
    let proportion = if total_neurons == 0 {
        0.0
    } else {
        selected.len() as f64 / total_neurons as f64
    };
    NeuronSelection {
        criteria,
        selected,
        per_layer,
        total_neurons,
        proportion,
    }
}

pub fn identify_neurons(layers: &[LayerPair], criteria: SelectionCriteria) -> Result<NeuronSelection> {
    let stats = neuron_stats(layers)?;
    let total = layers.iter().map(|l| l.temporal.n_neurons).sum();
    Ok(select_neurons(&stats, criteria, total))
}

fn find_layer(temporal: &[ActivationTensor], layer: u32) -> Result<&ActivationTensor> {
    temporal
        .iter()
        .find(|t| t.layer == layer)
        .ok_or_else(|| Error::structure(format!("no temporal tensor for layer {layer}")))
}

/// Mean temporal activation of the top `k` selected neurons, per stimulus.
pub fn mean_activation_curve(
    selection: &NeuronSelection,
    temporal: &[ActivationTensor],
    k: usize,
) -> Result<Vec<(i32, f64)>> {
    if selection.is_empty() || k == 0 {
        return Err(Error::insufficient("empty neuron selection"));
    }
    let top = &selection.selected[..k.min(selection.len())];
    let years = &find_layer(temporal, top[0].layer)?.years;
    let mut sums = vec![0.0f64; years.len()];
    for s in top {
        let t = find_layer(temporal, s.layer)?;
        if &t.years != years {
            return Err(Error::structure("temporal tensors disagree on stimuli"));
        }
        for (row, acc) in sums.iter_mut().enumerate() {
            *acc += f64::from(t.get(row, s.neuron));
        }
    }
    let denom = top.len() as f64;
    Ok(years.iter().copied().zip(sums.into_iter().map(|v| v / denom)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Past,
    Future,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Past => "past",
            Side::Future => "future",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerLogFit {
    pub layer: u32,
    pub side: Side,
    pub fit: RegressionFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFitReport {
    pub reference: i32,
    pub fits: Vec<LayerLogFit>,
    pub best_past: Option<LayerLogFit>,
    pub best_future: Option<LayerLogFit>,
}

/// Regresses each layer's mean selected-neuron activation on
/// `ln|R - x|`, past and future separately (`x == R` excluded).
pub fn layerwise_log_fit(
    temporal: &[ActivationTensor],
    selection: &NeuronSelection,
    reference: i32,
) -> Result<LogFitReport> {
    if selection.is_empty() {
        return Err(Error::insufficient("empty neuron selection"));
    }
    let mut by_layer: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for s in &selection.selected {
        by_layer.entry(s.layer).or_default().push(s.neuron);
    }
    let mut fits = Vec::new();
    for (&layer, neurons) in &by_layer {
        let t = find_layer(temporal, layer)?;
        let mut past = (Vec::new(), Vec::new());
        let mut future = (Vec::new(), Vec::new());
        for (row, &year) in t.years.iter().enumerate() {
            if year == reference {
                continue;
            }
            let mean = neurons.iter().map(|&k| f64::from(t.get(row, k))).sum::<f64>()
                / neurons.len() as f64;
            let side = if year < reference { &mut past } else { &mut future };
            side.0.push(log_offset(year, reference));
            side.1.push(mean);
        }
        for (side, (x, y)) in [(Side::Past, past), (Side::Future, future)] {
            if x.len() < 2 {
                continue;
            }
            fits.push(LayerLogFit {
                layer,
                side,
                fit: ols_fit(&x, &y)?,
            });
        }
    }
    let best = |side: Side| {
        fits.iter()
            .filter(|f| f.side == side)
            .fold(None::<LayerLogFit>, |acc, f| match acc {
                Some(b) if b.fit.r2 >= f.fit.r2 => Some(b),
                _ => Some(*f),
            })
    };
    Ok(LogFitReport {
        reference,
        best_past: best(Side::Past),
        best_future: best(Side::Future),
        fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(layer: u32, cond: Condition, years: &[i32], cols: usize, f: impl Fn(usize, usize) -> f32) -> ActivationTensor {
        let mut v = Vec::new();
        for r in 0..years.len() {
            for c in 0..cols {
                v.push(f(r, c));
            }
        }
        ActivationTensor::new(layer, cond, years.to_vec(), cols, v).unwrap()
    }

    #[test]
    fn identical_conditions_select_nothing() {
        let years: Vec<i32> = (1990..2030).collect();
        let f = |r: usize, c: usize| ((r * 7 + c * 13) % 11) as f32;
        let pair = LayerPair::new(
            tensor(0, Condition::Year, &years, 6, f),
            tensor(0, Condition::Number, &years, 6, f),
        )
        .unwrap();
        let sel = identify_neurons(&[pair], SelectionCriteria::default()).unwrap();
        assert!(sel.is_empty());
        assert_eq!(sel.total_neurons, 6);
        assert_eq!(sel.proportion, 0.0);
    }

    #[test]
    fn mismatched_conditions_rejected() {
        let years: Vec<i32> = (1990..2000).collect();
        let t = tensor(0, Condition::Year, &years, 3, |_, _| 0.0);
        let n = tensor(0, Condition::Number, &years[1..], 3, |_, _| 0.0);
        assert!(matches!(LayerPair::new(t.clone(), n), Err(Error::Structure(_))));
        let n4 = tensor(0, Condition::Number, &years, 4, |_, _| 0.0);
        assert!(LayerPair::new(t, n4).is_err());
        assert!(ActivationTensor::new(0, Condition::Year, years, 3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn criteria_parsing_and_gate() {
        let c = SelectionCriteria::parse("d=1.5,c=0.9").unwrap();
        assert_eq!(c.min_effect, 1.5);
        assert_eq!(c.max_p_fdr, 1e-4);
        assert_eq!(c.min_consistency, 0.9);
        assert!(SelectionCriteria::parse("z=1").is_err());
        let s = NeuronStats {
            layer: 0,
            neuron: 0,
            cohen_d: 3.0,
            t_stat: 10.0,
            p_raw: 0.0,
            p_fdr: 0.0,
            consistency: 0.95,
        };
        // consistency must be strictly above the threshold
        assert!(!SelectionCriteria::default().admits(&s));
        assert!(SelectionCriteria::default().admits(&NeuronStats { consistency: 0.96, ..s }));
        assert!(!SelectionCriteria::default().admits(&NeuronStats { cohen_d: 2.0, consistency: 1.0, ..s }));
        assert!(!SelectionCriteria::default().admits(&NeuronStats { p_fdr: 1e-4, consistency: 1.0, ..s }));
    }

    #[test]
    fn selection_sort_breaks_ties_by_position() {
        let mk = |layer, neuron, d| NeuronStats {
            layer,
            neuron,
            cohen_d: d,
            t_stat: 1.0,
            p_raw: 0.0,
            p_fdr: 0.0,
            consistency: 1.0,
        };
        let stats = vec![mk(2, 0, 3.0), mk(1, 5, 3.0), mk(1, 2, 3.0), mk(0, 9, 4.0)];
        let sel = select_neurons(&stats, SelectionCriteria::default(), 40);
        let order: Vec<(u32, usize)> = sel.selected.iter().map(|s| (s.layer, s.neuron)).collect();
        assert_eq!(order, vec![(0, 9), (1, 2), (1, 5), (2, 0)]);
        assert_eq!(sel.per_layer.get(&1), Some(&2));
        assert!((sel.proportion - 0.1).abs() < 1e-15);
    }

    #[test]
    fn curve_clamps_k_and_single_neuron_is_identity() {
        let years: Vec<i32> = (2000..2010).collect();
        let t = tensor(3, Condition::Year, &years, 2, |r, c| (r * 10 + c) as f32);
        let one = NeuronStats {
            layer: 3,
            neuron: 1,
            cohen_d: 5.0,
            t_stat: 1.0,
            p_raw: 0.0,
            p_fdr: 0.0,
            consistency: 1.0,
        };
        let sel = select_neurons(&[one], SelectionCriteria::default(), 2);
        let curve = mean_activation_curve(&sel, std::slice::from_ref(&t), 1000).unwrap();
        let expect: Vec<(i32, f64)> = years.iter().enumerate().map(|(r, &y)| (y, (r * 10 + 1) as f64)).collect();
        assert_eq!(curve, expect);
        let empty = select_neurons(&[], SelectionCriteria::default(), 2);
        assert!(mean_activation_curve(&empty, &[t], 10).is_err());
    }

    #[test]
    fn constant_activations_give_degenerate_fit() {
        let years: Vec<i32> = (2000..2050).collect();
        let t = tensor(0, Condition::Year, &years, 1, |_, _| 1.5);
        let s = NeuronStats {
            layer: 0,
            neuron: 0,
            cohen_d: 5.0,
            t_stat: 1.0,
            p_raw: 0.0,
            p_fdr: 0.0,
            consistency: 1.0,
        };
        let sel = select_neurons(&[s], SelectionCriteria::default(), 1);
        let rep = layerwise_log_fit(&[t], &sel, 2025).unwrap();
        assert_eq!(rep.fits.len(), 2);
        assert!(rep.fits.iter().all(|f| f.fit.degenerate && f.fit.r2 == 0.0));
    }

    #[test]
    fn exact_law_recovered() {
        let years: Vec<i32> = (1900..2150).collect();
        let t = tensor(0, Condition::Year, &years, 1, |r, _| {
            (0.8 * log_offset(years[r], 2025) + 0.1) as f32
        });
        let s = NeuronStats {
            layer: 0,
            neuron: 0,
            cohen_d: 5.0,
            t_stat: 1.0,
            p_raw: 0.0,
            p_fdr: 0.0,
            consistency: 1.0,
        };
        let sel = select_neurons(&[s], SelectionCriteria::default(), 1);
        let rep = layerwise_log_fit(&[t], &sel, 2025).unwrap();
        let past = rep.best_past.unwrap();
        assert!((past.fit.alpha - 0.8).abs() < 1e-5);
        assert!(past.fit.r2 > 0.999_999);
        // one side only: a reference beyond the stimuli skips the future
        let rep2 = layerwise_log_fit(&[tensor(0, Condition::Year, &years, 1, |_, _| 0.0)], &sel, 3000).unwrap();
        assert!(rep2.best_future.is_none());
    }
}
