use std::path::Path;

use serde_json::json;
use yearsense::dumpio::{open_dump, read_activations, NOTE_HOOK};
use yearsense::neurons::{
    identify_neurons, layerwise_log_fit, mean_activation_curve, neuron_stats, ActivationTensor, LayerPair,
    NeuronSelection, SelectionCriteria, Side,
};
use yearsense::{Condition, Error, Result};

use super::{num, Ctx};
use crate::cli::NeuronInputs;
use crate::manifest::RunDir;
use crate::svg::{render_series, ChartOptions, Series};

/// Hook point written into synthetic activation dumps and assumed for dumps
/// that do not record one: the MLP activation after the nonlinearity.
pub const DEFAULT_HOOK: &str = "mlp.act";

struct Loaded {
    layers: Vec<LayerPair>,
    hook: String,
}

fn read_side(path: &Path, expect: Condition) -> Result<(Vec<ActivationTensor>, Option<String>)> {
    let mut reader = open_dump(path)?;
    let hook = reader.header().notes.get(NOTE_HOOK).cloned();
    let tensors = read_activations(&mut reader)?;
    if let Some(t) = tensors.first() {
        if t.condition != expect {
            return Err(Error::Data(format!(
                "{} holds the {} condition, expected {}",
                path.display(),
                t.condition,
                expect
            )));
        }
    }
    Ok((tensors, hook))
}

fn load(ctx: &Ctx, a: &NeuronInputs, run: &mut RunDir) -> Result<Loaded> {
    run.input(&a.temporal);
    run.input(&a.numerical);
    let (temporal, hook_t) = read_side(&a.temporal, Condition::Year)?;
    let (numerical, hook_n) = read_side(&a.numerical, Condition::Number)?;
    if hook_t != hook_n {
        return Err(Error::Data(format!(
            "dumps were taken at different hook points ({hook_t:?} vs {hook_n:?})"
        )));
    }
    let expected = a.hook.clone().or_else(|| ctx.file.hook.clone());
    let hook = match (hook_t, expected) {
        (Some(h), Some(e)) if h != e => {
            return Err(Error::Config(format!("dumps record hook {h:?} but --hook is {e:?}")));
        }
        (Some(h), _) => h,
        (None, Some(e)) => e,
        (None, None) => DEFAULT_HOOK.to_string(),
    };
    let mut layers = Vec::with_capacity(temporal.len());
    for t in temporal {
        let n = numerical
            .iter()
            .find(|n| n.layer == t.layer)
            .cloned()
            .ok_or_else(|| Error::Structure(format!("layer {} has no numerical-condition tensor", t.layer)))?;
        layers.push(LayerPair::new(t, n)?);
    }
    run.note("hook", hook.clone());
    Ok(Loaded { layers, hook })
}

fn criteria(ctx: &Ctx, a: &NeuronInputs) -> Result<SelectionCriteria> {
    let spec = a.criteria.as_deref().or(ctx.file.criteria.as_deref()).unwrap_or("");
    let mut c = SelectionCriteria::parse(spec)?;
    if let Some(k) = a.topk.or(ctx.file.topk) {
        c.top_k = k;
    }
    Ok(c)
}

fn start(ctx: &Ctx, a: &NeuronInputs, command: &str, extra: serde_json::Value) -> Result<(RunDir, SelectionCriteria)> {
    let c = criteria(ctx, a)?;
    let settings = json!({
        "temporal": a.temporal.display().to_string(),
        "numerical": a.numerical.display().to_string(),
        "criteria": c,
        "hook": a.hook.clone().or_else(|| ctx.file.hook.clone()),
        "extra": extra,
    });
    Ok((RunDir::create(&ctx.out_dir(&a.out), command, settings)?, c))
}

fn summary(sel: &NeuronSelection, hook: &str) {
    println!(
        "{} of {} neurons pass (proportion {:.5}) at hook {hook}",
        sel.len(),
        sel.total_neurons,
        sel.proportion
    );
}

pub(crate) fn identify(ctx: &Ctx, a: &NeuronInputs) -> Result<()> {
    let (mut run, c) = start(ctx, a, "neurons identify", json!({}))?;
    let loaded = load(ctx, a, &mut run)?;
    let stats = neuron_stats(&loaded.layers)?;
    let sel = identify_neurons(&loaded.layers, c)?;
    run.write_csv(
        "neuron_stats.csv",
        &["layer", "neuron", "cohen_d", "t", "p_raw", "p_fdr", "consistency", "selected"],
        stats.iter().map(|s| {
            vec![
                s.layer.to_string(),
                s.neuron.to_string(),
                num(s.cohen_d),
                num(s.t_stat),
                num(s.p_raw),
                num(s.p_fdr),
                num(s.consistency),
                c.admits(s).to_string(),
            ]
        }),
    )?;
    run.write_csv(
        "selected_neurons.csv",
        &["rank", "layer", "neuron", "cohen_d", "p_fdr", "consistency"],
        sel.selected.iter().enumerate().map(|(k, s)| {
            vec![
                (k + 1).to_string(),
                s.layer.to_string(),
                s.neuron.to_string(),
                num(s.cohen_d),
                num(s.p_fdr),
                num(s.consistency),
            ]
        }),
    )?;
    let layer_ids: Vec<u32> = loaded.layers.iter().map(|l| l.temporal.layer).collect();
    let counts: Vec<(u32, usize)> = layer_ids
        .iter()
        .map(|l| (*l, sel.per_layer.get(l).copied().unwrap_or(0)))
        .collect();
    run.write_csv(
        "per_layer.csv",
        &["layer", "selected"],
        counts.iter().map(|(l, n)| vec![l.to_string(), n.to_string()]),
    )?;
    run.write_json(
        "selection.json",
        &json!({
            "hook": loaded.hook,
            "criteria": sel.criteria,
            "total_neurons": sel.total_neurons,
            "selected": sel.len(),
            "proportion": sel.proportion,
            "per_layer": sel.per_layer,
        }),
    )?;
    let chart = render_series(
        &[Series {
            label: "selected".into(),
            points: counts.iter().map(|&(l, n)| (f64::from(l), n as f64)).collect(),
        }],
        &ChartOptions::new("Temporal neurons per layer", "layer", "neurons"),
    )?;
    run.write("per_layer.svg", chart)?;
    summary(&sel, &loaded.hook);
    run.finish()?;
    Ok(())
}

pub(crate) fn curve(ctx: &Ctx, a: &NeuronInputs) -> Result<()> {
    let (mut run, c) = start(ctx, a, "neurons curve", json!({}))?;
    let loaded = load(ctx, a, &mut run)?;
    let sel = identify_neurons(&loaded.layers, c)?;
    summary(&sel, &loaded.hook);
    let k = c.top_k.min(sel.len());
    let temporal: Vec<ActivationTensor> = loaded.layers.iter().map(|l| l.temporal.clone()).collect();
    let numerical: Vec<ActivationTensor> = loaded.layers.iter().map(|l| l.numerical.clone()).collect();
    let t_curve = mean_activation_curve(&sel, &temporal, k)?;
    let n_curve = mean_activation_curve(&sel, &numerical, k)?;
    run.write_csv(
        "activation_curve.csv",
        &["year", "temporal", "numerical"],
        t_curve
            .iter()
            .zip(&n_curve)
            .map(|(t, n)| vec![t.0.to_string(), num(t.1), num(n.1)]),
    )?;
    let to_points = |c: &[(i32, f64)]| c.iter().map(|&(y, v)| (f64::from(y), v)).collect();
    let chart = render_series(
        &[
            Series {
                label: "temporal".into(),
                points: to_points(&t_curve),
            },
            Series {
                label: "numerical".into(),
                points: to_points(&n_curve),
            },
        ],
        &ChartOptions::new(&format!("Mean activation of the top {k} neurons"), "year", "activation"),
    )?;
    run.write("activation_curve.svg", chart)?;
    run.note("top_k", k.to_string());
    run.finish()?;
    Ok(())
}

pub(crate) fn logfit(ctx: &Ctx, a: &NeuronInputs, reference: Option<i32>) -> Result<()> {
    let reference = ctx.reference(reference);
    let (mut run, c) = start(ctx, a, "neurons logfit", json!({ "reference": reference }))?;
    let loaded = load(ctx, a, &mut run)?;
    let sel = identify_neurons(&loaded.layers, c)?;
    summary(&sel, &loaded.hook);
    let temporal: Vec<ActivationTensor> = loaded.layers.iter().map(|l| l.temporal.clone()).collect();
    let report = layerwise_log_fit(&temporal, &sel, reference)?;
    run.write_csv(
        "logfit.csv",
        &["layer", "side", "slope", "intercept", "r2", "n", "degenerate"],
        report.fits.iter().map(|f| {
            vec![
                f.layer.to_string(),
                f.side.as_str().to_string(),
                num(f.fit.alpha),
                num(f.fit.beta),
                num(f.fit.r2),
                f.fit.n.to_string(),
                f.fit.degenerate.to_string(),
            ]
        }),
    )?;
    run.write_json("logfit.json", &report)?;
    let side = |s: Side| Series {
        label: s.as_str().to_string(),
        points: report
            .fits
            .iter()
            .filter(|f| f.side == s)
            .map(|f| (f64::from(f.layer), f.fit.r2))
            .collect(),
    };
    let chart = render_series(
        &[side(Side::Past), side(Side::Future)],
        &ChartOptions::new(
            &format!("Log-distance fit to {reference} by layer"),
            "layer",
            "r2",
        ),
    )?;
    run.write("logfit.svg", chart)?;
    for best in [report.best_past, report.best_future].into_iter().flatten() {
        println!(
            "best {} layer {}: slope {:.4}, r2 {:.4}",
            best.side.as_str(),
            best.layer,
            best.fit.alpha,
            best.fit.r2
        );
    }
    run.finish()?;
    Ok(())
}
