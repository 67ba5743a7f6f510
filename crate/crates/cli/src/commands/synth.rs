use std::collections::BTreeMap;

use serde_json::json;
use yearsense::dumpio::{write_activations, write_hidden_states, write_similarity, ElementType, PairSpec, NOTE_HOOK};
use yearsense::neurons::{ActivationTensor, LayerPair};
use yearsense::synthkit::{
    gen_hierarchical_code, gen_log_coding, gen_metric_distance, gen_planted_neurons, gen_reference_similarity,
    LogCodingSpec, PlantedNeuronSpec, ReferenceSimilaritySpec, SYNTH_MODEL,
};
use yearsense::{Error, PairMode, PairSet, Result, YearRange};

use super::neurons::DEFAULT_HOOK;
use super::Ctx;
use crate::cli::{SynthArgs, SynthKind};
use crate::config::pick_parsed;
use crate::manifest::RunDir;

const DEFAULT_HIERARCHY_LAYERS: usize = 8;

pub(crate) fn run(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let seed = ctx.seed(a.seed);
    let reference = ctx.reference(a.reference);
    let range = pick_parsed(a.range, ctx.file.range.as_ref(), YearRange::default())?;
    let hook = a
        .hook
        .clone()
        .or_else(|| ctx.file.hook.clone())
        .unwrap_or_else(|| DEFAULT_HOOK.to_string());
    let figure = ctx.figure(&a.figure)?;
    let kind = format!("{:?}", a.kind);
    let settings = json!({
        "kind": kind,
        "seed": seed,
        "reference": reference,
        "range": range.to_string(),
        "sigma": a.sigma,
        "lambda": a.lambda,
        "metric": a.metric,
        "neurons": a.neurons,
        "planted": a.planted,
        "effect": a.effect,
        "consistency": a.consistency,
        "n_layers": a.n_layers,
        "alpha": a.alpha,
        "beta": a.beta,
        "future_fidelity": a.future_fidelity,
        "dim": a.dim,
        "samples": a.samples,
        "float16": a.float16,
        "hook": hook,
    });
    let mut run = RunDir::create(&ctx.out_dir(&a.out), "synth", settings)?;
    match a.kind {
        SynthKind::ReferenceSimilarity => {
            let spec = ReferenceSimilaritySpec {
                range,
                reference,
                lambda: a.lambda,
                sigma: a.sigma,
                seed,
            };
            let s = gen_reference_similarity(&spec)?;
            s.write_csv(run.output("similarity.csv")?)?;
            write_similarity(run.output("similarity.dump")?, &s)?;
            figure.heatmap(&mut run, "similarity.svg", s.grid(), &format!("synthetic similarity, R = {reference}"))?;
            run.write_json("truth.json", &spec)?;
            println!("wrote {} x {} similarity matrix (digest {})", range.len(), range.len(), s.digest());
        }
        SynthKind::MetricDistance => {
            let metrics = ctx.metrics(a.metric.as_deref().or(Some("ref")), reference)?;
            let [metric] = metrics[..] else {
                return Err(Error::Config("metric-distance takes exactly one --metric".into()));
            };
            let d = gen_metric_distance(range, metric, a.sigma, seed)?;
            d.write_csv(run.output("distance.csv")?)?;
            figure.heatmap(&mut run, "distance.svg", d.grid(), &format!("synthetic {metric} distance"))?;
            run.write_json("truth.json", &json!({ "metric": metric, "sigma": a.sigma, "seed": seed }))?;
            println!("wrote {} distance matrix over {range}", metric.label());
        }
        SynthKind::PlantedNeurons => {
            let mut spec = PlantedNeuronSpec::new(a.neurons, a.planted, a.effect, a.consistency, seed);
            spec.range = range;
            if let Some(n) = a.n_layers {
                spec.n_layers = n;
            }
            let p = gen_planted_neurons(&spec)?;
            write_pair(&mut run, &p.layers, &hook)?;
            run.write_csv(
                "planted.csv",
                &["layer", "neuron"],
                p.planted.iter().map(|(l, n)| vec![l.to_string(), n.to_string()]),
            )?;
            run.write_json("truth.json", &spec)?;
            println!("planted {} neurons across {} layers", p.planted.len(), spec.n_layers);
        }
        SynthKind::LogCoding => {
            let mut spec = LogCodingSpec::new(a.alpha, a.beta, a.sigma, seed);
            spec.range = range;
            spec.reference = reference;
            spec.future_fidelity = a.future_fidelity;
            if let Some(n) = a.n_layers {
                spec.n_layers = n;
            }
            let lc = gen_log_coding(&spec)?;
            write_pair(&mut run, &lc.layers, &hook)?;
            run.write_csv(
                "coded.csv",
                &["layer", "neuron"],
                lc.coded.iter().map(|(l, n)| vec![l.to_string(), n.to_string()]),
            )?;
            run.write_json("truth.json", &spec)?;
            println!("{} coded neurons across {} layers", lc.coded.len(), spec.n_layers);
        }
        SynthKind::HierarchicalCode => {
            let pairs = PairSet::enumerate(range, PairMode::Full);
            let indices = pairs.stratified_sample(a.samples, seed);
            let n_layers = a.n_layers.unwrap_or(DEFAULT_HIERARCHY_LAYERS);
            let code = gen_hierarchical_code(&pairs, &indices, reference, n_layers, a.dim, a.sigma, seed)?;
            let element = if a.float16 { ElementType::Float16 } else { ElementType::Float32 };
            let spec = PairSpec {
                range,
                mode: PairMode::Full,
                indices,
            };
            write_hidden_states(run.output("hidden_states.dump")?, SYNTH_MODEL, spec, &code.layers, element)?;
            run.write_json(
                "truth.json",
                &json!({ "reference": reference, "ref_weight": code.ref_weight, "noise": a.sigma, "seed": seed }),
            )?;
            println!("{n_layers} layers of {} pairs x {} dims", a.samples.min(pairs.len()), a.dim);
        }
    }
    run.finish()?;
    Ok(())
}

fn write_pair(run: &mut RunDir, layers: &[LayerPair], hook: &str) -> Result<()> {
    let notes = BTreeMap::from([(NOTE_HOOK.to_string(), hook.to_string())]);
    let temporal: Vec<ActivationTensor> = layers.iter().map(|l| l.temporal.clone()).collect();
    let numerical: Vec<ActivationTensor> = layers.iter().map(|l| l.numerical.clone()).collect();
    write_activations(run.output("temporal.dump")?, SYNTH_MODEL, &temporal, notes.clone())?;
    write_activations(run.output("numerical.dump")?, SYNTH_MODEL, &numerical, notes)?;
    Ok(())
}
