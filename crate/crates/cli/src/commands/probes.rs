use serde_json::json;
use yearsense::dumpio::{open_dump, HiddenStateDump};
use yearsense::probes::{probe_sweep, sample_layers, ProbeTrainConfig};
use yearsense::{Error, Result};

use super::{num, Ctx};
use crate::cli::ProbeSweepArgs;
use crate::manifest::RunDir;
use crate::svg::{render_series, ChartOptions, Series};

/// Layers probed by `--layers auto`.
pub const AUTO_LAYERS: usize = 12;

/// Resolves `auto`, `auto:N` or a comma list against the layers present.
pub fn resolve_layers(spec: &str, available: &[u32]) -> Result<Vec<u32>> {
    let spec = spec.trim();
    let auto = match spec {
        "auto" => Some(AUTO_LAYERS),
        s => match s.strip_prefix("auto:") {
            Some(n) => Some(
                n.parse::<usize>()
                    .map_err(|e| Error::Config(format!("--layers {s:?}: {e}")))?,
            ),
            None => None,
        },
    };
    if let Some(target) = auto {
        let plan = sample_layers(available.len(), target);
        return Ok(plan.layers.iter().map(|&i| available[i as usize]).collect());
    }
    spec.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<u32>()
                .map_err(|e| Error::Config(format!("layer id {p:?}: {e}")))
        })
        .collect()
}

pub(crate) fn sweep(ctx: &Ctx, a: &ProbeSweepArgs) -> Result<()> {
    let reference = ctx.reference(a.reference);
    let metrics = ctx.metrics(a.metric.as_deref(), reference)?;
    let f = &ctx.file;
    let mut config = ProbeTrainConfig {
        seed: ctx.seed(a.seed),
        ..ProbeTrainConfig::default()
    };
    config.epochs = a.epochs.or(f.epochs).unwrap_or(config.epochs);
    config.batch_size = a.batch_size.or(f.batch_size).unwrap_or(config.batch_size);
    config.learning_rate = a.learning_rate.or(f.learning_rate).unwrap_or(config.learning_rate);
    config.validate()?;
    let layer_spec = a.layers.clone().or_else(|| f.layers.clone()).unwrap_or_else(|| "auto".into());
    let settings = json!({
        "dump": a.dump.display().to_string(),
        "metrics": metrics.iter().map(|m| m.key()).collect::<Vec<_>>(),
        "reference": reference,
        "layers": layer_spec,
        "train": config,
    });
    let mut run = RunDir::create(&ctx.out_dir(&a.out), "probes sweep", settings)?;
    run.input(&a.dump);
    let mut source = HiddenStateDump::new(open_dump(&a.dump)?)?;
    let available: Vec<u32> = source.header().layers.iter().map(|l| l.id).collect();
    let layers = resolve_layers(&layer_spec, &available)?;
    if layers.is_empty() {
        return Err(Error::Config("no layers selected".into()));
    }
    let pairs = source.pair_spec().pair_set();
    run.note(
        "layers",
        layers.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
    );
    run.note("element_type", format!("{:?}", source.header().element_type).to_lowercase());
    let report = probe_sweep(&mut source, &layers, &pairs, &metrics, &config)?;

    run.write_csv(
        "probes.csv",
        &[
            "layer", "metric", "r2", "adjusted_r2", "test_n", "train_n", "dim", "small_sample", "degenerate",
            "convexity_flag",
        ],
        report.rows.iter().map(|r| {
            vec![
                r.layer.to_string(),
                r.metric.key().to_string(),
                num(r.score.r2),
                num(r.score.adjusted_r2),
                r.test_n.to_string(),
                r.train_n.to_string(),
                r.score.p.to_string(),
                r.score.small_sample.to_string(),
                r.score.degenerate.to_string(),
                r.convexity_flag.to_string(),
            ]
        }),
    )?;
    run.write_csv(
        "probe_gaps.csv",
        &["layer", "reason"],
        report.gaps.iter().map(|g| vec![g.layer.to_string(), g.reason.clone()]),
    )?;
    run.write_json("probes.json", &report)?;
    let series: Vec<Series> = metrics
        .iter()
        .map(|m| Series {
            label: m.label().to_string(),
            points: report
                .series(m.key())
                .into_iter()
                .map(|(l, v)| (f64::from(l), v))
                .collect(),
        })
        .collect();
    let chart = render_series(
        &series,
        &ChartOptions::new("Probe fit on held-out pairs", "layer", "adjusted r2"),
    )?;
    run.write("probes.svg", chart)?;
    for m in &metrics {
        if let Some((layer, best)) = report
            .series(m.key())
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
        {
            println!("{}: best layer {layer} adjusted r2 {best:.4}", m.label());
        }
    }
    if !report.gaps.is_empty() {
        eprintln!("{} layer(s) could not be read; see probe_gaps.csv", report.gaps.len());
    }
    run.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_specs() {
        let ids: Vec<u32> = (0..24).collect();
        assert_eq!(resolve_layers("auto:3", &ids).unwrap(), vec![0, 12, 23]);
        assert_eq!(resolve_layers("auto", &ids).unwrap().len(), AUTO_LAYERS);
        assert_eq!(resolve_layers("1, 5,9", &ids).unwrap(), vec![1, 5, 9]);
        assert!(resolve_layers("x", &ids).is_err());
        let sparse = [3, 7, 11];
        assert_eq!(resolve_layers("auto", &sparse).unwrap(), vec![3, 7, 11]);
    }
}
