use std::path::Path;

use serde_json::json;
use yearsense::analysis::{compare_metrics, estimate_reference as window_estimate, DEFAULT_WINDOW};
use yearsense::matrix::similarity_to_distance;
use yearsense::{DistanceMatrix, Error, PairMode, PairSet, Result};

use super::{load_similarity, num, Ctx};
use crate::cli::{EstimateReferenceArgs, FitMetricsArgs, MatrixKind};
use crate::config::{pick, pick_parsed};
use crate::manifest::RunDir;
use crate::svg::{render_series, ChartOptions, Series};

fn load_distance(path: &Path, kind: MatrixKind) -> Result<DistanceMatrix> {
    match kind {
        MatrixKind::Similarity => Ok(similarity_to_distance(&load_similarity(path)?)),
        MatrixKind::Distance if super::is_csv(path) => DistanceMatrix::read_csv(path),
        MatrixKind::Distance => Err(Error::Config(format!(
            "{}: dumps hold similarities; use --kind similarity",
            path.display()
        ))),
    }
}

pub(crate) fn fit_metrics(ctx: &Ctx, a: &FitMetricsArgs) -> Result<()> {
    let reference = ctx.reference(a.reference);
    let metrics = ctx.metrics(a.metric.as_deref(), reference)?;
    let mode = pick_parsed(a.pairs, ctx.file.pairs.as_ref(), PairMode::Full)?;
    let settings = json!({
        "matrices": a.matrices.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "kind": format!("{:?}", a.kind).to_lowercase(),
        "metrics": metrics.iter().map(|m| m.key()).collect::<Vec<_>>(),
        "reference": reference,
        "pairs": mode.to_string(),
    });
    let mut run = RunDir::create(&ctx.out_dir(&a.out), "fit-metrics", settings)?;

    let mut wide = Vec::new();
    let mut long = Vec::new();
    let mut results = Vec::new();
    for path in &a.matrices {
        run.input(path);
        let d = load_distance(path, a.kind)?;
        let pairs = PairSet::enumerate(d.range(), mode);
        let cmp = compare_metrics(&d, &pairs, &metrics)?;
        let model = d.meta.model.clone();
        let condition = d.meta.condition.to_string();
        let n = cmp.fits.first().map_or(0, |f| f.fit.n);
        let mut row = vec![model.clone(), condition.clone(), d.range().to_string(), n.to_string()];
        row.extend(cmp.fits.iter().map(|f| num(f.fit.r2)));
        row.push(cmp.best.label().to_string());
        wide.push(row);
        for f in &cmp.fits {
            long.push(vec![
                model.clone(),
                condition.clone(),
                f.metric.label().to_string(),
                num(f.fit.alpha),
                num(f.fit.beta),
                num(f.fit.r2),
                f.fit.n.to_string(),
                f.fit.degenerate.to_string(),
            ]);
        }
        println!(
            "{model} ({condition}): best {} [{}]",
            cmp.best,
            cmp.fits
                .iter()
                .map(|f| format!("{} r2={:.4}", f.metric.key(), f.fit.r2))
                .collect::<Vec<_>>()
                .join(", ")
        );
        results.push(json!({
            "input": path.display().to_string(),
            "model": model,
            "condition": condition,
            "best": cmp.best.label(),
            "fits": cmp.fits,
        }));
    }
    let mut header = vec!["model".to_string(), "condition".into(), "range".into(), "n".into()];
    header.extend(metrics.iter().map(|m| format!("r2_{}", m.key())));
    header.push("best".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.write_csv("metric_fits.csv", &header, wide)?;
    run.write_csv(
        "metric_fits_long.csv",
        &["model", "condition", "metric", "slope", "intercept", "r2", "n", "degenerate"],
        long,
    )?;
    run.write_json("metric_fits.json", &results)?;
    run.finish()?;
    Ok(())
}

pub(crate) fn estimate_reference(ctx: &Ctx, a: &EstimateReferenceArgs) -> Result<()> {
    let window = pick(a.window, ctx.file.window, DEFAULT_WINDOW);
    let figure = ctx.figure(&a.figure)?;
    let settings = json!({
        "matrix": a.matrix.display().to_string(),
        "window": window,
        "figure": figure.json(),
    });
    let mut run = RunDir::create(&ctx.out_dir(&a.out), "estimate-reference", settings)?;
    run.input(&a.matrix);
    let s = load_similarity(&a.matrix)?;
    let est = window_estimate(&s, window)?;
    run.write_csv(
        "reference_profile.csv",
        &["center", "mean_similarity", "cells"],
        est.profile
            .iter()
            .map(|p| vec![p.center.to_string(), num(p.mean_similarity), p.cells.to_string()]),
    )?;
    run.write_json(
        "reference.json",
        &json!({
            "model": s.meta.model,
            "condition": s.meta.condition,
            "window": est.window,
            "argmin": est.argmin,
        }),
    )?;
    let series = Series {
        label: format!("window {window}"),
        points: est
            .profile
            .iter()
            .map(|p| (f64::from(p.center), p.mean_similarity))
            .collect(),
    };
    let chart = render_series(
        &[series],
        &ChartOptions::new(
            &format!("Local similarity along the diagonal (minimum at {})", est.argmin),
            "window center (year)",
            "mean similarity",
        ),
    )?;
    run.write("reference_profile.svg", chart)?;
    figure.heatmap(&mut run, "similarity.svg", s.grid(), &s.meta.model)?;
    println!("estimated reference year: {} (window {window})", est.argmin);
    run.note("argmin", est.argmin.to_string());
    run.finish()?;
    Ok(())
}
