use serde_json::json;
use yearsense::dumpio::{open_dump, read_embeddings, write_embeddings};
use yearsense::embeddings::{cosine_matrix, mds_embed, semantic_regression, MdsConfig};
use yearsense::synthkit::mock_embedding;
use yearsense::{Error, PairMode, PairSet, Result, StimulusTemplate, YearGrid, YearRange};
use yearsense_collect::{embed_collect, EmbedOptions, HttpEmbedder, JudgeError, ResponseCache, API_KEY_ENV};

use super::{grid_csv, missing_flag, num, Ctx};
use crate::cli::{EmbedAnalyzeArgs, EmbedCollectArgs};
use crate::config::{pick, pick_parsed};
use crate::manifest::RunDir;
use crate::svg::{render_scatter, ChartOptions};

/// Angle scale of the offline embedder.
const MOCK_SCALE: f64 = 0.5;

/// Year parsed back out of a rendered stimulus (digits only, sign kept).
fn stimulus_year(text: &str) -> Option<i32> {
    let digits: String = text.chars().filter(char::is_ascii_digit).collect();
    let year: i32 = digits.parse().ok()?;
    let negative = text.split(':').nth(1).unwrap_or(text).trim_start().starts_with('-');
    Some(if negative { -year } else { year })
}

pub(crate) fn collect(ctx: &Ctx, a: &EmbedCollectArgs) -> Result<()> {
    let f = &ctx.file;
    let model = a
        .model
        .clone()
        .or_else(|| f.model.clone())
        .or_else(|| a.mock_reference.map(|r| format!("mock-embed-{r}")))
        .ok_or_else(|| missing_flag("model"))?;
    let endpoint = a
        .endpoint
        .clone()
        .or_else(|| f.endpoint.clone())
        .unwrap_or_else(|| "https://api.openai.com/v1".into());
    let range = pick_parsed(a.range, f.range.as_ref(), YearRange::default())?;
    let template = a
        .stimulus_template
        .clone()
        .or_else(|| f.stimulus_template.clone())
        .map(StimulusTemplate)
        .unwrap_or_default();
    let opts = EmbedOptions {
        retry_budget: pick(a.retries, f.retries, EmbedOptions::default().retry_budget),
        ..EmbedOptions::default()
    };
    let cache_path = a.cache.clone().or_else(|| f.cache.clone());
    let settings = json!({
        "endpoint": endpoint,
        "model": model,
        "range": range.to_string(),
        "stimulus_template": template.0,
        "retries": opts.retry_budget,
        "cache": cache_path.as_ref().map(|p| p.display().to_string()),
        "mock_reference": a.mock_reference,
    });
    let mut run = RunDir::create(&ctx.out_dir(&a.out), "embed collect", settings)?;
    let cache = cache_path.as_ref().map(ResponseCache::open).transpose()?;
    let set = match a.mock_reference {
        Some(reference) => {
            let provider = move |text: &str| -> std::result::Result<Vec<f64>, JudgeError> {
                stimulus_year(text)
                    .map(|y| mock_embedding(y, reference, MOCK_SCALE))
                    .ok_or_else(|| JudgeError::Malformed(format!("no year in {text:?}")))
            };
            embed_collect(&provider, &model, range, &template, cache.as_ref(), &opts)?
        }
        None => {
            let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
            let provider = HttpEmbedder::new(&endpoint, &model, key);
            embed_collect(&provider, &model, range, &template, cache.as_ref(), &opts)?
        }
    };
    write_embeddings(run.output("embeddings.dump")?, &set)?;
    println!("embedded {} years ({} dimensions) with {}", set.vectors.len(), set.dim, set.model);
    run.finish()?;
    Ok(())
}

pub(crate) fn analyze(ctx: &Ctx, a: &EmbedAnalyzeArgs) -> Result<()> {
    let reference = ctx.reference(a.reference);
    let metrics = ctx.metrics(a.metric.as_deref(), reference)?;
    let mode = pick_parsed(a.pairs, ctx.file.pairs.as_ref(), PairMode::Full)?;
    let figure = ctx.figure(&a.figure)?;
    let settings = json!({
        "embeddings": a.embeddings.display().to_string(),
        "metrics": metrics.iter().map(|m| m.key()).collect::<Vec<_>>(),
        "reference": reference,
        "pairs": mode.to_string(),
        "mds": !a.no_mds,
        "figure": figure.json(),
    });
    let mut run = RunDir::create(&ctx.out_dir(&a.out), "embed analyze", settings)?;
    run.input(&a.embeddings);
    let set = read_embeddings(&mut open_dump(&a.embeddings)?)?;
    let s = cosine_matrix(&set);
    grid_csv(&mut run, "cosine.csv", &format!("model={}", set.model), s.grid())?;
    // cosine lives in [-1, 1]; the heatmap shows (1 + cos) / 2
    let shown = YearGrid::from_fn(s.range(), |i, j| s.get(i, j).map(|v| (1.0 + v) / 2.0));
    figure.heatmap(&mut run, "cosine.svg", &shown, &format!("{}: (1 + cosine) / 2", set.model))?;

    let pairs = PairSet::enumerate(s.range(), mode);
    let cmp = semantic_regression(&s, &pairs, &metrics)?;
    run.write_csv(
        "semantic_fits.csv",
        &["metric", "slope", "intercept", "r2", "n", "degenerate"],
        cmp.fits.iter().map(|f| {
            vec![
                f.metric.label().to_string(),
                num(f.fit.alpha),
                num(f.fit.beta),
                num(f.fit.r2),
                f.fit.n.to_string(),
                f.fit.degenerate.to_string(),
            ]
        }),
    )?;
    println!("semantic regression: best {}", cmp.best);
    run.note("best_metric", cmp.best.label());

    if !a.no_mds {
        let d = s
            .to_dissimilarity()
            .ok_or_else(|| Error::Data("cosine matrix has undefined cells (zero vectors); cannot run MDS".into()))?;
        let mds = mds_embed(&d, MdsConfig::default())?;
        let years: Vec<i32> = set.range.years().collect();
        run.write_csv(
            "mds.csv",
            &["year", "x", "y"],
            years.iter().zip(&mds.coords).map(|(y, c)| vec![y.to_string(), num(c[0]), num(c[1])]),
        )?;
        run.write_json(
            "mds.json",
            &json!({
                "stress": mds.stress,
                "iterations": mds.iterations,
                "converged": mds.converged,
            }),
        )?;
        let points: Vec<(f64, f64)> = mds.coords.iter().map(|c| (c[0], c[1])).collect();
        let labels: Vec<String> = years
            .iter()
            .map(|&y| if y % 100 == 0 || y == reference { y.to_string() } else { String::new() })
            .collect();
        let chart = render_scatter(
            &points,
            &labels,
            &ChartOptions::new(&format!("MDS of {} (stress {:.4})", set.model, mds.stress), "dim 1", "dim 2"),
        )?;
        run.write("mds.svg", chart)?;
        println!("mds stress {:.5} after {} iterations", mds.stress, mds.iterations);
    }
    run.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stimulus_year_roundtrip() {
        assert_eq!(stimulus_year("Year: 1-9-9-9"), Some(1999));
        assert_eq!(stimulus_year("Year: -4-4"), Some(-44));
        assert_eq!(stimulus_year("no digits"), None);
    }
}
