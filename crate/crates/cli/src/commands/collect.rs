use std::sync::atomic::{AtomicBool, Ordering};

use serde_json::json;
use yearsense::dumpio::write_similarity;
use yearsense::{d_ref, Condition, Error, PairMode, PairSet, Result, YearRange};
use yearsense_collect::{
    collect_matrix, CollectOptions, CollectOutcome, ExperimentConfig, HttpJudge, JudgeError, JudgeRequest,
    API_KEY_ENV,
};

use super::{missing_flag, Ctx};
use crate::cli::CollectArgs;
use crate::config::{pick, pick_parsed};
use crate::manifest::RunDir;

pub const CHECKPOINT_NAME: &str = "checkpoint.jsonl";

static CANCEL: AtomicBool = AtomicBool::new(false);

pub(crate) fn run(ctx: &Ctx, a: &CollectArgs) -> Result<()> {
    let f = &ctx.file;
    let model = a
        .model
        .clone()
        .or_else(|| f.model.clone())
        .or_else(|| a.mock_reference.map(|r| format!("mock-ref-{r}")))
        .ok_or_else(|| missing_flag("model"))?;
    let condition = pick_parsed(a.condition, f.condition.as_ref(), Condition::Year)?;
    let mut config = ExperimentConfig::new(model, condition);
    if let Some(e) = a.endpoint.clone().or_else(|| f.endpoint.clone()) {
        config.endpoint = e;
    }
    if let Some(t) = a.template.clone().or_else(|| f.template.clone()) {
        config.template = t;
    }
    config.max_in_flight = pick(a.max_in_flight, f.max_in_flight, config.max_in_flight);
    config.retry_budget = pick(a.retries, f.retries, config.retry_budget);
    config.cache_path = a.cache.clone().or_else(|| f.cache.clone());
    config.validate()?;
    let range = pick_parsed(a.range, f.range.as_ref(), YearRange::default())?;
    let mode = pick_parsed(a.pairs, f.pairs.as_ref(), PairMode::Full)?;
    let pairs = PairSet::enumerate(range, mode);
    let figure = ctx.figure(&a.figure)?;

    let settings = json!({
        "endpoint": config.endpoint,
        "model": config.model,
        "condition": condition.as_str(),
        "template": config.template,
        "temperature": config.temperature,
        "range": range.to_string(),
        "pairs": mode.to_string(),
        "max_in_flight": config.max_in_flight,
        "retries": config.retry_budget,
        "cache": config.cache_path.as_ref().map(|p| p.display().to_string()),
        "mock_reference": a.mock_reference,
        "figure": figure.json(),
    });
    let mut run = RunDir::create(&ctx.out_dir(&a.out), "collect", settings)?;
    run.set_config_digest(config.digest(&pairs));
    let checkpoint = run.output(CHECKPOINT_NAME)?;
    if checkpoint.exists() && !a.resume {
        return Err(Error::Config(format!(
            "{} already exists; pass --resume to continue it or choose another --out",
            checkpoint.display()
        )));
    }
    if let Some(cache) = &config.cache_path {
        run.note("cache", cache.display().to_string());
    }
    // a second handler (tests, embedding) is not an error
    let _ = ctrlc::set_handler(|| CANCEL.store(true, Ordering::SeqCst));
    let opts = CollectOptions {
        checkpoint: Some(checkpoint),
        cancel: Some(&CANCEL),
        max_pairs: a.max_requests,
    };

    let outcome = match a.mock_reference {
        Some(reference) => {
            let judge = move |r: &JudgeRequest<'_>| -> std::result::Result<String, JudgeError> {
                Ok(format!("{:.6}", (-d_ref(r.pair.0, r.pair.1, reference)).exp()))
            };
            collect_matrix(&config, &pairs, &judge, &opts)?
        }
        None => {
            let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
            if key.is_none() {
                log::warn!("{API_KEY_ENV} is not set; sending requests without an API key");
            }
            let judge = HttpJudge::new(&config.endpoint, &config.model, key, config.temperature);
            collect_matrix(&config, &pairs, &judge, &opts)?
        }
    };
    write_outputs(&mut run, &outcome, &figure)?;
    let s = outcome.stats;
    if outcome.complete {
        println!(
            "collected {} pairs ({} resumed, {} cached, {} missing); digest {}",
            s.total,
            s.resumed,
            s.cache_hits,
            s.missing,
            outcome.matrix.digest()
        );
    } else {
        println!(
            "{} of {} pairs done; rerun with --resume to continue",
            s.resumed + s.finished,
            s.total
        );
    }
    run.note("complete", outcome.complete.to_string());
    run.finish()?;
    Ok(())
}

fn write_outputs(run: &mut RunDir, outcome: &CollectOutcome, figure: &super::Figure) -> Result<()> {
    run.write_json(
        "collect_summary.json",
        &json!({
            "complete": outcome.complete,
            "config_digest": outcome.config_digest,
            "stats": outcome.stats,
            "matrix_digest": outcome.complete.then(|| outcome.matrix.digest()),
        }),
    )?;
    if !outcome.complete {
        return Ok(());
    }
    outcome.matrix.write_csv(run.output("similarity.csv")?)?;
    write_similarity(run.output("similarity.dump")?, &outcome.matrix)?;
    let title = format!("{} ({})", outcome.matrix.meta.model, outcome.matrix.meta.condition);
    figure.heatmap(run, "similarity.svg", outcome.matrix.grid(), &title)?;
    Ok(())
}
