//! Concurrent, checkpointed matrix collection.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use yearsense::{MatrixMeta, PairSet, Result, SimilarityMatrix, YearGrid};

use crate::cache::{cache_key, ResponseCache};
use crate::checkpoint::{Checkpoint, ResponseRecord};
use crate::config::ExperimentConfig;
use crate::judge::{Judge, JudgeRequest};
use crate::prompt::{build_prompt, parse_rating};

#[derive(Debug, Default)]
pub struct CollectOptions<'a> {
    pub checkpoint: Option<PathBuf>,
    /// Checked before each pair; set it to stop early.
    pub cancel: Option<&'a AtomicBool>,
    /// Stop after this many new pairs (resumable, like a cancellation).
    pub max_pairs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct CollectStats {
    pub total: usize,
    /// Finished in an earlier run and taken from the checkpoint.
    pub resumed: usize,
    /// Finished in this run.
    pub finished: usize,
    pub cache_hits: usize,
    pub judge_calls: usize,
    pub missing: usize,
}

#[derive(Debug)]
pub struct CollectOutcome {
    pub matrix: SimilarityMatrix,
    /// Records produced by this run, ordered by pair index.
    pub records: Vec<ResponseRecord>,
    pub stats: CollectStats,
    /// Every pair has a rating or a Missing marker.
    pub complete: bool,
    pub config_digest: String,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn judge_pair(
    config: &ExperimentConfig,
    pairs: &PairSet,
    index: usize,
    judge: &dyn Judge,
    cache: Option<&ResponseCache>,
) -> Result<ResponseRecord> {
    let (a, b) = pairs.get(index).expect("pending index within pair set");
    let prompt = build_prompt(&config.template, a, b, config.condition)?;
    let key = cache_key(&config.model, &prompt, config.temperature);
    if let Some(hit) = cache.and_then(|c| c.get(&key)) {
        if let Some(r) = parse_rating(&hit) {
            return Ok(ResponseRecord {
                index,
                pair: (a, b),
                raw: Some(hit),
                rating: Some(r),
                failure: None,
                attempts: 0,
                timestamp: now(),
            });
        }
    }
    let mut raw = None;
    let mut failure = None;
    let mut attempts = 0;
    for attempt in 0..=config.retry_budget {
        if attempt > 0 && config.backoff_base_ms > 0 {
            let factor = 1u64 << (attempt - 1).min(16);
            std::thread::sleep(Duration::from_millis(config.backoff_base_ms.saturating_mul(factor)));
        }
        attempts += 1;
        match judge.complete(&JudgeRequest {
            pair: (a, b),
            prompt: &prompt,
        }) {
            Ok(text) => {
                if let Some(r) = parse_rating(&text) {
                    if let Some(c) = cache {
                        c.put(&key, &text)?;
                    }
                    return Ok(ResponseRecord {
                        index,
                        pair: (a, b),
                        raw: Some(text),
                        rating: Some(r),
                        failure: None,
                        attempts,
                        timestamp: now(),
                    });
                }
                failure = Some("no rating in [0, 1] in reply".to_string());
                raw = Some(text);
            }
            Err(e) => failure = Some(e.to_string()),
        }
    }
    log::warn!("pair ({a}, {b}) missing after {attempts} attempts: {}", failure.as_deref().unwrap_or(""));
    Ok(ResponseRecord {
        index,
        pair: (a, b),
        raw,
        rating: None,
        failure,
        attempts,
        timestamp: now(),
    })
}

/// Collects one rating per pair. Cells are filled by pair index, so the
/// result does not depend on parallelism or on where a run was interrupted.
/// With a checkpoint, finished pairs are never requested again.
pub fn collect_matrix(
    config: &ExperimentConfig,
    pairs: &PairSet,
    judge: &dyn Judge,
    options: &CollectOptions<'_>,
) -> Result<CollectOutcome> {
    config.validate()?;
    let digest = config.digest(pairs);
    let cache = config.cache_path.as_ref().map(ResponseCache::open).transpose()?;
    let mut checkpoint = options
        .checkpoint
        .as_ref()
        .map(|p| Checkpoint::open(p, &digest))
        .transpose()?;
    let mut done: Vec<Option<Option<f64>>> = vec![None; pairs.len()];
    let mut stats = CollectStats {
        total: pairs.len(),
        ..Default::default()
    };
    if let Some(ck) = &checkpoint {
        for (&idx, &rating) in ck.completed() {
            if idx < done.len() {
                done[idx] = Some(rating);
                stats.resumed += 1;
            }
        }
    }
    let pending: Vec<usize> = (0..pairs.len()).filter(|&i| done[i].is_none()).collect();
    let budget = options.max_pairs.unwrap_or(usize::MAX).min(pending.len());
    let cursor = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = config.max_in_flight.min(budget.max(1));
    let mut records = Vec::new();
    let mut first_error = None;

    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<Result<ResponseRecord>>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (cursor, stop, pending, cache) = (&cursor, &stop, &pending, cache.as_ref());
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) || options.cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                    break;
                }
                let k = cursor.fetch_add(1, Ordering::Relaxed);
                if k >= budget {
                    break;
                }
                let result = judge_pair(config, pairs, pending[k], judge, cache);
                if tx.send(result).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for result in rx {
            match result.and_then(|r| {
                if let Some(ck) = checkpoint.as_mut() {
                    ck.append(&r)?;
                }
                Ok(r)
            }) {
                Ok(r) => {
                    done[r.index] = Some(r.rating);
                    stats.finished += 1;
                    if r.attempts == 0 {
                        stats.cache_hits += 1;
                    }
                    stats.judge_calls += r.attempts as usize;
                    records.push(r);
                }
                Err(e) => {
                    stop.store(true, Ordering::Relaxed);
                    first_error.get_or_insert(e);
                }
            }
        }
    });
    if let Some(ck) = checkpoint.as_mut() {
        ck.flush()?;
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    records.sort_by_key(|r| r.index);

    let mut grid = YearGrid::missing(pairs.range());
    for (idx, cell) in done.iter().enumerate() {
        if let Some(rating) = cell {
            let (a, b) = pairs.get(idx).expect("index within pair set");
            grid.set(a, b, *rating)?;
            if rating.is_none() {
                stats.missing += 1;
            }
        }
    }
    let complete = done.iter().all(Option::is_some);
    let matrix = SimilarityMatrix::new(grid, MatrixMeta::new(config.model.clone(), config.condition))?;
    Ok(CollectOutcome {
        matrix,
        records,
        stats,
        complete,
        config_digest: digest,
    })
}
