//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use yearsense::analysis::{compare_metrics, estimate_reference, ols_fit};
use yearsense::embeddings::{classical_mds, kruskal_stress, mds_embed, smacof_from, MdsConfig};
use yearsense::metrics::{levenshtein, log_offset};
use yearsense::neurons::{bh_fdr, identify_neurons, layerwise_log_fit, paired_t, SelectionCriteria};
use yearsense::probes::{evaluate_probe, train_probe, ProbeTrainConfig};
use yearsense::synthkit::oracles::{oracle_bh, oracle_levenshtein, oracle_ols, oracle_smacof, oracle_t_two_sided};
use yearsense::synthkit::{
    distance_matrix, gen_linear_code, gen_log_coding, gen_metric_distance, gen_planted_neurons,
    gen_reference_similarity, random_dissimilarity, LogCodingSpec, PlantedNeuronSpec, ReferenceSimilaritySpec,
};
use yearsense::{d_lev, d_log, d_ref, Condition, PairMode, PairSet, TheoreticalMetric, YearRange};
use yearsense_collect::{collect_matrix, CollectOptions, ExperimentConfig, JudgeError, JudgeRequest};

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut lev_mismatch = 0;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let len_a = rng.random_range(1..=8);
        let len_b = rng.random_range(1..=8);
        let a: String = (0..len_a).map(|_| char::from(b'0' + rng.random_range(0..10u8))).collect();
        let b: String = (0..len_b).map(|_| char::from(b'0' + rng.random_range(0..10u8))).collect();
        if levenshtein(a.as_bytes(), b.as_bytes()) != oracle_levenshtein(&a, &b) {
            lev_mismatch += 1;
        }
        let i = rng.random_range(1..=9999);
        let j = rng.random_range(1..=9999);
        if d_lev(i, j) != oracle_levenshtein(&i.to_string(), &j.to_string()) {
            lev_mismatch += 1;
        }
        let direct_log = ((i as f64).ln() - (j as f64).ln()).abs();
        worst = worst.max((d_log(i, j).unwrap() - direct_log).abs());
        let r = rng.random_range(1500..=2600);
        let li = (((r - i) as f64).abs()).max(1.0).ln();
        let lj = (((r - j) as f64).abs()).max(1.0).ln();
        let opposite = (i < r && j > r) || (i > r && j < r);
        let direct_ref = if opposite { li + lj } else { (li - lj).abs() };
        worst = worst.max((d_ref(i, j, r) - direct_ref).abs());
    }
    let elapsed = start.elapsed();
    check(
        lev_mismatch == 0 && worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("2000 lev comparisons exact, max formula error {worst:.1e}, {elapsed:.2?}"),
        format!("{lev_mismatch} lev mismatches, max formula error {worst:.1e}, {elapsed:.2?}"),
    )
}

fn ols_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let slope = rng.random_range(-3.0..3.0);
        let icpt = rng.random_range(-3.0..3.0);
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| slope * v + icpt + rng.random_range(-2.0..2.0)).collect();
        let fit = ols_fit(&x, &y).unwrap();
        let (a, b, r2) = oracle_ols(&x, &y);
        worst = worst.max((fit.alpha - a).abs()).max((fit.beta - b).abs()).max((fit.r2 - r2).abs());
    }
    check(
        worst <= 1e-10,
        format!("100 instances, max deviation {worst:.1e}"),
        format!("max deviation {worst:.1e} > 1e-10"),
    )
}

fn statistics_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for n in 2..=50 {
        for trial in 0..20 {
            let shift = trial as f64 * 0.1;
            let deltas: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) + shift).collect();
            let t = paired_t(&deltas).unwrap();
            let p_oracle = oracle_t_two_sided(t.t, (n - 1) as u32);
            worst = worst.max((t.p - p_oracle).abs());
        }
    }
    let mut bh_mismatch = 0;
    for _ in 0..10_000 {
        let m = rng.random_range(1..=60);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                if rng.random_bool(0.2) {
                    // repeated values exercise ties
                    0.01 * rng.random_range(0..5) as f64
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        if bh_fdr(&p).unwrap() != oracle_bh(&p) {
            bh_mismatch += 1;
        }
    }
    check(
        worst <= 1e-10 && bh_mismatch == 0,
        format!("t p-values max deviation {worst:.1e} over n=2..50; BH exact on 10000 vectors"),
        format!("t p-values max deviation {worst:.1e}; {bh_mismatch} BH mismatches"),
    )
}

fn planted_neurons() -> Outcome {
    let start = Instant::now();
    let planted = gen_planted_neurons(&PlantedNeuronSpec::new(5000, 50, 3.0, 1.0, 4)).unwrap();
    let sel = identify_neurons(&planted.layers, SelectionCriteria::default()).unwrap();
    let chosen: Vec<(u32, usize)> = sel.selected.iter().map(|s| (s.layer, s.neuron)).collect();
    let hits = planted.planted.iter().filter(|p| chosen.contains(p)).count();
    let recall = hits as f64 / planted.planted.len() as f64;
    let fp = chosen.len() - hits;

    let null = gen_planted_neurons(&PlantedNeuronSpec::new(5000, 0, 0.0, 1.0, 5)).unwrap();
    let null_sel = identify_neurons(&null.layers, SelectionCriteria::default()).unwrap();
    let null_rate = null_sel.len() as f64 / 5000.0;
    let elapsed = start.elapsed();
    check(
        recall >= 0.95 && fp <= 5 && null_rate <= 0.001 && elapsed < Duration::from_secs(60),
        format!("recall {recall:.3}, {fp} false positives, null FP rate {null_rate:.4}, {elapsed:.2?}"),
        format!("recall {recall:.3}, {fp} FP, null FP rate {null_rate:.4}, {elapsed:.2?}"),
    )
}

fn log_coding() -> Outcome {
    let spec = LogCodingSpec::new(0.8, 0.1, 0.04, 6);
    let lc = gen_log_coding(&spec).unwrap();
    let sel = identify_neurons(&lc.layers, SelectionCriteria::default()).unwrap();
    let temporal: Vec<_> = lc.layers.iter().map(|p| p.temporal.clone()).collect();
    let report = layerwise_log_fit(&temporal, &sel, 2025).unwrap();
    let alpha_err = report
        .fits
        .iter()
        .map(|f| (f.fit.alpha - 0.8).abs() / 0.8)
        .fold(0.0f64, f64::max);
    let min_r2 = report.fits.iter().map(|f| f.fit.r2).fold(1.0f64, f64::min);

    let asym_spec = LogCodingSpec {
        future_fidelity: 0.0,
        ..LogCodingSpec::new(0.8, 0.1, 0.04, 7)
    };
    let asym = gen_log_coding(&asym_spec).unwrap();
    let asym_sel = identify_neurons(&asym.layers, SelectionCriteria::default()).unwrap();
    let asym_t: Vec<_> = asym.layers.iter().map(|p| p.temporal.clone()).collect();
    let asym_report = layerwise_log_fit(&asym_t, &asym_sel, 2025).unwrap();
    let past = asym_report.best_past.map(|f| f.fit.r2).unwrap_or(0.0);
    let future = asym_report.best_future.map(|f| f.fit.r2).unwrap_or(1.0);
    check(
        alpha_err <= 0.05 && min_r2 >= 0.9 && future < 0.2 && past >= 0.9,
        format!(
            "alpha rel. error {alpha_err:.4}, min side r2 {min_r2:.4}; asymmetric: past r2 {past:.4}, best future r2 {future:.4}"
        ),
        format!("alpha rel. error {alpha_err:.4}, min r2 {min_r2:.4}; asymmetric past {past:.4}, future {future:.4}"),
    )
}

fn reference_recovery() -> Outcome {
    let mut summary = Vec::new();
    let mut ok = true;
    for (reference, range) in [(1900, YearRange::new(1800, 1999).unwrap()), (2025, YearRange::new(1925, 2124).unwrap())] {
        let mut hits = 0;
        for trial in 0..100 {
            let s = gen_reference_similarity(&ReferenceSimilaritySpec {
                range,
                reference,
                lambda: 1.0,
                sigma: 0.01,
                seed: 1000 + trial,
            })
            .unwrap();
            let est = estimate_reference(&s, 5).unwrap();
            if (est.argmin - reference).abs() <= 3 {
                hits += 1;
            }
        }
        ok &= hits >= 95;
        summary.push(format!("R={reference}: {hits}/100"));
    }
    check(ok, summary.join(", "), summary.join(", "))
}

fn model_selection() -> Outcome {
    let range = YearRange::new(1925, 2124).unwrap();
    let pairs = PairSet::enumerate(range, PairMode::Full);
    let metrics = TheoreticalMetric::all(2025);
    let mut summary = Vec::new();
    let mut ok = true;
    for (m, generating) in metrics.iter().enumerate() {
        let mut wins = 0;
        for trial in 0..100u64 {
            let d = gen_metric_distance(range, *generating, 0.01, 5000 + 100 * m as u64 + trial).unwrap();
            if compare_metrics(&d, &pairs, &metrics).unwrap().best == *generating {
                wins += 1;
            }
        }
        ok &= wins >= 95;
        summary.push(format!("{}: {wins}/100", generating.key()));
    }
    check(ok, summary.join(", "), summary.join(", "))
}

fn probes() -> Outcome {
    let config = ProbeTrainConfig::default();
    let code = gen_linear_code(5000, 8, 0.05, 8).unwrap();
    let trained = train_probe(&code.batch, &code.targets, &config).unwrap();
    let test = &trained.split.test;
    let held_out = code.batch.select_rows(test);
    let held_targets: Vec<f64> = test.iter().map(|&r| code.targets[r]).collect();
    let r2 = evaluate_probe(&trained.model, &held_out, &held_targets).unwrap().r2;

    let mut shuffled = code.targets.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in (1..shuffled.len()).rev() {
        shuffled.swap(i, rng.random_range(0..=i));
    }
    let null = train_probe(&code.batch, &shuffled, &config).unwrap();
    let null_targets: Vec<f64> = test.iter().map(|&r| shuffled[r]).collect();
    let null_r2 = evaluate_probe(&null.model, &held_out, &null_targets).unwrap().r2;

    let mut worst_gap = 0.0f64;
    for (dim, seed) in [(8, 10), (32, 11), (64, 12)] {
        let c = gen_linear_code(5000, dim, 0.05, seed).unwrap();
        let t = train_probe(&c.batch, &c.targets, &config).unwrap();
        let ls = t.least_squares_mse.expect("dim <= 64 computes least squares");
        worst_gap = worst_gap.max(t.train_mse / ls - 1.0);
    }
    check(
        r2 >= 0.999 && null_r2 <= 0.05 && worst_gap <= 0.01,
        format!("held-out R2 {r2:.5}, shuffled R2 {null_r2:.4}, Adam/LS MSE excess {:.3}%", worst_gap * 100.0),
        format!("held-out R2 {r2:.5}, shuffled R2 {null_r2:.4}, Adam/LS excess {:.3}%", worst_gap * 100.0),
    )
}

fn mds() -> Outcome {
    let square = distance_matrix(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]);
    let sq_stress = mds_embed(&square, MdsConfig::default()).unwrap().stress;

    let mut non_monotone = 0;
    for seed in 0..100 {
        let d = random_dissimilarity(15, 100 + seed);
        let r = mds_embed(&d, MdsConfig::default()).unwrap();
        if r.stress_history.windows(2).any(|w| w[1] > w[0]) {
            non_monotone += 1;
        }
    }

    let d = random_dissimilarity(50, 77);
    let config = MdsConfig::default();
    let start = classical_mds(&d, config.dims).unwrap();
    let ours = smacof_from(&d, start.clone(), config).unwrap();
    let (oracle_coords, oracle_stress) = oracle_smacof(&d, &start, config.tol, config.max_iter);
    let gap = (ours.stress - oracle_stress).abs();
    let recomputed = (kruskal_stress(&d, &oracle_coords) - oracle_stress).abs();
    check(
        sq_stress <= 1e-6 && non_monotone == 0 && gap <= 1e-4 && recomputed < 1e-12,
        format!(
            "square stress {sq_stress:.1e}; monotone on 100 instances; oracle gap {gap:.1e} ({} iterations)",
            ours.iterations
        ),
        format!("square stress {sq_stress:.1e}; {non_monotone} non-monotone; oracle gap {gap:.1e}"),
    )
}

fn end_to_end() -> Outcome {
    let judge = |r: &JudgeRequest<'_>| -> Result<String, JudgeError> {
        Ok(format!("{:.6}", (-d_ref(r.pair.0, r.pair.1, 2025)).exp()))
    };
    let pairs = PairSet::enumerate(YearRange::new(1525, 1624).unwrap(), PairMode::Full);
    let mut config = ExperimentConfig::new("mock-judge", Condition::Year);
    config.backoff_base_ms = 0;
    let start = Instant::now();
    let full = collect_matrix(&config, &pairs, &judge, &CollectOptions::default()).unwrap();
    let elapsed = start.elapsed();

    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("run.ckpt");
    let first = collect_matrix(
        &config,
        &pairs,
        &judge,
        &CollectOptions {
            checkpoint: Some(ck.clone()),
            max_pairs: Some(3_333),
            ..Default::default()
        },
    )
    .unwrap();
    let resumed = collect_matrix(
        &config,
        &pairs,
        &judge,
        &CollectOptions {
            checkpoint: Some(ck),
            ..Default::default()
        },
    )
    .unwrap();
    let same = full.matrix.digest() == resumed.matrix.digest();
    check(
        full.complete
            && full.matrix.grid().missing_count() == 0
            && !first.complete
            && resumed.complete
            && resumed.stats.resumed == 3_333
            && same
            && elapsed < Duration::from_secs(60),
        format!(
            "10000 pairs in {elapsed:.2?}, zero missing; resumed digest matches {}",
            &full.matrix.digest()[..12]
        ),
        format!(
            "complete {} / resumed complete {} / digests equal {same} / {elapsed:.2?}",
            full.complete, resumed.complete
        ),
    )
}

fn main() {
    // keep the log-offset helper honest against the direct expression
    assert_eq!(log_offset(2025, 2025), 0.0);
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("metric oracles", metric_oracles),
        ("OLS vs normal equations", ols_oracle),
        ("paired-t and BH oracles", statistics_oracles),
        ("planted-neuron recovery", planted_neurons),
        ("log-coding fit", log_coding),
        ("reference recovery", reference_recovery),
        ("model selection", model_selection),
        ("probe sanity", probes),
        ("MDS", mds),
        ("end-to-end determinism", end_to_end),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail} ({secs:.1}s)", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {detail} ({secs:.1}s)", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
