use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use yearsense::synthkit::mock_embedding;
use yearsense::{d_ref, Condition, PairMode, PairSet, StimulusTemplate, YearRange};
use yearsense_collect::{
    collect_matrix, embed_collect, CollectOptions, EmbedOptions, ExperimentConfig, HttpEmbedder, HttpJudge,
    Judge, JudgeError, JudgeRequest, ResponseCache,
};

fn config() -> ExperimentConfig {
    let mut c = ExperimentConfig::new("mock", Condition::Year);
    c.backoff_base_ms = 0;
    c.max_in_flight = 4;
    c
}

fn ref_judge(r: &JudgeRequest<'_>) -> Result<String, JudgeError> {
    Ok(format!("{:.6}", (-d_ref(r.pair.0, r.pair.1, 2025)).exp()))
}

fn pairs(start: i32, end: i32) -> PairSet {
    PairSet::enumerate(YearRange::new(start, end).unwrap(), PairMode::Full)
}

#[test]
fn mock_judge_fills_every_cell() {
    let p = pairs(1525, 1554);
    let out = collect_matrix(&config(), &p, &ref_judge, &CollectOptions::default()).unwrap();
    assert!(out.complete);
    assert_eq!(out.matrix.grid().missing_count(), 0);
    assert_eq!(out.stats.finished, 900);
    let expect = (-d_ref(1530, 1540, 2025)).exp();
    assert!((out.matrix.get(1530, 1540).unwrap() - expect).abs() < 1e-6);
}

#[test]
fn failing_judge_gives_all_missing() {
    let fail = |_: &JudgeRequest<'_>| -> Result<String, JudgeError> { Err(JudgeError::Transport("down".into())) };
    let mut c = config();
    c.retry_budget = 2;
    let p = pairs(2000, 2004);
    let out = collect_matrix(&c, &p, &fail, &CollectOptions::default()).unwrap();
    assert!(out.complete);
    assert_eq!(out.matrix.grid().missing_count(), 25);
    assert_eq!(out.stats.judge_calls, 25 * 3);
    assert!(out.records.iter().all(|r| r.failure.as_deref() == Some("transport: down")));
}

#[test]
fn out_of_range_reply_is_missing_not_clamped() {
    let judge = |r: &JudgeRequest<'_>| -> Result<String, JudgeError> {
        Ok(if r.pair.0 == r.pair.1 { "1".into() } else { "about 12".into() })
    };
    let mut c = config();
    c.retry_budget = 0;
    let out = collect_matrix(&c, &pairs(2000, 2002), &judge, &CollectOptions::default()).unwrap();
    assert_eq!(out.matrix.get(2000, 2000), Some(1.0));
    assert_eq!(out.matrix.get(2000, 2001), None);
    assert_eq!(out.records[1].raw.as_deref(), Some("about 12"));
}

#[test]
fn result_independent_of_parallelism() {
    let p = pairs(1990, 2030);
    let mut digests = Vec::new();
    for workers in [1, 3, 16] {
        let mut c = config();
        c.max_in_flight = workers;
        let out = collect_matrix(&c, &p, &ref_judge, &CollectOptions::default()).unwrap();
        digests.push(out.matrix.digest());
    }
    assert!(digests.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn resume_never_repeats_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("run.ckpt");
    let p = pairs(2000, 2019);
    let seen = Mutex::new(Vec::new());
    let judge = |r: &JudgeRequest<'_>| -> Result<String, JudgeError> {
        seen.lock().unwrap().push(r.pair);
        ref_judge(r)
    };
    let opts = CollectOptions {
        checkpoint: Some(ck.clone()),
        max_pairs: Some(150),
        ..Default::default()
    };
    let first = collect_matrix(&config(), &p, &judge, &opts).unwrap();
    assert!(!first.complete);
    assert_eq!(first.stats.finished, 150);

    let cancel = AtomicBool::new(false);
    let count = AtomicUsize::new(0);
    let cancelling = |r: &JudgeRequest<'_>| -> Result<String, JudgeError> {
        if count.fetch_add(1, Ordering::SeqCst) >= 60 {
            cancel.store(true, Ordering::SeqCst);
        }
        judge(r)
    };
    let opts = CollectOptions {
        checkpoint: Some(ck.clone()),
        cancel: Some(&cancel),
        max_pairs: None,
    };
    let second = collect_matrix(&config(), &p, &cancelling, &opts).unwrap();
    assert!(!second.complete);
    assert_eq!(second.stats.resumed, 150);

    let opts = CollectOptions {
        checkpoint: Some(ck.clone()),
        ..Default::default()
    };
    let third = collect_matrix(&config(), &p, &judge, &opts).unwrap();
    assert!(third.complete);

    let mut calls = seen.into_inner().unwrap();
    assert_eq!(calls.len(), 400);
    calls.sort_unstable();
    calls.dedup();
    assert_eq!(calls.len(), 400);

    let fresh = collect_matrix(&config(), &p, &ref_judge, &CollectOptions::default()).unwrap();
    assert_eq!(third.matrix.digest(), fresh.matrix.digest());
    assert_eq!(third.matrix.to_csv_string(), fresh.matrix.to_csv_string());
}

#[test]
fn resume_refuses_other_config() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("run.ckpt");
    let p = pairs(2000, 2003);
    let opts = CollectOptions {
        checkpoint: Some(ck),
        ..Default::default()
    };
    collect_matrix(&config(), &p, &ref_judge, &opts).unwrap();
    let mut other = config();
    other.template = "{A} vs {B}".into();
    assert!(matches!(
        collect_matrix(&other, &p, &ref_judge, &opts),
        Err(yearsense::Error::Config(_))
    ));
}

#[test]
fn cache_short_circuits_calls() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config();
    c.cache_path = Some(dir.path().join("cache.jsonl"));
    let p = pairs(2000, 2009);
    let calls = AtomicUsize::new(0);
    let judge = |r: &JudgeRequest<'_>| -> Result<String, JudgeError> {
        calls.fetch_add(1, Ordering::SeqCst);
        ref_judge(r)
    };
    let a = collect_matrix(&c, &p, &judge, &CollectOptions::default()).unwrap();
    let b = collect_matrix(&c, &p, &judge, &CollectOptions::default()).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 100);
    assert_eq!(b.stats.cache_hits, 100);
    assert_eq!(a.matrix, b.matrix);
}

#[test]
fn rejects_nonzero_temperature() {
    let mut c = config();
    c.temperature = 1.0;
    assert!(collect_matrix(&c, &pairs(2000, 2001), &ref_judge, &CollectOptions::default()).is_err());
}

/// Serves `n` HTTP requests, replying with `body(request_body)`; returns the
/// base URL and the collected request bodies.
fn serve(n: usize, body: fn(&str) -> (u16, String)) -> (String, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for stream in listener.incoming().take(n) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0u8; len];
            reader.read_exact(&mut buf).unwrap();
            let req = String::from_utf8(buf).unwrap();
            let (status, reply) = body(&req);
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
            seen.push(req);
        }
        seen
    });
    (url, handle)
}

#[test]
fn http_judge_speaks_chat_completions() {
    let (url, handle) = serve(2, |_| {
        (200, r#"{"choices":[{"message":{"role":"assistant","content":"0.42"}}]}"#.to_string())
    });
    let judge = HttpJudge::new(&url, "m-1", Some("secret".into()), 0.0);
    let prompt = "how similar?";
    for _ in 0..2 {
        let reply = judge.complete(&JudgeRequest { pair: (1, 2), prompt }).unwrap();
        assert_eq!(reply, "0.42");
    }
    let bodies = handle.join().unwrap();
    let v: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(v["model"], "m-1");
    assert_eq!(v["temperature"], 0.0);
    assert_eq!(v["messages"][0]["content"], prompt);
}

#[test]
fn http_errors_surface_as_status() {
    let (url, handle) = serve(1, |_| (503, "{}".to_string()));
    let judge = HttpJudge::new(&url, "m", None, 0.0);
    let err = judge.complete(&JudgeRequest { pair: (1, 2), prompt: "x" }).unwrap_err();
    assert!(matches!(err, JudgeError::Status { status: 503, .. }));
    handle.join().unwrap();
}

#[test]
fn http_embedder_reads_vectors() {
    let (url, handle) = serve(1, |_| (200, r#"{"data":[{"embedding":[0.5,-1.0,2.0]}]}"#.to_string()));
    let e = HttpEmbedder::new(&url, "emb", None);
    use yearsense_collect::EmbeddingProvider;
    assert_eq!(e.embed("Year: 1-9-9-9").unwrap(), vec![0.5, -1.0, 2.0]);
    let bodies = handle.join().unwrap();
    assert!(bodies[0].contains("1-9-9-9"));
}

#[test]
fn embed_collect_with_cache_and_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path().join("emb.jsonl")).unwrap();
    let range = YearRange::new(2015, 2035).unwrap();
    let calls = AtomicUsize::new(0);
    let provider = |text: &str| -> Result<Vec<f64>, JudgeError> {
        calls.fetch_add(1, Ordering::SeqCst);
        let digits: String = text.chars().filter(char::is_ascii_digit).collect();
        Ok(mock_embedding(digits.parse().unwrap(), 2025, 0.5))
    };
    let opts = EmbedOptions {
        retry_budget: 1,
        backoff_base_ms: 0,
    };
    let template = StimulusTemplate::default();
    let set = embed_collect(&provider, "emb", range, &template, Some(&cache), &opts).unwrap();
    assert_eq!(set.vectors.len(), 21);
    assert_eq!(set.vectors[10], mock_embedding(2025, 2025, 0.5));
    let again = embed_collect(&provider, "emb", range, &template, Some(&cache), &opts).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 21);
    assert_eq!(set, again);

    let broken = |_: &str| -> Result<Vec<f64>, JudgeError> { Err(JudgeError::Transport("nope".into())) };
    assert!(embed_collect(&broken, "emb", range, &template, None, &opts).is_err());
}
