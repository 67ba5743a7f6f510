//! Year embeddings from an embedding endpoint.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;
use yearsense::embeddings::EmbeddingSet;
use yearsense::years::render_stimulus;
use yearsense::{Condition, Error, Result, StimulusTemplate, YearRange};

use crate::cache::{cache_key, ResponseCache};
use crate::judge::{agent, post_json, JudgeError};

pub trait EmbeddingProvider: Sync {
    fn embed(&self, text: &str) -> std::result::Result<Vec<f64>, JudgeError>;
}

impl<F> EmbeddingProvider for F
where
    F: Fn(&str) -> std::result::Result<Vec<f64>, JudgeError> + Sync,
{
    fn embed(&self, text: &str) -> std::result::Result<Vec<f64>, JudgeError> {
        self(text)
    }
}

/// OpenAI-compatible `POST {endpoint}/embeddings`.
pub struct HttpEmbedder {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>) -> Self {
        Self {
            agent: agent(Duration::from_secs(60)),
            url: format!("{}/embeddings", endpoint.trim_end_matches('/')),
            model: model.to_string(),
            api_key,
        }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn embed(&self, text: &str) -> std::result::Result<Vec<f64>, JudgeError> {
        let body = json!({"model": self.model, "input": text});
        let value = post_json(&self.agent, &self.url, self.api_key.as_deref(), &body)?;
        let parsed: EmbeddingResponse =
            serde_json::from_value(value).map_err(|e| JudgeError::Malformed(e.to_string()))?;
        parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| JudgeError::Malformed("empty embedding list".into()))
    }
}

#[derive(Debug, Clone)]
pub struct EmbedOptions {
    pub retry_budget: u32,
    pub backoff_base_ms: u64,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            retry_budget: 3,
            backoff_base_ms: 500,
        }
    }
}

/// One vector per year in `range`. Cached vectors are reused, so an
/// interrupted run resumes where it stopped. Any year that still fails after
/// the retry budget aborts the whole set.
pub fn embed_collect(
    provider: &dyn EmbeddingProvider,
    model: &str,
    range: YearRange,
    template: &StimulusTemplate,
    cache: Option<&ResponseCache>,
    options: &EmbedOptions,
) -> Result<EmbeddingSet> {
    let mut vectors = Vec::with_capacity(range.len());
    for year in range.years() {
        let text = render_stimulus(year, Condition::Year, template);
        let key = cache_key(model, &text, 0.0);
        if let Some(v) = cache
            .and_then(|c| c.get(&key))
            .and_then(|s| serde_json::from_str::<Vec<f64>>(&s).ok())
        {
            vectors.push(v);
            continue;
        }
        let mut last = None;
        let mut got = None;
        for attempt in 0..=options.retry_budget {
            if attempt > 0 && options.backoff_base_ms > 0 {
                let factor = 1u64 << (attempt - 1).min(16);
                std::thread::sleep(Duration::from_millis(options.backoff_base_ms.saturating_mul(factor)));
            }
            match provider.embed(&text) {
                Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => {
                    got = Some(v);
                    break;
                }
                Ok(_) => last = Some("empty or non-finite vector".to_string()),
                Err(e) => last = Some(e.to_string()),
            }
        }
        let v = got.ok_or_else(|| {
            Error::Data(format!(
                "embedding for {year} failed after {} attempts: {}",
                options.retry_budget + 1,
                last.unwrap_or_default()
            ))
        })?;
        if let Some(c) = cache {
            c.put(&key, &serde_json::to_string(&v).expect("vector serializes"))?;
        }
        vectors.push(v);
    }
    EmbeddingSet::new(model, template.clone(), range, vectors)
}
