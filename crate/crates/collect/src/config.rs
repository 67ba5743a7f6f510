use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use yearsense::{Condition, Error, PairSet, Result};

use crate::prompt::{check_template, DEFAULT_TEMPLATE};

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Base URL of an OpenAI-compatible API, without `/chat/completions`.
    pub endpoint: String,
    pub model: String,
    pub condition: Condition,
    pub template: String,
    pub temperature: f64,
    pub max_in_flight: usize,
    pub retry_budget: u32,
    pub cache_path: Option<PathBuf>,
    /// First retry delay; doubles on each further attempt.
    pub backoff_base_ms: u64,
}

impl ExperimentConfig {
    pub fn new(model: impl Into<String>, condition: Condition) -> Self {
        Self {
            endpoint: DEFAULT_ENDPOINT.into(),
            model: model.into(),
            condition,
            template: DEFAULT_TEMPLATE.into(),
            temperature: 0.0,
            max_in_flight: 8,
            retry_budget: 3,
            cache_path: None,
            backoff_base_ms: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature != 0.0 {
            return Err(Error::Config(format!(
                "decoding temperature must be 0, got {}",
                self.temperature
            )));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max in-flight requests must be at least 1".into()));
        }
        if self.model.is_empty() {
            return Err(Error::Config("model id is empty".into()));
        }
        check_template(&self.template)
    }

    /// Hex SHA-256 over everything that determines the matrix contents:
    /// model, condition, template, temperature and the pair set. Parallelism,
    /// retries and cache location do not enter.
    pub fn digest(&self, pairs: &PairSet) -> String {
        let mut h = Sha256::new();
        for part in [
            self.model.as_str(),
            self.condition.as_str(),
            self.template.as_str(),
            &self.temperature.to_string(),
            &pairs.range().to_string(),
            match pairs.mode() {
                yearsense::PairMode::Full => "full",
                yearsense::PairMode::Upper => "upper",
            },
        ] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use yearsense::{PairMode, YearRange};

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::new("m", Condition::Year);
        assert!(c.validate().is_ok());
        c.temperature = 0.7;
        assert!(c.validate().is_err());
        c.temperature = 0.0;
        c.max_in_flight = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn digest_ignores_parallelism() {
        let pairs = PairSet::enumerate(YearRange::new(2000, 2004).unwrap(), PairMode::Full);
        let a = ExperimentConfig::new("m", Condition::Year);
        let mut b = a.clone();
        b.max_in_flight = 64;
        b.retry_budget = 0;
        assert_eq!(a.digest(&pairs), b.digest(&pairs));
        b.condition = Condition::Number;
        assert_ne!(a.digest(&pairs), b.digest(&pairs));
        let upper = PairSet::enumerate(pairs.range(), PairMode::Upper);
        assert_ne!(a.digest(&pairs), a.digest(&upper));
    }
}
