//! Rating providers: anything that turns a prompt into reply text.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeRequest<'a> {
    pub pair: (i32, i32),
    pub prompt: &'a str,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum JudgeError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

pub trait Judge: Sync {
    fn complete(&self, request: &JudgeRequest<'_>) -> Result<String, JudgeError>;
}

impl<F> Judge for F
where
    F: Fn(&JudgeRequest<'_>) -> Result<String, JudgeError> + Sync,
{
    fn complete(&self, request: &JudgeRequest<'_>) -> Result<String, JudgeError> {
        self(request)
    }
}

pub const API_KEY_ENV: &str = "YEARSENSE_API_KEY";

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

pub(crate) fn post_json(
    agent: &ureq::Agent,
    url: &str,
    api_key: Option<&str>,
    body: &serde_json::Value,
) -> Result<serde_json::Value, JudgeError> {
    let mut req = agent.post(url).header("Content-Type", "application/json");
    if let Some(key) = api_key {
        req = req.header("Authorization", &format!("Bearer {key}"));
    }
    let mut resp = req
        .send_json(body)
        .map_err(|e| JudgeError::Transport(e.to_string()))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| JudgeError::Transport(e.to_string()))?;
    if !(200..300).contains(&status) {
        let body: String = text.chars().take(200).collect();
        return Err(JudgeError::Status { status, body });
    }
    serde_json::from_str(&text).map_err(|e| JudgeError::Malformed(e.to_string()))
}

/// OpenAI-compatible `POST {endpoint}/chat/completions`, one user message,
/// temperature 0.
pub struct HttpJudge {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl HttpJudge {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, temperature: f64) -> Self {
        Self {
            agent: agent(Duration::from_secs(60)),
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            model: model.to_string(),
            api_key,
            temperature,
        }
    }
}

impl Judge for HttpJudge {
    fn complete(&self, request: &JudgeRequest<'_>) -> Result<String, JudgeError> {
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let value = post_json(&self.agent, &self.url, self.api_key.as_deref(), &body)?;
        let parsed: ChatResponse =
            serde_json::from_value(value).map_err(|e| JudgeError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| JudgeError::Malformed("no message content".into()))
    }
}
