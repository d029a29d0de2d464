//! Language-model clients: an OpenAI-compatible HTTP client in completion or
//! chat style, and a scripted mock.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Duration;

use dcc_core::prompt::LlmParams;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    /// Transport failures, timeouts, rate limits and server errors.
    #[error("retryable: {0}")]
    Retryable(String),
    #[error("fatal: {0}")]
    Fatal(String),
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Retryable(_))
    }
}

/// Stateless per request; implementations may be called from many threads.
pub trait LlmClient: Send + Sync {
    fn generate(&self, prompt: &str, params: &LlmParams) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiStyle {
    #[default]
    Completion,
    Chat,
}

fn default_key_env() -> Option<String> {
    Some("DCC_LLM_API_KEY".into())
}
fn default_request_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// Full URL, e.g. `http://localhost:8000/v1/completions`.
    pub url: String,
    pub model: String,
    #[serde(default)]
    pub style: ApiStyle,
    /// Environment variable holding a bearer token.
    #[serde(default = "default_key_env")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_request_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

pub struct HttpClient {
    config: EndpointConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(config: EndpointConfig) -> Self {
        let api_key = config.api_key_env.as_deref().and_then(|var| std::env::var(var).ok());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self { config, api_key, agent }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn request_body(&self, prompt: &str, params: &LlmParams) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_new_tokens,
            "repetition_penalty": params.repetition_penalty,
        });
        match self.config.style {
            ApiStyle::Completion => body["prompt"] = json!(prompt),
            ApiStyle::Chat => body["messages"] = json!([{ "role": "user", "content": prompt }]),
        }
        body
    }
}

/// Completion text from a response body of either style.
pub fn completion_text(style: ApiStyle, response: &Value) -> Result<String, LlmError> {
    let choice = response
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| LlmError::Fatal(format!("response without choices: {response}")))?;
    let text = match style {
        ApiStyle::Completion => choice.get("text"),
        ApiStyle::Chat => choice.get("message").and_then(|m| m.get("content")),
    };
    text.and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| LlmError::Fatal(format!("response without completion text: {choice}")))
}

impl LlmClient for HttpClient {
    fn generate(&self, prompt: &str, params: &LlmParams) -> Result<String, LlmError> {
        let mut request = self.agent.post(&self.config.url).header("content-type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("authorization", format!("Bearer {key}"));
        }
        let mut response = request.send_json(self.request_body(prompt, params)).map_err(classify)?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(LlmError::Retryable(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(LlmError::Fatal(format!("HTTP {status}")));
        }
        let body: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Fatal(format!("malformed response: {e}")))?;
        completion_text(self.config.style, &body)
    }
}

fn classify(e: ureq::Error) -> LlmError {
    match e {
        ureq::Error::StatusCode(code) if code == 429 || code >= 500 => LlmError::Retryable(format!("HTTP {code}")),
        ureq::Error::StatusCode(code) => LlmError::Fatal(format!("HTTP {code}")),
        ureq::Error::Io(_) | ureq::Error::Timeout(_) | ureq::Error::HostNotFound | ureq::Error::ConnectionFailed => {
            LlmError::Retryable(e.to_string())
        }
        other => LlmError::Fatal(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay_ms: 500, max_delay_ms: 30_000 }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self { max_attempts: 1, ..Self::default() }
    }

    /// Delay before retry number `attempt` (1-based): doubling from the base.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(20);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

/// Calls `client` until it succeeds, fails fatally or runs out of attempts.
pub fn generate_with_retry(
    client: &dyn LlmClient,
    prompt: &str,
    params: &LlmParams,
    policy: &RetryPolicy,
) -> Result<String, LlmError> {
    let mut attempt = 1;
    loop {
        match client.generate(prompt, params) {
            Err(e) if e.is_retryable() && attempt < policy.max_attempts => {
                thread::sleep(policy.delay(attempt));
                attempt += 1;
            }
            other => return other,
        }
    }
}

/// Returns scripted completions in order, then empty completions.
#[derive(Debug, Default)]
pub struct MockClient {
    script: Vec<String>,
    next: AtomicUsize,
}

impl MockClient {
    pub fn new(script: Vec<String>) -> Self {
        Self { script, next: AtomicUsize::new(0) }
    }

    /// Reads a JSON array of completion strings.
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let script: Vec<String> = serde_json::from_str(&text)
            .map_err(|e| anyhow::anyhow!("{}: expected a JSON array of strings: {e}", path.display()))?;
        Ok(Self::new(script))
    }

    /// Skips the first `consumed` entries, as after a resume.
    pub fn skip(&self, consumed: usize) {
        self.next.store(consumed, Ordering::SeqCst);
    }

    pub fn consumed(&self) -> usize {
        self.next.load(Ordering::SeqCst)
    }
}

impl LlmClient for MockClient {
    fn generate(&self, _prompt: &str, _params: &LlmParams) -> Result<String, LlmError> {
        let i = self.next.fetch_add(1, Ordering::SeqCst);
        Ok(self.script.get(i).cloned().unwrap_or_default())
    }
}

impl<C: LlmClient + ?Sized> LlmClient for std::sync::Arc<C> {
    fn generate(&self, prompt: &str, params: &LlmParams) -> Result<String, LlmError> {
        (**self).generate(prompt, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    struct Flaky {
        failures: Mutex<Vec<LlmError>>,
    }

    impl LlmClient for Flaky {
        fn generate(&self, _: &str, _: &LlmParams) -> Result<String, LlmError> {
            match self.failures.lock().unwrap().pop() {
                Some(e) => Err(e),
                None => Ok("    return 1\n".into()),
            }
        }
    }

    fn quick() -> RetryPolicy {
        RetryPolicy { max_attempts: 3, base_delay_ms: 1, max_delay_ms: 2 }
    }

    #[test]
    fn retries_only_retryable_errors() {
        let p = LlmParams::default();
        let flaky = Flaky { failures: Mutex::new(vec![LlmError::Retryable("a".into()), LlmError::Retryable("b".into())]) };
        assert_eq!(generate_with_retry(&flaky, "x", &p, &quick()).unwrap(), "    return 1\n");
        let fatal = Flaky { failures: Mutex::new(vec![LlmError::Retryable("a".into()), LlmError::Fatal("bad".into())]) };
        assert_eq!(generate_with_retry(&fatal, "x", &p, &quick()), Err(LlmError::Fatal("bad".into())));
        let down = Flaky { failures: Mutex::new(vec![LlmError::Retryable("c".into()); 3]) };
        assert!(generate_with_retry(&down, "x", &p, &quick()).unwrap_err().is_retryable());
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy { max_attempts: 10, base_delay_ms: 100, max_delay_ms: 1000 };
        let delays: Vec<u64> = (1..=6).map(|a| p.delay(a).as_millis() as u64).collect();
        assert_eq!(delays, [100, 200, 400, 800, 1000, 1000]);
    }

    #[test]
    fn response_shapes() {
        let completion = json!({"choices": [{"text": "    return 0.0\n"}]});
        assert_eq!(completion_text(ApiStyle::Completion, &completion).unwrap(), "    return 0.0\n");
        let chat = json!({"choices": [{"message": {"role": "assistant", "content": "hi"}}]});
        assert_eq!(completion_text(ApiStyle::Chat, &chat).unwrap(), "hi");
        assert!(!completion_text(ApiStyle::Chat, &completion).unwrap_err().is_retryable());
        assert!(completion_text(ApiStyle::Completion, &json!({"error": "x"})).is_err());
    }

    #[test]
    fn request_bodies() {
        let config = EndpointConfig {
            url: "http://localhost/v1/chat/completions".into(),
            model: "m".into(),
            style: ApiStyle::Chat,
            api_key_env: None,
            timeout_secs: 5,
            retry: RetryPolicy::default(),
        };
        let body = HttpClient::new(config).request_body("P", &LlmParams::default());
        assert_eq!(body["messages"][0]["content"], "P");
        assert_eq!(body["max_tokens"], 246);
        assert_eq!(body["temperature"], 0.94);
        assert!(body.get("prompt").is_none());
    }

    #[test]
    fn mock_script() {
        let mock = MockClient::new(vec!["a".into(), "b".into()]);
        let p = LlmParams::default();
        assert_eq!(mock.generate("", &p).unwrap(), "a");
        assert_eq!(mock.generate("", &p).unwrap(), "b");
        assert_eq!(mock.generate("", &p).unwrap(), "");
        mock.skip(1);
        assert_eq!(mock.generate("", &p).unwrap(), "b");
    }

    #[test]
    fn unreachable_endpoint_is_retryable() {
        let config = EndpointConfig {
            url: "http://127.0.0.1:9/v1/completions".into(),
            model: "m".into(),
            style: ApiStyle::Completion,
            api_key_env: None,
            timeout_secs: 5,
            retry: RetryPolicy::none(),
        };
        let err = HttpClient::new(config).generate("x", &LlmParams::default()).unwrap_err();
        assert!(err.is_retryable(), "{err}");
    }
}
