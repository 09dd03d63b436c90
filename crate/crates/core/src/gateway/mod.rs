//! LLM gateway: prompt roles over interchangeable backends, with retries
//! and usage accounting.

mod http;
mod ledger;
mod mock;
mod prompt;

use std::sync::Mutex;
use std::time::Duration;

use serde::de::DeserializeOwned;
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig, API_KEY_ENV};
pub use ledger::{PriceTable, RoleUsage, UsageLedger};
pub use mock::{extract_block, MockBackend, MockRule, MockScriptError, RuleScope};
pub use prompt::{build_prompt, template_placeholders, Attribute, PromptContext, PromptRole, TEMPLATE_VERSION};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("prompt for {role} is missing the <{attribute}> attribute")]
    MissingAttribute { role: PromptRole, attribute: Attribute },
    #[error("prompt for {role} does not take the <{attribute}> attribute")]
    UnexpectedAttribute { role: PromptRole, attribute: Attribute },
    #[error("{role} call failed after {attempts} attempts: {last}")]
    Exhausted { role: PromptRole, attempts: u32, last: String },
    #[error("backend rejected the request: {0}")]
    Backend(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("token budget exceeded ({used} of {cap} tokens used)")]
    BudgetExceeded { used: u64, cap: u64 },
    #[error("{role} response never matched the expected structure: {detail}")]
    Unparseable { role: PromptRole, detail: String },
}

/// What a backend returns for one prompt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawCompletion {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Worth retrying: transport failures, throttling, server errors, garbled bodies.
    #[error("{0}")]
    Transient(String),
    #[error("{0}")]
    Auth(String),
    #[error("{0}")]
    Fatal(String),
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, role: PromptRole, prompt: &str) -> Result<RawCompletion, BackendError>;

    /// Whether retries should actually wait between attempts.
    fn wants_backoff(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LlmResponse {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << retry.min(16)).min(self.max_delay)
    }
}

/// Attempts allowed for a structured request: the original plus two
/// reprompts carrying the parse error.
pub const STRUCTURED_ATTEMPTS: u32 = 3;

pub struct Gateway {
    backend: Box<dyn LlmBackend>,
    ledger: Mutex<UsageLedger>,
    retry: RetryPolicy,
    token_cap: Option<u64>,
}

impl Gateway {
    pub fn new(backend: impl LlmBackend + 'static, prices: PriceTable) -> Self {
        Gateway {
            backend: Box::new(backend),
            ledger: Mutex::new(UsageLedger::new(prices)),
            retry: RetryPolicy::default(),
            token_cap: None,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Refuses further calls once the ledger holds `cap` tokens.
    pub fn with_token_cap(mut self, cap: u64) -> Self {
        self.token_cap = Some(cap);
        self
    }

    pub fn ledger_snapshot(&self) -> UsageLedger {
        self.ledger.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn prices(&self) -> PriceTable {
        self.ledger_snapshot().prices
    }

    pub fn complete(&self, ctx: &PromptContext) -> Result<LlmResponse, GatewayError> {
        let prompt = build_prompt(ctx)?;
        self.send(ctx.role, &prompt)
    }

    /// Completes `ctx` and decodes the first JSON object in the reply as `T`,
    /// checked by `validate`. A reply that fails either step is answered
    /// with a reprompt naming the problem.
    pub fn complete_structured<T, F>(&self, ctx: &PromptContext, validate: F) -> Result<T, GatewayError>
    where
        T: DeserializeOwned,
        F: Fn(&T) -> Result<(), String>,
    {
        let prompt = build_prompt(ctx)?;
        let mut request = prompt.clone();
        let mut detail = String::new();
        for _ in 0..STRUCTURED_ATTEMPTS {
            let response = self.send(ctx.role, &request)?;
            match decode::<T>(&response.content).and_then(|v| validate(&v).map(|_| v)) {
                Ok(value) => return Ok(value),
                Err(err) => {
                    detail = err;
                    request = format!(
                        "{prompt}\n\nYour previous reply could not be used: {detail}. \
                         Reply again with only the JSON object in the requested format."
                    );
                }
            }
        }
        Err(GatewayError::Unparseable { role: ctx.role, detail })
    }

    fn send(&self, role: PromptRole, prompt: &str) -> Result<LlmResponse, GatewayError> {
        if let Some(cap) = self.token_cap {
            let used = self.ledger_snapshot().total_tokens();
            if used >= cap {
                return Err(GatewayError::BudgetExceeded { used, cap });
            }
        }
        let mut attempt = 0;
        loop {
            match self.backend.complete(role, prompt) {
                Ok(raw) => {
                    self.ledger
                        .lock()
                        .unwrap_or_else(|p| p.into_inner())
                        .record(role, raw.prompt_tokens, raw.completion_tokens);
                    return Ok(LlmResponse {
                        content: raw.content,
                        prompt_tokens: raw.prompt_tokens,
                        completion_tokens: raw.completion_tokens,
                    });
                }
                Err(BackendError::Auth(msg)) => return Err(GatewayError::Auth(msg)),
                Err(BackendError::Fatal(msg)) => return Err(GatewayError::Backend(msg)),
                Err(BackendError::Transient(msg)) => {
                    if attempt >= self.retry.max_retries {
                        return Err(GatewayError::Exhausted { role, attempts: attempt + 1, last: msg });
                    }
                    if self.backend.wants_backoff() {
                        std::thread::sleep(self.retry.delay(attempt));
                    }
                    attempt += 1;
                }
            }
        }
    }
}

/// Decodes the outermost `{...}` span of `content`, tolerating prose or
/// code fences around it.
fn decode<T: DeserializeOwned>(content: &str) -> Result<T, String> {
    let start = content.find('{').ok_or("reply contains no JSON object")?;
    let end = content.rfind('}').filter(|&e| e > start).ok_or("reply contains no JSON object")?;
    serde_json::from_str(&content[start..=end]).map_err(|e| format!("invalid JSON reply: {e}"))
}
