//! Transports: live OpenAI-compatible HTTP and a scripted offline mock.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{ChatRequest, Role};
use crate::jsonl::read_jsonl;

/// Raw completion payload returned by a transport, before cache metadata.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TransportResponse {
    pub text: String,
    pub token_logprobs: Option<Vec<(String, f64)>>,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

pub trait Transport: Send + Sync {
    /// Perform one completion. `key` is the request's cache key, which the
    /// mock transport uses for exact-match lookup.
    fn send(&self, req: &ChatRequest, key: &str) -> Result<TransportResponse>;

    /// Stable description for run manifests (never contains credentials).
    fn describe(&self) -> String;
}

/// Environment variable holding the API credential for the live transport.
pub const API_KEY_ENV: &str = "PREFJUDGE_API_KEY";
/// Environment variable holding the chat-completions base URL.
pub const BASE_URL_ENV: &str = "PREFJUDGE_BASE_URL";

/// Live transport speaking the OpenAI-compatible chat-completions schema.
pub struct HttpTransport {
    base_url: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    /// Build from `PREFJUDGE_BASE_URL` and `PREFJUDGE_API_KEY`.
    pub fn from_env() -> Result<Self> {
        let base_url = std::env::var(BASE_URL_ENV)
            .map_err(|_| Error::InvalidConfig(format!("{BASE_URL_ENV} not set")))?;
        let api_key = std::env::var(API_KEY_ENV)
            .map_err(|_| Error::InvalidConfig(format!("{API_KEY_ENV} not set")))?;
        Ok(Self::new(base_url, api_key))
    }

    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        HttpTransport {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            client: reqwest::blocking::Client::new(),
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    logprobs: bool,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireChoiceMessage,
    #[serde(default)]
    logprobs: Option<WireLogprobs>,
}

#[derive(Deserialize)]
struct WireChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireLogprobs {
    #[serde(default)]
    content: Option<Vec<WireTokenLogprob>>,
}

#[derive(Deserialize)]
struct WireTokenLogprob {
    token: String,
    logprob: f64,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl Transport for HttpTransport {
    fn send(&self, req: &ChatRequest, _key: &str) -> Result<TransportResponse> {
        let body = WireRequest {
            model: &req.model_id,
            messages: req
                .messages
                .iter()
                .map(|m| WireMessage {
                    role: match m.role {
                        Role::System => "system",
                        Role::User => "user",
                        Role::Assistant => "assistant",
                    },
                    content: &m.text,
                })
                .collect(),
            temperature: req.temperature,
            max_tokens: req.max_tokens,
            logprobs: req.want_logprobs,
        };
        let response = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(Error::ProviderRefusal(format!("{status}: {text}")));
        }
        let wire: WireResponse = response.json()?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Error::ProviderRefusal("response carried no choices".into()))?;
        let token_logprobs = choice
            .logprobs
            .and_then(|lp| lp.content)
            .map(|toks| toks.into_iter().map(|t| (t.token, t.logprob)).collect());
        let usage = wire.usage.unwrap_or(WireUsage {
            prompt_tokens: 0,
            completion_tokens: 0,
        });
        Ok(TransportResponse {
            text: choice.message.content.unwrap_or_default(),
            token_logprobs,
            input_tokens: usage.prompt_tokens,
            output_tokens: usage.completion_tokens,
        })
    }

    fn describe(&self) -> String {
        format!("live:{}", self.base_url)
    }
}

/// How a mock rule decides whether it applies to a request.
#[derive(Debug, Clone)]
pub enum MockMatcher {
    /// Exact match on the request's cache key.
    Key(String),
    /// Substring match against the concatenated message texts.
    Contains(String),
    /// Matches anything.
    Default,
}

#[derive(Debug, Clone)]
pub struct MockRule {
    pub matcher: MockMatcher,
    pub response: TransportResponse,
    /// Fail with a (retryable) transport error this many times before
    /// returning the response.
    pub fail_times: u32,
    /// Expire the rule after this many successful uses.
    pub times: Option<u32>,
}

impl MockRule {
    pub fn text(matcher: MockMatcher, text: impl Into<String>) -> Self {
        let text = text.into();
        let output_tokens = (text.len() as u64) / 4 + 1;
        MockRule {
            matcher,
            response: TransportResponse {
                text,
                token_logprobs: None,
                input_tokens: 0,
                output_tokens,
            },
            fail_times: 0,
            times: None,
        }
    }

    pub fn with_logprobs(mut self, token_logprobs: Vec<(String, f64)>) -> Self {
        self.response.token_logprobs = Some(token_logprobs);
        self
    }

    pub fn once(mut self) -> Self {
        self.times = Some(1);
        self
    }

    pub fn failing(mut self, times: u32) -> Self {
        self.fail_times = times;
        self
    }
}

#[derive(Default)]
struct MockState {
    hits: Vec<u32>,
    failures_served: Vec<u32>,
    calls: u64,
}

/// Offline transport answering from an ordered rule list.
///
/// The first live rule whose matcher applies wins. Misses report the request
/// key so fixture files can be extended.
pub struct MockTransport {
    rules: Vec<MockRule>,
    state: Mutex<MockState>,
    label: String,
}

/// On-disk form of one mock script line.
#[derive(Debug, Deserialize)]
struct MockScriptLine {
    #[serde(default)]
    key: Option<String>,
    #[serde(default)]
    contains: Option<String>,
    #[serde(default)]
    default: bool,
    text: String,
    #[serde(default)]
    token_logprobs: Option<Vec<(String, f64)>>,
    #[serde(default)]
    input_tokens: Option<u64>,
    #[serde(default)]
    output_tokens: Option<u64>,
    #[serde(default)]
    fail_times: u32,
    #[serde(default)]
    times: Option<u32>,
}

/// Serializable form for writing fixture scripts from test or tool code.
#[derive(Debug, Clone, Serialize)]
pub struct MockScriptEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub default: bool,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<(String, f64)>>,
}

impl MockScriptEntry {
    pub fn keyed(key: impl Into<String>, text: impl Into<String>) -> Self {
        MockScriptEntry {
            key: Some(key.into()),
            contains: None,
            default: false,
            text: text.into(),
            token_logprobs: None,
        }
    }

    pub fn with_logprobs(mut self, token_logprobs: Vec<(String, f64)>) -> Self {
        self.token_logprobs = Some(token_logprobs);
        self
    }
}

impl MockTransport {
    pub fn new(rules: Vec<MockRule>) -> Self {
        let n = rules.len();
        MockTransport {
            rules,
            state: Mutex::new(MockState {
                hits: vec![0; n],
                failures_served: vec![0; n],
                calls: 0,
            }),
            label: "mock:inline".to_string(),
        }
    }

    /// Load a JSONL script file; one rule per line, evaluated in file order.
    pub fn from_script(path: &Path) -> Result<Self> {
        let lines: Vec<MockScriptLine> = read_jsonl(path)?;
        let rules = lines
            .into_iter()
            .map(|line| {
                let matcher = if let Some(key) = line.key {
                    MockMatcher::Key(key)
                } else if let Some(sub) = line.contains {
                    MockMatcher::Contains(sub)
                } else if line.default {
                    MockMatcher::Default
                } else {
                    return Err(Error::InvalidConfig(
                        "mock rule needs `key`, `contains`, or `default`".into(),
                    ));
                };
                let output_tokens = line
                    .output_tokens
                    .unwrap_or((line.text.len() as u64) / 4 + 1);
                Ok(MockRule {
                    matcher,
                    response: TransportResponse {
                        text: line.text,
                        token_logprobs: line.token_logprobs,
                        input_tokens: line.input_tokens.unwrap_or(0),
                        output_tokens,
                    },
                    fail_times: line.fail_times,
                    times: line.times,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut mock = MockTransport::new(rules);
        mock.label = format!("mock:{}", path.display());
        Ok(mock)
    }

    /// Total number of `send` calls served (including scripted failures).
    pub fn calls(&self) -> u64 {
        self.state.lock().unwrap().calls
    }
}

impl Transport for MockTransport {
    fn send(&self, req: &ChatRequest, key: &str) -> Result<TransportResponse> {
        let rendered: String = req
            .messages
            .iter()
            .map(|m| m.text.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let mut state = self.state.lock().unwrap();
        state.calls += 1;
        for (idx, rule) in self.rules.iter().enumerate() {
            if let Some(limit) = rule.times {
                if state.hits[idx] >= limit {
                    continue;
                }
            }
            let matches = match &rule.matcher {
                MockMatcher::Key(k) => k == key,
                MockMatcher::Contains(sub) => rendered.contains(sub.as_str()),
                MockMatcher::Default => true,
            };
            if !matches {
                continue;
            }
            if state.failures_served[idx] < rule.fail_times {
                state.failures_served[idx] += 1;
                return Err(Error::TransportFailure("scripted transport failure".into()));
            }
            state.hits[idx] += 1;
            let mut response = rule.response.clone();
            if response.input_tokens == 0 {
                response.input_tokens = (rendered.len() as u64) / 4;
            }
            return Ok(response);
        }
        Err(Error::MockMiss {
            request_key: key.to_string(),
        })
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}
