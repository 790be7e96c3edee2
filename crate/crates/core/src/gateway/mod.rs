//! Provider-agnostic chat-completion gateway.
//!
//! Every model call in the pipeline goes through [`Gateway::complete`]:
//! requests are content-addressed, answered from the on-disk cache when
//! possible, retried with exponential backoff on transport failures, and
//! throttled by a bound on in-flight requests. Majority voting and
//! choice-token log-probability extraction live here because several stages
//! share them.

mod cache;
pub mod pricing;
pub mod transport;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::sha256_hex;

pub use cache::{CacheEntry, DiskCache};
pub use pricing::{estimate_cost, ModelPricing, PricingTable};
pub use transport::{
    HttpTransport, MockMatcher, MockRule, MockScriptEntry, MockTransport, Transport,
    TransportResponse,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
}

impl Message {
    pub fn system(text: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            text: text.into(),
        }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub want_logprobs: bool,
    /// Cache discriminator so otherwise-identical requests from different
    /// experiments do not collide.
    pub seed_tag: String,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<Message>) -> Self {
        ChatRequest {
            model_id: model_id.into(),
            messages,
            temperature: 0.0,
            max_tokens: 1024,
            want_logprobs: false,
            seed_tag: String::new(),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn with_logprobs(mut self) -> Self {
        self.want_logprobs = true;
        self
    }

    pub fn with_seed_tag(mut self, tag: impl Into<String>) -> Self {
        self.seed_tag = tag.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.messages.is_empty() {
            return Err(Error::InvalidConfig("request has no messages".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Content address of this request for the given vote index: SHA-256
    /// over (model_id, messages, temperature, max_tokens, seed_tag,
    /// vote_index).
    pub fn cache_key(&self, vote_index: u32) -> String {
        let mut parts: Vec<String> = vec![self.model_id.clone()];
        for m in &self.messages {
            parts.push(format!("{:?}", m.role));
            parts.push(m.text.clone());
        }
        parts.push(format!("{:?}", self.temperature));
        parts.push(self.max_tokens.to_string());
        parts.push(self.seed_tag.clone());
        parts.push(vote_index.to_string());
        let refs: Vec<&str> = parts.iter().map(|s| s.as_str()).collect();
        sha256_hex(&refs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub token_logprobs: Option<Vec<(String, f64)>>,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cached: bool,
    /// Set when logprobs were requested but the provider did not return any.
    pub logprobs_missing: bool,
}

/// Retry schedule for transport failures.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_secs(1),
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// Immediate retries for tests and offline mock runs.
    pub fn immediate(attempts: u32) -> Self {
        RetryPolicy {
            attempts,
            base_delay: Duration::ZERO,
            jitter: false,
        }
    }

    fn delay(&self, attempt: u32) -> Duration {
        let base = self.base_delay.as_millis() as u64 * (1u64 << attempt.min(16));
        if base == 0 {
            return Duration::ZERO;
        }
        let jittered = if self.jitter {
            rand::thread_rng().gen_range(base / 2..=base)
        } else {
            base
        };
        Duration::from_millis(jittered)
    }
}

/// Counting semaphore bounding in-flight transport calls.
struct InFlightLimit {
    available: Mutex<usize>,
    condvar: Condvar,
}

impl InFlightLimit {
    fn new(max: usize) -> Self {
        InFlightLimit {
            available: Mutex::new(max.max(1)),
            condvar: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut available = self.available.lock().unwrap();
        while *available == 0 {
            available = self.condvar.wait(available).unwrap();
        }
        *available -= 1;
        InFlightGuard { limit: self }
    }
}

struct InFlightGuard<'a> {
    limit: &'a InFlightLimit,
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut available = self.limit.available.lock().unwrap();
        *available += 1;
        self.limit.condvar.notify_one();
    }
}

/// Accumulated token usage per model, including cache replays, so repeated
/// runs report identical totals.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub calls: u64,
    pub cache_hits: u64,
}

pub struct Gateway {
    transport: Box<dyn Transport>,
    cache: Option<DiskCache>,
    retry: RetryPolicy,
    limit: InFlightLimit,
    usage: Mutex<BTreeMap<String, UsageTotals>>,
}

impl Gateway {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Gateway {
            transport,
            cache: None,
            retry: RetryPolicy::default(),
            limit: InFlightLimit::new(8),
            usage: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache = Some(DiskCache::new(dir));
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, max: usize) -> Self {
        self.limit = InFlightLimit::new(max);
        self
    }

    pub fn transport_label(&self) -> String {
        self.transport.describe()
    }

    /// Complete with vote index 0. Cache hits skip the transport entirely.
    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse> {
        self.complete_vote(req, 0)
    }

    /// Complete one independent vote. Distinct vote indices have distinct
    /// cache keys, which is what makes repeated votes independent replays.
    pub fn complete_vote(&self, req: &ChatRequest, vote_index: u32) -> Result<ChatResponse> {
        req.validate()?;
        let key = req.cache_key(vote_index);

        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(&key)? {
                return Ok(self.finish(req, entry.response, true));
            }
        }

        let mut last_error = String::new();
        for attempt in 0..self.retry.attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.delay(attempt - 1));
            }
            let outcome = {
                let _guard = self.limit.acquire();
                self.transport.send(req, &key)
            };
            match outcome {
                Ok(response) => {
                    if let Some(cache) = &self.cache {
                        cache.put(&key, &response)?;
                    }
                    return Ok(self.finish(req, response, false));
                }
                Err(Error::TransportFailure(msg)) => last_error = msg,
                Err(Error::Http(e)) => last_error = e.to_string(),
                Err(other) => return Err(other),
            }
        }
        Err(Error::TransportExhausted {
            attempts: self.retry.attempts,
            last_error,
        })
    }

    fn finish(&self, req: &ChatRequest, response: TransportResponse, cached: bool) -> ChatResponse {
        let logprobs_missing = req.want_logprobs && response.token_logprobs.is_none();
        if logprobs_missing {
            log::warn!(
                "model {} returned no logprobs although they were requested",
                req.model_id
            );
        }
        {
            let mut usage = self.usage.lock().unwrap();
            let totals = usage.entry(req.model_id.clone()).or_default();
            totals.input_tokens += response.input_tokens;
            totals.output_tokens += response.output_tokens;
            totals.calls += 1;
            if cached {
                totals.cache_hits += 1;
            }
        }
        ChatResponse {
            text: response.text,
            token_logprobs: response.token_logprobs,
            input_tokens: response.input_tokens,
            output_tokens: response.output_tokens,
            cached,
            logprobs_missing,
        }
    }

    /// Run `votes` independent completions and take the strict majority of
    /// the parseable ones. Returns the winner, the per-vote parses, and the
    /// raw responses (in vote order).
    pub fn complete_with_votes<V, F>(
        &self,
        req: &ChatRequest,
        votes: u32,
        parse: F,
    ) -> Result<(V, Vec<Option<V>>, Vec<ChatResponse>)>
    where
        V: Clone + Eq + std::hash::Hash,
        F: Fn(&str) -> Option<V>,
    {
        if votes < 1 {
            return Err(Error::InvalidConfig("votes must be >= 1".into()));
        }
        let mut parsed: Vec<Option<V>> = Vec::with_capacity(votes as usize);
        let mut responses = Vec::with_capacity(votes as usize);
        for vote_index in 0..votes {
            let response = self.complete_vote(req, vote_index)?;
            parsed.push(parse(&response.text));
            responses.push(response);
        }
        let winner = strict_majority(parsed.iter().flatten().cloned()).ok_or(Error::Abstained {
            votes: votes as usize,
            parseable: parsed.iter().flatten().count(),
        })?;
        Ok((winner, parsed, responses))
    }

    pub fn usage_totals(&self) -> BTreeMap<String, UsageTotals> {
        self.usage.lock().unwrap().clone()
    }
}

/// Winner holding strictly more than half of the votes, if any.
pub fn strict_majority<V: Clone + Eq + std::hash::Hash>(
    votes: impl Iterator<Item = V>,
) -> Option<V> {
    let mut counts: Vec<(V, usize)> = Vec::new();
    let mut total = 0usize;
    for vote in votes {
        total += 1;
        match counts.iter_mut().find(|(v, _)| *v == vote) {
            Some((_, n)) => *n += 1,
            None => counts.push((vote, 1)),
        }
    }
    counts
        .into_iter()
        .find(|(_, n)| 2 * n > total)
        .map(|(v, _)| v)
}

fn normalize_alnum(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(|c| c.to_lowercase())
        .collect()
}

/// Sum of the log-probabilities of the tokens that realize `choice_text`.
///
/// Tokens that carry no alphanumeric characters (whitespace, punctuation)
/// are ignored; the remaining tokens must spell out exactly the normalized
/// choice text. A sum of 0 means probability 1.
pub fn extract_choice_logprob(resp: &ChatResponse, choice_text: &str) -> Result<f64> {
    let tokens = resp
        .token_logprobs
        .as_ref()
        .ok_or_else(|| Error::ConfidenceUnavailable("response carries no logprobs".into()))?;
    let want = normalize_alnum(choice_text);
    if want.is_empty() {
        return Err(Error::ConfidenceUnavailable("empty choice text".into()));
    }
    let mut spelled = String::new();
    let mut sum = 0.0;
    for (token, logprob) in tokens {
        let norm = normalize_alnum(token);
        if norm.is_empty() {
            continue;
        }
        spelled.push_str(&norm);
        sum += logprob;
    }
    if spelled != want {
        return Err(Error::ConfidenceUnavailable(format!(
            "choice tokens not identifiable: expected {want:?}, response spells {spelled:?}"
        )));
    }
    // Guard against tiny positive values from provider rounding.
    Ok(sum.min(0.0))
}

/// Sum of logprobs of the tokens overlapping `span` (byte range into the
/// response text). Returns `None` when the tokens do not concatenate to the
/// text, which makes offsets meaningless.
pub fn logprob_for_span(
    tokens: &[(String, f64)],
    text: &str,
    span: std::ops::Range<usize>,
) -> Option<f64> {
    let joined: String = tokens.iter().map(|(t, _)| t.as_str()).collect();
    if joined != text {
        return None;
    }
    let mut offset = 0usize;
    let mut sum = 0.0;
    let mut any = false;
    for (token, logprob) in tokens {
        let start = offset;
        let end = offset + token.len();
        offset = end;
        if start < span.end && end > span.start {
            sum += logprob;
            any = true;
        }
    }
    if any {
        Some(sum.min(0.0))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str) -> ChatRequest {
        ChatRequest::new("test-model", vec![Message::user(text)])
    }

    fn yes_mock() -> MockTransport {
        MockTransport::new(vec![
            MockRule::text(MockMatcher::Default, "yes").with_logprobs(vec![("yes".into(), 0.0)])
        ])
    }

    #[test]
    fn cache_hit_returns_identical_text_and_skips_transport() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = Gateway::new(Box::new(yes_mock())).with_cache_dir(dir.path());
        let request = req("anything");
        let first = gateway.complete(&request).unwrap();
        assert!(!first.cached);

        // Second gateway over the same cache dir, with a transport that
        // would change the answer: the cache must win.
        let gateway2 = Gateway::new(Box::new(MockTransport::new(vec![MockRule::text(
            MockMatcher::Default,
            "no",
        )])))
        .with_cache_dir(dir.path());
        let second = gateway2.complete(&request).unwrap();
        assert!(second.cached);
        assert_eq!(second.text, first.text);
        let totals = gateway2.usage_totals();
        assert_eq!(totals["test-model"].cache_hits, 1);
    }

    #[test]
    fn mock_passthrough() {
        let gateway = Gateway::new(Box::new(yes_mock()));
        assert_eq!(gateway.complete(&req("q")).unwrap().text, "yes");
    }

    #[test]
    fn retries_until_scripted_success() {
        let mock = MockTransport::new(vec![
            MockRule::text(MockMatcher::Default, "ok").failing(2)
        ]);
        let gateway = Gateway::new(Box::new(mock)).with_retry(RetryPolicy::immediate(3));
        assert_eq!(gateway.complete(&req("q")).unwrap().text, "ok");
    }

    #[test]
    fn retry_budget_exhausts() {
        let mock = MockTransport::new(vec![
            MockRule::text(MockMatcher::Default, "ok").failing(5)
        ]);
        let gateway = Gateway::new(Box::new(mock)).with_retry(RetryPolicy::immediate(3));
        let err = gateway.complete(&req("q")).unwrap_err();
        assert!(matches!(err, Error::TransportExhausted { attempts: 3, .. }));
    }

    #[test]
    fn votes_use_distinct_cache_keys_and_majority_wins() {
        let mock = MockTransport::new(vec![
            MockRule::text(MockMatcher::Default, "A").once(),
            MockRule::text(MockMatcher::Default, "B").once(),
            MockRule::text(MockMatcher::Default, "A").once(),
        ]);
        let gateway = Gateway::new(Box::new(mock));
        let (winner, parsed, _) = gateway
            .complete_with_votes(&req("q"), 3, |t| Some(t.to_string()))
            .unwrap();
        assert_eq!(winner, "A");
        assert_eq!(parsed.iter().flatten().count(), 3);
    }

    #[test]
    fn single_vote_is_the_final_answer() {
        let mock = MockTransport::new(vec![MockRule::text(MockMatcher::Default, "B")]);
        let gateway = Gateway::new(Box::new(mock));
        let (winner, _, _) = gateway
            .complete_with_votes(&req("q"), 1, |t| Some(t.to_string()))
            .unwrap();
        assert_eq!(winner, "B");
    }

    #[test]
    fn tie_after_exclusion_abstains() {
        let mock = MockTransport::new(vec![
            MockRule::text(MockMatcher::Default, "A").once(),
            MockRule::text(MockMatcher::Default, "B").once(),
            MockRule::text(MockMatcher::Default, "garbled").once(),
        ]);
        let gateway = Gateway::new(Box::new(mock));
        let err = gateway
            .complete_with_votes(&req("q"), 3, |t| match t {
                "A" | "B" => Some(t.to_string()),
                _ => None,
            })
            .unwrap_err();
        assert!(err.is_abstention());
    }

    #[test]
    fn choice_logprob_single_token_full_confidence() {
        let resp = ChatResponse {
            text: "yes".into(),
            token_logprobs: Some(vec![("yes".into(), 0.0)]),
            input_tokens: 0,
            output_tokens: 1,
            cached: false,
            logprobs_missing: false,
        };
        assert_eq!(extract_choice_logprob(&resp, "yes").unwrap(), 0.0);
    }

    #[test]
    fn choice_logprob_sums_across_tokens() {
        let resp = ChatResponse {
            text: "yes".into(),
            token_logprobs: Some(vec![("ye".into(), -0.2), ("s".into(), -0.1)]),
            input_tokens: 0,
            output_tokens: 2,
            cached: false,
            logprobs_missing: false,
        };
        let got = extract_choice_logprob(&resp, "yes").unwrap();
        assert!((got - (-0.3)).abs() < 1e-12);
    }

    #[test]
    fn choice_logprob_requires_logprobs() {
        let resp = ChatResponse {
            text: "yes".into(),
            token_logprobs: None,
            input_tokens: 0,
            output_tokens: 1,
            cached: false,
            logprobs_missing: true,
        };
        let err = extract_choice_logprob(&resp, "yes").unwrap_err();
        assert!(matches!(err, Error::ConfidenceUnavailable(_)));
    }

    #[test]
    fn choice_logprob_skips_punctuation_tokens() {
        let resp = ChatResponse {
            text: "Yes.".into(),
            token_logprobs: Some(vec![("Yes".into(), -0.05), (".".into(), -0.4)]),
            input_tokens: 0,
            output_tokens: 2,
            cached: false,
            logprobs_missing: false,
        };
        let got = extract_choice_logprob(&resp, "yes").unwrap();
        assert!((got - (-0.05)).abs() < 1e-12);
    }

    #[test]
    fn span_logprob_uses_token_offsets() {
        let tokens = vec![
            ("1".to_string(), -0.5),
            (". ".to_string(), -0.1),
            ("yes".to_string(), -0.25),
            ("\n2. no".to_string(), -0.3),
        ];
        let text = "1. yes\n2. no";
        let span = 3..6; // "yes"
        let got = logprob_for_span(&tokens, text, span).unwrap();
        assert!((got - (-0.25)).abs() < 1e-12);
    }

    #[test]
    fn span_logprob_rejects_mismatched_tokens() {
        let tokens = vec![("abc".to_string(), -0.1)];
        assert!(logprob_for_span(&tokens, "abcd", 0..1).is_none());
    }
}
