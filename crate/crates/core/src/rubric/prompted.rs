//! Prompted scorers: rubric scoring prompts, the binary example flag, and
//! the two-stage claim-based factuality pipeline.

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::filter::normalize_yes_no;
use crate::gateway::{ChatRequest, Gateway, Message};
use crate::prompts::{self, fill_slots};

/// Rubrics scored by a prompt that returns a bare integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptedRubric {
    Coherence,
    Relevance,
    Fluency,
    Completeness,
}

impl PromptedRubric {
    pub fn name(&self) -> &'static str {
        match self {
            PromptedRubric::Coherence => "coherence",
            PromptedRubric::Relevance => "relevance",
            PromptedRubric::Fluency => "fluency",
            PromptedRubric::Completeness => "completeness",
        }
    }

    /// Inclusive native score range of the rubric's prompt.
    pub fn native_range(&self) -> (i64, i64) {
        match self {
            PromptedRubric::Fluency => (1, 3),
            _ => (1, 5),
        }
    }

    fn template(&self) -> &'static str {
        match self {
            PromptedRubric::Coherence => prompts::GEVAL_COHERENCE,
            PromptedRubric::Relevance => prompts::GEVAL_RELEVANCE,
            PromptedRubric::Fluency => prompts::GEVAL_FLUENCY,
            PromptedRubric::Completeness => prompts::GEVAL_COMPLETENESS,
        }
    }
}

fn first_integer_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"-?\d+").expect("static regex compiles"))
}

fn parse_first_integer(text: &str) -> Option<i64> {
    first_integer_re()
        .find(text)
        .and_then(|m| m.as_str().parse().ok())
}

fn score_request(
    rubric: PromptedRubric,
    model_id: &str,
    question: &str,
    answer: &str,
) -> Result<ChatRequest> {
    let prompt = match rubric {
        PromptedRubric::Fluency => fill_slots(rubric.template(), &[answer])?,
        _ => fill_slots(rubric.template(), &[question, answer])?,
    };
    Ok(ChatRequest::new(model_id, vec![Message::user(prompt)])
        .with_temperature(0.0)
        .with_max_tokens(16))
}

/// Score one answer on one prompted rubric, on the rubric's native scale.
/// Unparseable or out-of-range replies get one re-prompt.
pub fn prompted_score(
    gateway: &Gateway,
    question: &str,
    answer: &str,
    rubric: PromptedRubric,
    model_id: &str,
) -> Result<f64> {
    let request = score_request(rubric, model_id, question, answer)?;
    let (lo, hi) = rubric.native_range();
    let mut last_error: Option<Error> = None;
    for attempt in 0..2 {
        let response = gateway.complete_vote(&request, attempt)?;
        match parse_first_integer(&response.text) {
            Some(value) if (lo..=hi).contains(&value) => return Ok(value as f64),
            Some(value) => {
                last_error = Some(Error::ScoreOutOfRange {
                    lo: lo as f64,
                    hi: hi as f64,
                    got: value as f64,
                });
            }
            None => {
                last_error = Some(Error::UnparseableVerdict(format!(
                    "{} reply carries no integer score",
                    rubric.name()
                )));
            }
        }
    }
    Err(last_error.expect("two attempts always set an error"))
}

/// Yes/no prompt deciding whether the answer uses a concrete example.
pub fn binary_flag(
    gateway: &Gateway,
    question: &str,
    answer: &str,
    model_id: &str,
) -> Result<u8> {
    let prompt = fill_slots(prompts::USE_OF_EXAMPLE, &[question, answer])?;
    let request = ChatRequest::new(model_id, vec![Message::user(prompt)])
        .with_temperature(0.0)
        .with_max_tokens(8);
    for attempt in 0..2 {
        let response = gateway.complete_vote(&request, attempt)?;
        if let Some(flag) = normalize_yes_no(&response.text) {
            return Ok(u8::from(flag));
        }
    }
    Err(Error::UnparseableVerdict(
        "use_of_example reply is not a strict yes/no".into(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactualityOutcome {
    /// supported / total claims, or the 0.5 neutral prior with no claims.
    pub score: f64,
    pub n_claims: usize,
    pub n_supported: usize,
    /// Set when no verifiable claims could be extracted.
    pub no_claims: bool,
}

fn claim_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?m)^\s*(?:-|\*|\d{1,3}[.)])\s+(.+?)\s*$").expect("static regex compiles")
    })
}

/// Parse the claim-extraction reply: one claim per bullet or numbered line;
/// the single word NONE (or an empty reply) means no verifiable claims.
pub fn parse_claims(text: &str) -> Result<Vec<String>> {
    let claims: Vec<String> = claim_line_re()
        .captures_iter(text)
        .map(|caps| caps[1].to_string())
        .collect();
    if !claims.is_empty() {
        return Ok(claims);
    }
    let trimmed = text.trim();
    if trimmed.is_empty() || trimmed.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    Err(Error::UnparseableVerdict(
        "claim extraction reply has no claim lines and is not NONE".into(),
    ))
}

fn parse_supported(text: &str) -> Option<bool> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(|c| c.to_lowercase())
        .collect();
    match cleaned.as_str() {
        "supported" => Some(true),
        "unsupported" => Some(false),
        _ => None,
    }
}

/// Two-stage factuality: extract verifiable claims, verify each, and return
/// the supported fraction. Zero-claim answers take the 0.5 neutral prior and
/// are flagged.
pub fn factuality_score(
    gateway: &Gateway,
    answer: &str,
    model_id: &str,
) -> Result<FactualityOutcome> {
    if answer.trim().is_empty() {
        return Err(Error::RubricFailed {
            rubric: "factuality".into(),
            reason: "empty answer".into(),
        });
    }
    let extract_prompt = fill_slots(prompts::CLAIMS_EXTRACT, &[answer])?;
    let extract_request = ChatRequest::new(model_id, vec![Message::user(extract_prompt)])
        .with_temperature(0.0)
        .with_max_tokens(1024);
    let response = gateway.complete(&extract_request)?;
    let claims = parse_claims(&response.text)?;

    if claims.is_empty() {
        return Ok(FactualityOutcome {
            score: 0.5,
            n_claims: 0,
            n_supported: 0,
            no_claims: true,
        });
    }

    let mut supported = 0usize;
    for claim in &claims {
        let verify_prompt = fill_slots(prompts::CLAIMS_VERIFY, &[claim])?;
        let request = ChatRequest::new(model_id, vec![Message::user(verify_prompt)])
            .with_temperature(0.0)
            .with_max_tokens(8);
        let mut verdict = None;
        for attempt in 0..2 {
            let response = gateway.complete_vote(&request, attempt)?;
            verdict = parse_supported(&response.text);
            if verdict.is_some() {
                break;
            }
        }
        match verdict {
            Some(true) => supported += 1,
            Some(false) => {}
            None => {
                return Err(Error::UnparseableVerdict(format!(
                    "claim verification reply unparseable for claim {claim:?}"
                )))
            }
        }
    }
    Ok(FactualityOutcome {
        score: supported as f64 / claims.len() as f64,
        n_claims: claims.len(),
        n_supported: supported,
        no_claims: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockMatcher, MockRule, MockTransport};

    fn gateway_with(rules: Vec<MockRule>) -> Gateway {
        Gateway::new(Box::new(MockTransport::new(rules)))
    }

    #[test]
    fn parses_labelled_score() {
        let gateway = gateway_with(vec![MockRule::text(MockMatcher::Default, "Coherence: 4")]);
        let got = prompted_score(&gateway, "q", "a", PromptedRubric::Coherence, "m").unwrap();
        assert_eq!(got, 4.0);
    }

    #[test]
    fn out_of_range_score_errors() {
        let gateway = gateway_with(vec![MockRule::text(MockMatcher::Default, "7")]);
        let err = prompted_score(&gateway, "q", "a", PromptedRubric::Coherence, "m").unwrap_err();
        assert!(matches!(err, Error::ScoreOutOfRange { .. }));
    }

    #[test]
    fn fluency_native_scale_is_one_to_three() {
        let gateway = gateway_with(vec![MockRule::text(MockMatcher::Default, "3")]);
        let got = prompted_score(&gateway, "q", "a", PromptedRubric::Fluency, "m").unwrap();
        assert_eq!(got, 3.0);
        let gateway = gateway_with(vec![MockRule::text(MockMatcher::Default, "4")]);
        assert!(prompted_score(&gateway, "q", "a", PromptedRubric::Fluency, "m").is_err());
    }

    #[test]
    fn binary_flag_maps_yes_no() {
        let gateway = gateway_with(vec![MockRule::text(MockMatcher::Default, "yes")]);
        assert_eq!(binary_flag(&gateway, "q", "For example, consider x.", "m").unwrap(), 1);
        let gateway = gateway_with(vec![MockRule::text(MockMatcher::Default, "no")]);
        assert_eq!(binary_flag(&gateway, "q", "a", "m").unwrap(), 0);
        let gateway = gateway_with(vec![MockRule::text(MockMatcher::Default, "it depends")]);
        assert!(binary_flag(&gateway, "q", "a", "m").is_err());
    }

    #[test]
    fn claims_parse_bullets_numbers_and_none() {
        let claims = parse_claims("- water boils at 100C\n2. salt dissolves\n").unwrap();
        assert_eq!(claims, vec!["water boils at 100C", "salt dissolves"]);
        assert!(parse_claims("NONE").unwrap().is_empty());
        assert!(parse_claims("free-form prose").is_err());
    }

    #[test]
    fn factuality_counts_supported_fraction() {
        let gateway = gateway_with(vec![
            MockRule::text(
                MockMatcher::Contains("Extract every verifiable factual claim"),
                "- claim one\n- claim two\n- claim three\n- claim four",
            ),
            MockRule::text(MockMatcher::Contains("claim one"), "supported"),
            MockRule::text(MockMatcher::Contains("claim two"), "unsupported"),
            MockRule::text(MockMatcher::Contains("claim three"), "unsupported"),
            MockRule::text(MockMatcher::Contains("claim four"), "unsupported"),
        ]);
        let outcome = factuality_score(&gateway, "some answer", "m").unwrap();
        assert_eq!(outcome.n_claims, 4);
        assert_eq!(outcome.score, 0.25);
        assert!(!outcome.no_claims);
    }

    #[test]
    fn zero_claims_takes_neutral_prior() {
        let gateway = gateway_with(vec![MockRule::text(MockMatcher::Default, "NONE")]);
        let outcome = factuality_score(&gateway, "pure opinion text", "m").unwrap();
        assert_eq!(outcome.score, 0.5);
        assert!(outcome.no_claims);
    }
}
