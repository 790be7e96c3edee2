//! Grammar scoring from error counts.
//!
//! The score maps the error rate `e` (errors per 100 words) linearly and
//! saturating onto [1, 5]: `5 - 4 * min(1, e / e_max)`.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::rubric::lexical::tokenize_words;

pub const DEFAULT_E_MAX: f64 = 10.0;

pub trait GrammarChecker: Send + Sync {
    fn error_count(&self, text: &str) -> Result<usize>;
    fn id(&self) -> &'static str;
}

/// External grammar-checking service: POST the text to `<endpoint>`, read
/// the length of the `matches` array in the JSON reply.
pub struct ServiceGrammar {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl ServiceGrammar {
    pub fn new(endpoint: impl Into<String>) -> Self {
        ServiceGrammar {
            endpoint: endpoint.into(),
            client: reqwest::blocking::Client::new(),
        }
    }
}

#[derive(Deserialize)]
struct CheckReply {
    #[serde(default)]
    matches: Vec<serde_json::Value>,
}

impl GrammarChecker for ServiceGrammar {
    fn error_count(&self, text: &str) -> Result<usize> {
        let response = self
            .client
            .post(&self.endpoint)
            .body(text.to_string())
            .send()
            .map_err(|e| Error::GrammarUnavailable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(Error::GrammarUnavailable(format!(
                "service returned {}",
                response.status()
            )));
        }
        let reply: CheckReply = response.json()?;
        Ok(reply.matches.len())
    }

    fn id(&self) -> &'static str {
        "service"
    }
}

/// Offline fallback with a handful of surface heuristics: doubled words,
/// sentences starting lowercase, standalone lowercase "i", and unbalanced
/// brackets or quotes. Deliberately coarse; it exists so the pipeline runs
/// without the service.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleGrammar;

impl GrammarChecker for RuleGrammar {
    fn error_count(&self, text: &str) -> Result<usize> {
        let mut errors = 0usize;

        let words = tokenize_words(text);
        for pair in words.windows(2) {
            if pair[0] == pair[1] {
                errors += 1;
            }
        }

        for sentence in text.split(['.', '!', '?']) {
            let trimmed = sentence.trim_start();
            if let Some(first) = trimmed.chars().next() {
                if first.is_lowercase() && first.is_alphabetic() {
                    errors += 1;
                }
            }
        }

        for word in text.split_whitespace() {
            if word == "i" || word.starts_with("i'") {
                errors += 1;
            }
        }

        let opens = text.chars().filter(|c| *c == '(').count();
        let closes = text.chars().filter(|c| *c == ')').count();
        errors += opens.abs_diff(closes);
        if text.chars().filter(|c| *c == '"').count() % 2 == 1 {
            errors += 1;
        }

        Ok(errors)
    }

    fn id(&self) -> &'static str {
        "rules"
    }
}

/// Score from raw counts: `e = errors per 100 words`.
pub fn grammar_score_from_counts(errors: usize, words: usize, e_max: f64) -> Result<f64> {
    if words == 0 {
        return Err(Error::RubricFailed {
            rubric: "grammar".into(),
            reason: "text has zero words".into(),
        });
    }
    if !(e_max > 0.0) {
        return Err(Error::InvalidConfig(format!("e_max must be > 0, got {e_max}")));
    }
    let rate = errors as f64 / words as f64 * 100.0;
    Ok(5.0 - 4.0 * (rate / e_max).min(1.0))
}

pub fn grammar_score(text: &str, checker: &dyn GrammarChecker, e_max: f64) -> Result<f64> {
    let errors = checker.error_count(text)?;
    grammar_score_from_counts(errors, tokenize_words(text).len(), e_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_errors_score_five() {
        assert_eq!(grammar_score_from_counts(0, 50, DEFAULT_E_MAX).unwrap(), 5.0);
    }

    #[test]
    fn saturated_error_rate_scores_one() {
        // 20 errors in 100 words: e = 20 >= e_max.
        assert_eq!(grammar_score_from_counts(20, 100, DEFAULT_E_MAX).unwrap(), 1.0);
    }

    #[test]
    fn worked_rate_example() {
        // 4 errors in 200 words: e = 2, score = 5 - 4 * 0.2 = 4.2.
        let got = grammar_score_from_counts(4, 200, DEFAULT_E_MAX).unwrap();
        assert!((got - 4.2).abs() < 1e-12);
    }

    #[test]
    fn rule_checker_flags_doubled_words_and_lowercase_sentences() {
        let clean = RuleGrammar.error_count("The cat sat. It purred.").unwrap();
        assert_eq!(clean, 0);
        let messy = RuleGrammar
            .error_count("the cat cat sat. it purred (badly")
            .unwrap();
        assert!(messy >= 3);
    }
}
