//! Specificity backends: an external three-logit scoring service, with a
//! prompted three-way fallback for offline runs.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::gateway::{ChatRequest, Gateway, Message};
use crate::prompts::{self, fill_slots};

/// Returns logits for the three ordinal specificity labels
/// (Negative, Neutral, Positive).
pub trait SpecificityScorer: Send + Sync {
    fn logits(&self, question: &str, answer: &str) -> Result<[f64; 3]>;
    fn id(&self) -> &'static str;
}

/// External classifier service: POST `{question, answer}` as JSON, read
/// `{"logits": [a, b, c]}`.
pub struct ServiceSpecificity {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl ServiceSpecificity {
    pub fn new(endpoint: impl Into<String>) -> Self {
        ServiceSpecificity {
            endpoint: endpoint.into(),
            client: reqwest::blocking::Client::new(),
        }
    }
}

#[derive(Deserialize)]
struct LogitsReply {
    logits: Vec<f64>,
}

impl SpecificityScorer for ServiceSpecificity {
    fn logits(&self, question: &str, answer: &str) -> Result<[f64; 3]> {
        let response = self
            .client
            .post(&self.endpoint)
            .json(&serde_json::json!({ "question": question, "answer": answer }))
            .send()?;
        if !response.status().is_success() {
            return Err(Error::RubricFailed {
                rubric: "specificity".into(),
                reason: format!("service returned {}", response.status()),
            });
        }
        let reply: LogitsReply = response.json()?;
        if reply.logits.len() != 3 {
            return Err(Error::RubricFailed {
                rubric: "specificity".into(),
                reason: format!("service returned {} logits, expected 3", reply.logits.len()),
            });
        }
        Ok([reply.logits[0], reply.logits[1], reply.logits[2]])
    }

    fn id(&self) -> &'static str {
        "service"
    }
}

/// Prompted fallback: ask for one of the three labels and saturate the
/// corresponding logit, which lands the continuous score on 1, 3, or 5.
pub struct PromptedSpecificity<'g> {
    gateway: &'g Gateway,
    model_id: String,
}

impl<'g> PromptedSpecificity<'g> {
    pub fn new(gateway: &'g Gateway, model_id: impl Into<String>) -> Self {
        PromptedSpecificity {
            gateway,
            model_id: model_id.into(),
        }
    }
}

const SATURATION: f64 = 50.0;

fn parse_label(text: &str) -> Option<usize> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(|c| c.to_lowercase())
        .collect();
    match cleaned.as_str() {
        "negative" => Some(0),
        "neutral" => Some(1),
        "positive" => Some(2),
        _ => None,
    }
}

impl SpecificityScorer for PromptedSpecificity<'_> {
    fn logits(&self, question: &str, answer: &str) -> Result<[f64; 3]> {
        let prompt = fill_slots(prompts::SPECIFICITY_PROMPTED, &[question, answer])?;
        let request = ChatRequest::new(&self.model_id, vec![Message::user(prompt)])
            .with_temperature(0.0)
            .with_max_tokens(8);
        for attempt in 0..2 {
            let response = self.gateway.complete_vote(&request, attempt)?;
            if let Some(index) = parse_label(&response.text) {
                let mut logits = [-SATURATION; 3];
                logits[index] = SATURATION;
                return Ok(logits);
            }
        }
        Err(Error::UnparseableVerdict(
            "specificity reply is not Negative/Neutral/Positive".into(),
        ))
    }

    fn id(&self) -> &'static str {
        "prompted"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockMatcher, MockRule, MockTransport};
    use crate::rubric::scale::ordinal_to_continuous;

    #[test]
    fn prompted_labels_saturate_to_endpoint_scores() {
        for (label, expected) in [("Negative", 1.0), ("Neutral", 3.0), ("Positive", 5.0)] {
            let gateway = Gateway::new(Box::new(MockTransport::new(vec![MockRule::text(
                MockMatcher::Default,
                label,
            )])));
            let scorer = PromptedSpecificity::new(&gateway, "m");
            let logits = scorer.logits("q", "a").unwrap();
            let score = ordinal_to_continuous(logits).unwrap();
            assert!((score - expected).abs() < 1e-9, "{label} -> {score}");
        }
    }
}
