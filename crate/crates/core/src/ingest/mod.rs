//! Corpus ingestion: source adapters, unification into preference records,
//! stratified sampling, and deterministic splits.

mod adapters;
mod sample;
mod split;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::types::{short_hash, Choice};

pub use adapters::{parse_source, ParseOutcome, RejectedLine};
pub use sample::{stratified_sample, SampleConfig, SampleReport, StratumOutcome};
pub use split::{split, DatasetSplit, SplitRatios, SplitReport};

/// Sources with a shipped adapter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceId {
    Shp2Reddit,
    Shp2Stackexchange,
    ChatbotArena,
    LfqaEval,
    Custom,
}

impl SourceId {
    pub fn parse(name: &str) -> Result<SourceId> {
        match name {
            "shp2_reddit" => Ok(SourceId::Shp2Reddit),
            "shp2_stackexchange" => Ok(SourceId::Shp2Stackexchange),
            "chatbot_arena" => Ok(SourceId::ChatbotArena),
            "lfqa_eval" => Ok(SourceId::LfqaEval),
            "custom" => Ok(SourceId::Custom),
            other => Err(Error::UnknownSource(other.to_string())),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SourceId::Shp2Reddit => "shp2_reddit",
            SourceId::Shp2Stackexchange => "shp2_stackexchange",
            SourceId::ChatbotArena => "chatbot_arena",
            SourceId::LfqaEval => "lfqa_eval",
            SourceId::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorKind {
    Expert,
    NonExpert,
    Crowd,
    VoteDerived,
}

impl AnnotatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnnotatorKind::Expert => "expert",
            AnnotatorKind::NonExpert => "non_expert",
            AnnotatorKind::Crowd => "crowd",
            AnnotatorKind::VoteDerived => "vote_derived",
        }
    }
}

/// One record in its source-native shape, schema preserved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceRecord {
    pub source_id: SourceId,
    pub raw_fields: Map<String, Value>,
    pub domain: String,
    pub annotator_kind: AnnotatorKind,
}

/// The atomic unit of the pipeline: one question, two candidate answers, and
/// a human preference label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub record_id: String,
    pub question: String,
    pub answer_a: String,
    pub answer_b: String,
    pub human_choice: Choice,
    pub source_id: SourceId,
    pub domain: String,
    pub annotator_kind: AnnotatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_lfq: Option<bool>,
}

impl PreferenceRecord {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidRecord {
                record_id: self.record_id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.record_id.is_empty() {
            return fail("empty record_id");
        }
        if self.question.trim().is_empty() {
            return fail("empty question");
        }
        if self.answer_a.trim().is_empty() || self.answer_b.trim().is_empty() {
            return fail("empty answer");
        }
        if self.answer_a == self.answer_b {
            return fail("identical answers");
        }
        Ok(())
    }
}

/// Stable record id: 16 hex digits of SHA-256 over source, native id, and
/// question, so re-ingestion dedups against earlier runs.
pub fn record_id(source_id: SourceId, native_id: &str, question: &str) -> String {
    short_hash(&[source_id.as_str(), native_id, question])
}

/// A source record that could not be unified, with the reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnifyReject {
    pub source_id: SourceId,
    pub native_id: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct UnifyOutcome {
    pub records: Vec<PreferenceRecord>,
    pub rejects: Vec<UnifyReject>,
}

/// Map source records onto unified preference records.
///
/// Explicit preference labels are taken as-is. SHP-2-style records derive
/// the label from the vote rule: the response that is both later and
/// higher-scored is preferred; score ties and rule-violating pairs are
/// rejected, never randomized. Duplicate record ids after the first are
/// rejected so each dataset file keeps ids unique.
pub fn unify(records: &[SourceRecord]) -> UnifyOutcome {
    let mut outcome = UnifyOutcome::default();
    let mut seen_ids = std::collections::HashSet::new();
    for source in records {
        match adapters::unify_one(source) {
            Ok(record) => {
                if let Err(e) = record.validate() {
                    outcome.rejects.push(UnifyReject {
                        source_id: source.source_id,
                        native_id: record.record_id.clone(),
                        reason: e.to_string(),
                    });
                    continue;
                }
                if !seen_ids.insert(record.record_id.clone()) {
                    outcome.rejects.push(UnifyReject {
                        source_id: source.source_id,
                        native_id: record.record_id.clone(),
                        reason: "duplicate record_id".to_string(),
                    });
                    continue;
                }
                outcome.records.push(record);
            }
            Err((native_id, reason)) => {
                outcome.rejects.push(UnifyReject {
                    source_id: source.source_id,
                    native_id,
                    reason,
                });
            }
        }
    }
    outcome.records.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn shp_record(score_a: i64, score_b: i64, t_a: i64, t_b: i64) -> SourceRecord {
        let raw = json!({
            "post_id": "p1",
            "history": "Why is the sky blue during the day?",
            "human_ref_A": "Because of Rayleigh scattering of sunlight.",
            "human_ref_B": "Because the ocean reflects upward.",
            "score_A": score_a,
            "score_B": score_b,
            "created_at_utc_A": t_a,
            "created_at_utc_B": t_b,
            "domain": "askscience",
        });
        SourceRecord {
            source_id: SourceId::Shp2Reddit,
            raw_fields: raw.as_object().unwrap().clone(),
            domain: "askscience".into(),
            annotator_kind: AnnotatorKind::VoteDerived,
        }
    }

    #[test]
    fn explicit_label_maps_directly() {
        let raw = json!({
            "id": "q9",
            "question": "How do vaccines train the immune system?",
            "answer_a": "They expose it to a harmless antigen preview.",
            "answer_b": "They are vitamins.",
            "preference": "response_1",
            "expert": true,
            "domain": "medicine",
        });
        let source = SourceRecord {
            source_id: SourceId::LfqaEval,
            raw_fields: raw.as_object().unwrap().clone(),
            domain: "medicine".into(),
            annotator_kind: AnnotatorKind::Expert,
        };
        let outcome = unify(&[source]);
        assert_eq!(outcome.records.len(), 1);
        assert_eq!(outcome.records[0].human_choice, Choice::A);
        assert_eq!(outcome.records[0].annotator_kind, AnnotatorKind::Expert);
    }

    #[test]
    fn shp_vote_rule_prefers_later_and_higher() {
        // X = answer A: score 40, later; Y = answer B: score 12, earlier.
        let outcome = unify(&[shp_record(40, 12, 2000, 1000)]);
        assert_eq!(outcome.records.len(), 1);
        assert_eq!(outcome.records[0].human_choice, Choice::A);

        // Mirror: B later and higher.
        let outcome = unify(&[shp_record(12, 40, 1000, 2000)]);
        assert_eq!(outcome.records[0].human_choice, Choice::B);
    }

    #[test]
    fn equal_scores_are_untiebreakable() {
        let outcome = unify(&[shp_record(5, 5, 2000, 1000)]);
        assert!(outcome.records.is_empty());
        assert_eq!(outcome.rejects.len(), 1);
        assert!(outcome.rejects[0].reason.contains("untiebreakable"));
    }

    #[test]
    fn higher_but_earlier_violates_the_vote_rule() {
        let outcome = unify(&[shp_record(40, 12, 1000, 2000)]);
        assert!(outcome.records.is_empty());
        assert!(outcome.rejects[0].reason.contains("vote rule"));
    }

    #[test]
    fn duplicate_record_ids_are_rejected() {
        let a = shp_record(40, 12, 2000, 1000);
        let outcome = unify(&[a.clone(), a]);
        assert_eq!(outcome.records.len(), 1);
        assert_eq!(outcome.rejects.len(), 1);
        assert!(outcome.rejects[0].reason.contains("duplicate"));
    }

    #[test]
    fn identical_answers_fail_validation() {
        let mut source = shp_record(40, 12, 2000, 1000);
        source
            .raw_fields
            .insert("human_ref_B".into(), json!("Because of Rayleigh scattering of sunlight."));
        let outcome = unify(&[source]);
        assert!(outcome.records.is_empty());
        assert!(outcome.rejects[0].reason.contains("identical answers"));
    }
}
