//! Per-source parsing and field mapping.
//!
//! Expected line schemas (JSON-Lines, one object per line):
//!
//! * `shp2_reddit` / `shp2_stackexchange`: `post_id`, `history` (the prompt),
//!   `human_ref_A`, `human_ref_B`, `score_A`, `score_B`, `created_at_utc_A`,
//!   `created_at_utc_B`, optional `domain`.
//! * `chatbot_arena`: `question_id`, `question`, `answer_a`, `answer_b`,
//!   `winner` (`model_a`/`model_b`/`tie`), optional `domain`, optional
//!   `annotator` (`expert`/`crowd`).
//! * `lfqa_eval`: `id`, `question`, `answer_a`, `answer_b`, `preference`
//!   (`A`/`B`, `1`/`2`, or `response_1`/`response_2`), `expert` (bool),
//!   optional `domain`.
//! * `custom`: already-unified records: `question`, `answer_a`, `answer_b`,
//!   `human_choice`, optional `id`, `domain`, `annotator_kind`.

use std::io::{BufRead, BufReader};
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::types::{short_hash, Choice};

use super::{record_id, AnnotatorKind, PreferenceRecord, SourceId, SourceRecord};

/// Fraction of malformed lines (in percent) above which parsing aborts.
const MALFORMED_ABORT_PERCENT: u8 = 10;

#[derive(Debug, Clone, serde::Serialize)]
pub struct RejectedLine {
    pub line_number: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<SourceRecord>,
    pub rejects: Vec<RejectedLine>,
}

/// Parse one source file into source records. Malformed lines are collected,
/// not silently dropped; more than 10% malformed aborts with a summary.
pub fn parse_source(path: &Path, source_id: SourceId) -> Result<ParseOutcome> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut outcome = ParseOutcome::default();
    let mut total = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match parse_line(&line, source_id) {
            Ok(record) => outcome.records.push(record),
            Err(reason) => outcome.rejects.push(RejectedLine {
                line_number: idx + 1,
                reason,
            }),
        }
    }
    if total > 0 && outcome.rejects.len() * 100 > total * MALFORMED_ABORT_PERCENT as usize {
        let sample = outcome
            .rejects
            .first()
            .map(|r| format!("line {}: {}", r.line_number, r.reason))
            .unwrap_or_default();
        return Err(Error::TooManyMalformed {
            path: path.display().to_string(),
            malformed: outcome.rejects.len(),
            total,
            limit: MALFORMED_ABORT_PERCENT,
            sample,
        });
    }
    Ok(outcome)
}

fn parse_line(line: &str, source_id: SourceId) -> std::result::Result<SourceRecord, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid json: {e}"))?;
    let raw = value
        .as_object()
        .ok_or_else(|| "line is not a json object".to_string())?
        .clone();
    if raw.is_empty() {
        return Err("empty object".to_string());
    }
    for key in required_keys(source_id) {
        if !raw.contains_key(*key) {
            return Err(format!("missing field {key:?}"));
        }
    }
    let domain = str_field(&raw, "domain").unwrap_or_else(|| "unknown".to_string());
    let annotator_kind = match source_id {
        SourceId::Shp2Reddit | SourceId::Shp2Stackexchange => AnnotatorKind::VoteDerived,
        SourceId::ChatbotArena => match str_field(&raw, "annotator").as_deref() {
            Some("expert") => AnnotatorKind::Expert,
            _ => AnnotatorKind::Crowd,
        },
        SourceId::LfqaEval => match raw.get("expert").and_then(Value::as_bool) {
            Some(true) => AnnotatorKind::Expert,
            _ => AnnotatorKind::NonExpert,
        },
        SourceId::Custom => match str_field(&raw, "annotator_kind").as_deref() {
            Some("expert") => AnnotatorKind::Expert,
            Some("non_expert") => AnnotatorKind::NonExpert,
            Some("vote_derived") => AnnotatorKind::VoteDerived,
            _ => AnnotatorKind::Crowd,
        },
    };
    Ok(SourceRecord {
        source_id,
        raw_fields: raw,
        domain,
        annotator_kind,
    })
}

fn required_keys(source_id: SourceId) -> &'static [&'static str] {
    match source_id {
        SourceId::Shp2Reddit | SourceId::Shp2Stackexchange => &[
            "history",
            "human_ref_A",
            "human_ref_B",
            "score_A",
            "score_B",
            "created_at_utc_A",
            "created_at_utc_B",
        ],
        SourceId::ChatbotArena => &["question", "answer_a", "answer_b", "winner"],
        SourceId::LfqaEval => &["question", "answer_a", "answer_b", "preference"],
        SourceId::Custom => &["question", "answer_a", "answer_b", "human_choice"],
    }
}

fn str_field(raw: &Map<String, Value>, key: &str) -> Option<String> {
    raw.get(key).and_then(Value::as_str).map(str::to_string)
}

fn num_field(raw: &Map<String, Value>, key: &str) -> Option<f64> {
    raw.get(key).and_then(Value::as_f64)
}

/// Unify one source record. Errors carry (native id, reason) so rejects can
/// be reported without aborting the batch.
pub(super) fn unify_one(
    source: &SourceRecord,
) -> std::result::Result<PreferenceRecord, (String, String)> {
    let raw = &source.raw_fields;
    let (native_id, question, answer_a, answer_b, choice) = match source.source_id {
        SourceId::Shp2Reddit | SourceId::Shp2Stackexchange => {
            let question = str_field(raw, "history").unwrap_or_default();
            let answer_a = str_field(raw, "human_ref_A").unwrap_or_default();
            let answer_b = str_field(raw, "human_ref_B").unwrap_or_default();
            let native_id = str_field(raw, "post_id")
                .unwrap_or_else(|| short_hash(&[&answer_a, &answer_b]));
            let score_a = num_field(raw, "score_A");
            let score_b = num_field(raw, "score_B");
            let time_a = num_field(raw, "created_at_utc_A");
            let time_b = num_field(raw, "created_at_utc_B");
            let choice = match (score_a, score_b, time_a, time_b) {
                (Some(sa), Some(sb), Some(ta), Some(tb)) => {
                    shp_vote_choice(sa, sb, ta, tb).map_err(|r| (native_id.clone(), r))?
                }
                _ => {
                    return Err((native_id, "missing score or timestamp".to_string()));
                }
            };
            (native_id, question, answer_a, answer_b, choice)
        }
        SourceId::ChatbotArena => {
            let question = str_field(raw, "question").unwrap_or_default();
            let native_id = str_field(raw, "question_id")
                .unwrap_or_else(|| short_hash(&[&question]));
            let winner = str_field(raw, "winner").unwrap_or_default();
            let choice = match winner.as_str() {
                "model_a" => Choice::A,
                "model_b" => Choice::B,
                other => {
                    return Err((native_id, format!("untiebreakable: winner {other:?}")));
                }
            };
            (
                native_id,
                question,
                str_field(raw, "answer_a").unwrap_or_default(),
                str_field(raw, "answer_b").unwrap_or_default(),
                choice,
            )
        }
        SourceId::LfqaEval => {
            let question = str_field(raw, "question").unwrap_or_default();
            let native_id =
                str_field(raw, "id").unwrap_or_else(|| short_hash(&[&question]));
            let preference = match raw.get("preference") {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                _ => String::new(),
            };
            let choice = match preference.as_str() {
                "A" | "a" | "1" | "response_1" => Choice::A,
                "B" | "b" | "2" | "response_2" => Choice::B,
                other => {
                    return Err((native_id, format!("unrecognized preference {other:?}")));
                }
            };
            (
                native_id,
                question,
                str_field(raw, "answer_a").unwrap_or_default(),
                str_field(raw, "answer_b").unwrap_or_default(),
                choice,
            )
        }
        SourceId::Custom => {
            let question = str_field(raw, "question").unwrap_or_default();
            let native_id =
                str_field(raw, "id").unwrap_or_else(|| short_hash(&[&question]));
            let choice = match str_field(raw, "human_choice").as_deref() {
                Some("A") => Choice::A,
                Some("B") => Choice::B,
                other => {
                    return Err((native_id, format!("unrecognized human_choice {other:?}")));
                }
            };
            (
                native_id,
                question,
                str_field(raw, "answer_a").unwrap_or_default(),
                str_field(raw, "answer_b").unwrap_or_default(),
                choice,
            )
        }
    };
    Ok(PreferenceRecord {
        record_id: record_id(source.source_id, &native_id, &question),
        question,
        answer_a,
        answer_b,
        human_choice: choice,
        source_id: source.source_id,
        domain: source.domain.clone(),
        annotator_kind: source.annotator_kind,
        is_lfq: None,
    })
}

/// SHP-2 vote rule: the response that is both later and higher-scored is
/// preferred. Score ties carry no signal; a higher-scored but earlier
/// response is confounded by visibility and also carries none.
fn shp_vote_choice(
    score_a: f64,
    score_b: f64,
    time_a: f64,
    time_b: f64,
) -> std::result::Result<Choice, String> {
    if score_a == score_b {
        return Err("untiebreakable: equal scores".to_string());
    }
    if score_a > score_b && time_a > time_b {
        Ok(Choice::A)
    } else if score_b > score_a && time_b > time_a {
        Ok(Choice::B)
    } else {
        Err("vote rule does not apply: higher-scored response is earlier".to_string())
    }
}
