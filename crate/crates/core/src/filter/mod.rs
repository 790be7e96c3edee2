//! Long-form-question filtering with strict yes/no prompts, batched
//! classification, confidence gating, and evaluation against gold labels.

pub mod agreement;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::gateway::{extract_choice_logprob, logprob_for_span, ChatRequest, Gateway, Message};
use crate::prompts::{self, fill_slots, slot_count};

pub use agreement::{gwet_ac1, majority_vote_labels, parse_label_matrix, AgreementReport};

/// Which iteration of the long-form-question definition a prompt encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefinitionVersion {
    Initial,
    Updated,
}

impl DefinitionVersion {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "initial" => Ok(DefinitionVersion::Initial),
            "updated" => Ok(DefinitionVersion::Updated),
            other => Err(Error::InvalidConfig(format!(
                "unknown definition version {other:?}"
            ))),
        }
    }
}

/// Definition prompts: a single-question template and a 10-slot batch
/// template, shipped verbatim in the prompt catalog.
#[derive(Debug, Clone)]
pub struct LfqDefinition {
    pub version: DefinitionVersion,
    pub prompt_template: String,
    pub batch_template: String,
}

impl LfqDefinition {
    pub fn shipped(version: DefinitionVersion) -> Self {
        let prompt_template = match version {
            DefinitionVersion::Initial => prompts::LFQ_INITIAL.to_string(),
            DefinitionVersion::Updated => prompts::LFQ_UPDATED.to_string(),
        };
        LfqDefinition {
            version,
            prompt_template,
            batch_template: prompts::LFQ_BATCH10.to_string(),
        }
    }

    pub fn batch_slots(&self) -> usize {
        slot_count(&self.batch_template)
    }

    pub fn validate(&self) -> Result<()> {
        if slot_count(&self.prompt_template) != 1 {
            return Err(Error::SlotMismatch {
                expected: 1,
                found: slot_count(&self.prompt_template),
            });
        }
        if self.batch_slots() == 0 {
            return Err(Error::SlotMismatch {
                expected: 10,
                found: 0,
            });
        }
        Ok(())
    }
}

/// One question to classify, keyed by its record id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuestionItem {
    pub record_id: String,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub record_id: String,
    pub is_lfq: bool,
    /// Log-probability of the yes/no answer tokens; 0 means probability 1.
    /// Missing when the provider returned no logprobs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_score: Option<f64>,
    pub model_id: String,
    pub definition_version: DefinitionVersion,
    pub batch_size_used: usize,
    pub vote_count: u32,
}

/// A record the classifier could not produce a verdict for.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterFailure {
    pub record_id: String,
    pub reason: String,
}

pub type VerdictOutcome = std::result::Result<FilterVerdict, FilterFailure>;

#[derive(Debug, Clone)]
pub struct FilterOptions {
    pub version: DefinitionVersion,
    pub model_id: String,
    /// Questions per model call; capped by the batch template's slot count.
    pub batch_size: usize,
    /// Gate on the whole response's answer tokens instead of per-question
    /// answer tokens.
    pub per_response_log_score: bool,
}

impl FilterOptions {
    pub fn new(model_id: impl Into<String>) -> Self {
        FilterOptions {
            version: DefinitionVersion::Updated,
            model_id: model_id.into(),
            batch_size: 10,
            per_response_log_score: false,
        }
    }
}

/// Text filling unused batch slots; answers for padded slots are ignored.
pub const BATCH_PAD_SENTINEL: &str = "[unused slot - no question]";

/// Normalize a strict yes/no reply: lowercase, strip non-alphabetics, and
/// accept exactly "yes" or "no". Anything else is unparseable.
pub fn normalize_yes_no(text: &str) -> Option<bool> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(|c| c.to_lowercase())
        .collect();
    match cleaned.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Request issued for one single-question classification. Public so fixture
/// generators can compute the exact cache keys the filter will use.
pub fn single_request(def: &LfqDefinition, model_id: &str, question: &str) -> Result<ChatRequest> {
    let prompt = fill_slots(&def.prompt_template, &[question])?;
    Ok(ChatRequest::new(model_id, vec![Message::user(prompt)])
        .with_temperature(0.0)
        .with_max_tokens(8)
        .with_logprobs())
}

/// Request issued for one batch classification; `questions` is padded to the
/// template's slot count with the sentinel.
pub fn batch_request(
    def: &LfqDefinition,
    model_id: &str,
    questions: &[&str],
) -> Result<ChatRequest> {
    let slots = def.batch_slots();
    if questions.is_empty() || questions.len() > slots {
        return Err(Error::InvalidConfig(format!(
            "batch holds {} questions; template has {} slots",
            questions.len(),
            slots
        )));
    }
    let mut filled: Vec<&str> = questions.to_vec();
    filled.resize(slots, BATCH_PAD_SENTINEL);
    let prompt = fill_slots(&def.batch_template, &filled)?;
    Ok(ChatRequest::new(model_id, vec![Message::user(prompt)])
        .with_temperature(0.0)
        .with_max_tokens(16 * slots as u32)
        .with_logprobs())
}

/// Classify one question. An unparseable reply is re-prompted once (with a
/// fresh cache key); a second failure is a classification error.
pub fn classify_single(
    gateway: &Gateway,
    item: &QuestionItem,
    def: &LfqDefinition,
    model_id: &str,
) -> Result<FilterVerdict> {
    let request = single_request(def, model_id, &item.question)?;
    for attempt in 0..2 {
        let response = gateway.complete_vote(&request, attempt)?;
        if let Some(is_lfq) = normalize_yes_no(&response.text) {
            let choice = if is_lfq { "yes" } else { "no" };
            let log_score = extract_choice_logprob(&response, choice).ok();
            return Ok(FilterVerdict {
                record_id: item.record_id.clone(),
                is_lfq,
                log_score,
                model_id: model_id.to_string(),
                definition_version: def.version,
                batch_size_used: 1,
                vote_count: 1,
            });
        }
    }
    Err(Error::UnparseableVerdict(format!(
        "record {}: response is not a strict yes/no",
        item.record_id
    )))
}

/// One parsed answer line of a batch response.
#[derive(Debug, Clone, PartialEq)]
struct BatchAnswer {
    index: usize,
    is_lfq: bool,
    /// Byte span of the yes/no word inside the response text.
    span: std::ops::Range<usize>,
}

fn numbered_answer_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?im)^[^\S\n]*(?:answer[^\S\n]*)?(\d{1,3})[^\S\n]*[:.)\-]+[^\S\n]*(yes|no)\b")
            .expect("static regex compiles")
    })
}

fn bare_answer_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?im)^[^\S\n]*(yes|no)[^\S\n]*[.!]?[^\S\n]*$").expect("static regex compiles")
    })
}

/// Parse the numbered "Answer" lines of a batch response. Falls back to bare
/// yes/no lines taken in order when nothing is numbered. Returns answers for
/// questions `1..=n`; extra answers for padded slots are dropped.
fn parse_batch_answers(text: &str, n: usize) -> Option<Vec<BatchAnswer>> {
    let mut by_index: BTreeMap<usize, BatchAnswer> = BTreeMap::new();
    for caps in numbered_answer_re().captures_iter(text) {
        let index: usize = caps.get(1)?.as_str().parse().ok()?;
        let word = caps.get(2)?;
        let is_lfq = word.as_str().eq_ignore_ascii_case("yes");
        by_index.entry(index).or_insert(BatchAnswer {
            index,
            is_lfq,
            span: word.start()..word.end(),
        });
    }
    if (1..=n).all(|i| by_index.contains_key(&i)) {
        return Some((1..=n).map(|i| by_index[&i].clone()).collect());
    }
    if by_index.is_empty() {
        let bare: Vec<BatchAnswer> = bare_answer_re()
            .captures_iter(text)
            .enumerate()
            .map(|(i, caps)| {
                let word = caps.get(1).expect("group 1 always present");
                BatchAnswer {
                    index: i + 1,
                    is_lfq: word.as_str().eq_ignore_ascii_case("yes"),
                    span: word.start()..word.end(),
                }
            })
            .collect();
        if bare.len() >= n {
            return Some(bare.into_iter().take(n).collect());
        }
    }
    None
}

/// Classify up to one batch template's worth of questions in a single call.
///
/// A response with a wrong number of parseable answers is retried once with
/// a fresh cache key, then the batch is split into singleton calls. The
/// returned list is order-aligned with the input; per-question failures are
/// reported in place rather than aborting the batch.
pub fn classify_batch(
    gateway: &Gateway,
    items: &[QuestionItem],
    def: &LfqDefinition,
    options: &FilterOptions,
) -> Result<Vec<VerdictOutcome>> {
    if items.is_empty() {
        return Ok(Vec::new());
    }
    if items.len() == 1 {
        return Ok(vec![single_outcome(gateway, &items[0], def, options)]);
    }
    let questions: Vec<&str> = items.iter().map(|i| i.question.as_str()).collect();
    let request = batch_request(def, &options.model_id, &questions)?;

    for attempt in 0..2 {
        let response = gateway.complete_vote(&request, attempt)?;
        if let Some(answers) = parse_batch_answers(&response.text, items.len()) {
            let verdicts = answers
                .into_iter()
                .zip(items)
                .map(|(answer, item)| {
                    let log_score = if options.per_response_log_score {
                        let choice = if answer.is_lfq { "yes" } else { "no" };
                        extract_choice_logprob(&response, choice).ok()
                    } else {
                        response
                            .token_logprobs
                            .as_deref()
                            .and_then(|tokens| logprob_for_span(tokens, &response.text, answer.span.clone()))
                    };
                    Ok(FilterVerdict {
                        record_id: item.record_id.clone(),
                        is_lfq: answer.is_lfq,
                        log_score,
                        model_id: options.model_id.clone(),
                        definition_version: def.version,
                        batch_size_used: items.len(),
                        vote_count: 1,
                    })
                })
                .collect();
            return Ok(verdicts);
        }
    }

    log::warn!(
        "batch of {} produced no aligned answers twice; splitting into singletons",
        items.len()
    );
    Ok(items
        .iter()
        .map(|item| single_outcome(gateway, item, def, options))
        .collect())
}

fn single_outcome(
    gateway: &Gateway,
    item: &QuestionItem,
    def: &LfqDefinition,
    options: &FilterOptions,
) -> VerdictOutcome {
    classify_single(gateway, item, def, &options.model_id).map_err(|e| FilterFailure {
        record_id: item.record_id.clone(),
        reason: e.to_string(),
    })
}

#[derive(Debug, Default)]
pub struct FilterOutcome {
    pub verdicts: Vec<FilterVerdict>,
    pub failures: Vec<FilterFailure>,
}

/// Classify a whole question list, dispatching batches concurrently.
/// Verdicts come back in input order.
pub fn run_filter(
    gateway: &Gateway,
    items: &[QuestionItem],
    options: &FilterOptions,
) -> Result<FilterOutcome> {
    let def = LfqDefinition::shipped(options.version);
    def.validate()?;
    let batch_size = options.batch_size.clamp(1, def.batch_slots());
    let chunks: Vec<&[QuestionItem]> = items.chunks(batch_size).collect();
    let per_chunk: Vec<Result<Vec<VerdictOutcome>>> = chunks
        .par_iter()
        .map(|chunk| classify_batch(gateway, chunk, &def, options))
        .collect();

    let mut outcome = FilterOutcome::default();
    for chunk in per_chunk {
        for item in chunk? {
            match item {
                Ok(verdict) => outcome.verdicts.push(verdict),
                Err(failure) => outcome.failures.push(failure),
            }
        }
    }
    Ok(outcome)
}

/// Reason a verdict was dropped by the confidence gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    BelowThreshold,
    LogScoreMissing,
}

/// Partition verdicts by answer confidence: kept iff `log_score >= threshold`.
/// Verdicts without a log score are dropped with their own reason.
pub fn confidence_filter(
    verdicts: Vec<FilterVerdict>,
    threshold: f64,
) -> Result<(Vec<FilterVerdict>, Vec<(FilterVerdict, DropReason)>)> {
    if threshold > 0.0 {
        return Err(Error::InvalidConfig(format!(
            "confidence threshold is a log-probability and must be <= 0, got {threshold}"
        )));
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for verdict in verdicts {
        match verdict.log_score {
            Some(score) if score >= threshold => kept.push(verdict),
            Some(_) => dropped.push((verdict, DropReason::BelowThreshold)),
            None => dropped.push((verdict, DropReason::LogScoreMissing)),
        }
    }
    Ok((kept, dropped))
}

/// Positive-class evaluation of filter verdicts against gold labels, plus
/// the coverage left after confidence gating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterEval {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Fraction of the original inputs these verdicts cover.
    pub coverage: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

pub fn evaluate_filter(
    verdicts: &[FilterVerdict],
    gold: &BTreeMap<String, bool>,
    total_inputs: usize,
) -> Result<FilterEval> {
    if verdicts.is_empty() {
        return Err(Error::EmptyInput("no verdicts to evaluate".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for verdict in verdicts {
        let label = gold
            .get(&verdict.record_id)
            .ok_or_else(|| Error::InvalidRecord {
                record_id: verdict.record_id.clone(),
                reason: "no gold label".into(),
            })?;
        match (verdict.is_lfq, *label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(FilterEval {
        precision,
        recall,
        f1,
        accuracy: ratio(tp + tn, verdicts.len()),
        coverage: ratio(verdicts.len(), total_inputs.max(verdicts.len())),
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
    })
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
