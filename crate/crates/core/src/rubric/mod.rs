//! Nine-rubric answer quality scoring with normalization onto [1, 5].

pub mod grammar;
pub mod lexical;
pub mod prompted;
pub mod scale;
pub mod specificity;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::Gateway;

pub use grammar::{GrammarChecker, RuleGrammar, ServiceGrammar, DEFAULT_E_MAX};
pub use lexical::{lexical_density, lexical_density_with, PosTagger, RuleTagger};
pub use prompted::{binary_flag, factuality_score, prompted_score, FactualityOutcome, PromptedRubric};
pub use scale::{ordinal_to_continuous, rescale_minmax, rescale_minmax_clamped};
pub use specificity::{PromptedSpecificity, ServiceSpecificity, SpecificityScorer};

/// The nine rubrics, in the canonical feature order used everywhere
/// downstream (weight tables, feature vectors, reports).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rubric {
    Specificity,
    Grammar,
    Fluency,
    Completeness,
    Coherence,
    Relevance,
    Conciseness,
    UseOfExamples,
    Factuality,
}

impl Rubric {
    pub const ALL: [Rubric; 9] = [
        Rubric::Specificity,
        Rubric::Grammar,
        Rubric::Fluency,
        Rubric::Completeness,
        Rubric::Coherence,
        Rubric::Relevance,
        Rubric::Conciseness,
        Rubric::UseOfExamples,
        Rubric::Factuality,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Rubric::Specificity => "specificity",
            Rubric::Grammar => "grammar",
            Rubric::Fluency => "fluency",
            Rubric::Completeness => "completeness",
            Rubric::Coherence => "coherence",
            Rubric::Relevance => "relevance",
            Rubric::Conciseness => "conciseness",
            Rubric::UseOfExamples => "use_of_examples",
            Rubric::Factuality => "factuality",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            Rubric::Specificity => "Specificity",
            Rubric::Grammar => "Grammar",
            Rubric::Fluency => "Fluency",
            Rubric::Completeness => "Completeness",
            Rubric::Coherence => "Coherence",
            Rubric::Relevance => "Relevance",
            Rubric::Conciseness => "Conciseness",
            Rubric::UseOfExamples => "Use of Examples",
            Rubric::Factuality => "Factuality",
        }
    }
}

/// Where one rubric's value came from: the scorer and the raw value on the
/// scorer's native scale, kept so normalization stays invertible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scorer: String,
    pub raw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Nine normalized rubric scores for a single answer. All continuous fields
/// live on [1, 5]; `use_of_example` stays binary because it is categorical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricVector {
    pub specificity: f64,
    pub grammar: f64,
    pub fluency: f64,
    pub completeness: f64,
    pub coherence: f64,
    pub relevance: f64,
    pub conciseness: f64,
    pub use_of_example: f64,
    pub factuality: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, Provenance>,
}

impl RubricVector {
    pub fn get(&self, rubric: Rubric) -> f64 {
        match rubric {
            Rubric::Specificity => self.specificity,
            Rubric::Grammar => self.grammar,
            Rubric::Fluency => self.fluency,
            Rubric::Completeness => self.completeness,
            Rubric::Coherence => self.coherence,
            Rubric::Relevance => self.relevance,
            Rubric::Conciseness => self.conciseness,
            Rubric::UseOfExamples => self.use_of_example,
            Rubric::Factuality => self.factuality,
        }
    }

    /// Scores in canonical rubric order.
    pub fn as_array(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for (slot, rubric) in out.iter_mut().zip(Rubric::ALL) {
            *slot = self.get(rubric);
        }
        out
    }

    pub fn from_array(values: [f64; 9]) -> Self {
        RubricVector {
            specificity: values[0],
            grammar: values[1],
            fluency: values[2],
            completeness: values[3],
            coherence: values[4],
            relevance: values[5],
            conciseness: values[6],
            use_of_example: values[7],
            factuality: values[8],
            provenance: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for rubric in Rubric::ALL {
            let value = self.get(rubric);
            if rubric == Rubric::UseOfExamples {
                if value != 0.0 && value != 1.0 {
                    return Err(Error::ScoreOutOfRange {
                        lo: 0.0,
                        hi: 1.0,
                        got: value,
                    });
                }
                continue;
            }
            if !(1.0 - 1e-9..=5.0 + 1e-9).contains(&value) {
                return Err(Error::ScoreOutOfRange {
                    lo: 1.0,
                    hi: 5.0,
                    got: value,
                });
            }
        }
        Ok(())
    }
}

/// Backend selection for the specificity rubric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "endpoint")]
pub enum SpecificityBackend {
    Service(String),
    Prompted,
}

/// Backend selection for the grammar rubric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "endpoint")]
pub enum GrammarBackend {
    Service(String),
    Rules,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricConfig {
    /// Model used by every prompted scorer.
    pub model_id: String,
    pub specificity: SpecificityBackend,
    pub grammar: GrammarBackend,
    /// Error-rate cap for the grammar score (errors per 100 words).
    pub grammar_e_max: f64,
    /// Clamp raw values into their native bounds instead of erroring.
    pub clamp_out_of_range: bool,
}

impl RubricConfig {
    pub fn offline(model_id: impl Into<String>) -> Self {
        RubricConfig {
            model_id: model_id.into(),
            specificity: SpecificityBackend::Prompted,
            grammar: GrammarBackend::Rules,
            grammar_e_max: DEFAULT_E_MAX,
            clamp_out_of_range: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_id.is_empty() {
            return Err(Error::InvalidConfig("rubric model_id is empty".into()));
        }
        if !(self.grammar_e_max > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "grammar_e_max must be > 0, got {}",
                self.grammar_e_max
            )));
        }
        Ok(())
    }
}

/// Computes full rubric vectors through the configured backends.
pub struct RubricEngine<'g> {
    gateway: &'g Gateway,
    config: RubricConfig,
}

impl<'g> RubricEngine<'g> {
    pub fn new(gateway: &'g Gateway, config: RubricConfig) -> Result<Self> {
        config.validate()?;
        Ok(RubricEngine { gateway, config })
    }

    pub fn config(&self) -> &RubricConfig {
        &self.config
    }

    fn rescale(&self, x: f64, lo: f64, hi: f64) -> Result<f64> {
        if self.config.clamp_out_of_range {
            rescale_minmax_clamped(x, lo, hi)
        } else {
            rescale_minmax(x, lo, hi)
        }
    }

    /// Score all nine rubrics for one answer. Any sub-scorer failure rejects
    /// the whole vector, attributed to its rubric.
    pub fn score_answer(&self, question: &str, answer: &str) -> Result<RubricVector> {
        let model = self.config.model_id.as_str();
        let attribute = |rubric: Rubric| {
            move |e: Error| match e {
                e @ Error::RubricFailed { .. } => e,
                other => Error::RubricFailed {
                    rubric: rubric.name().into(),
                    reason: other.to_string(),
                },
            }
        };

        let mut provenance = BTreeMap::new();
        let mut note_provenance =
            |rubric: Rubric, scorer: &str, raw: f64, note: Option<String>| {
                provenance.insert(
                    rubric.name().to_string(),
                    Provenance {
                        scorer: scorer.to_string(),
                        raw,
                        note,
                    },
                );
            };

        // Specificity: three ordinal logits -> latent on [0, 2] -> [1, 5].
        let logits = match &self.config.specificity {
            SpecificityBackend::Service(endpoint) => ServiceSpecificity::new(endpoint)
                .logits(question, answer)
                .map_err(attribute(Rubric::Specificity))?,
            SpecificityBackend::Prompted => PromptedSpecificity::new(self.gateway, model)
                .logits(question, answer)
                .map_err(attribute(Rubric::Specificity))?,
        };
        let specificity =
            ordinal_to_continuous(logits).map_err(attribute(Rubric::Specificity))?;
        let scorer_name = match &self.config.specificity {
            SpecificityBackend::Service(_) => "service",
            SpecificityBackend::Prompted => "prompted",
        };
        note_provenance(Rubric::Specificity, scorer_name, (specificity - 1.0) / 2.0, None);

        // Grammar: error rate mapped onto [1, 5]; already target scale.
        let words = lexical::tokenize_words(answer).len();
        let errors = match &self.config.grammar {
            GrammarBackend::Service(endpoint) => ServiceGrammar::new(endpoint)
                .error_count(answer)
                .map_err(attribute(Rubric::Grammar))?,
            GrammarBackend::Rules => RuleGrammar
                .error_count(answer)
                .map_err(attribute(Rubric::Grammar))?,
        };
        let grammar = grammar::grammar_score_from_counts(errors, words, self.config.grammar_e_max)
            .map_err(attribute(Rubric::Grammar))?;
        let grammar_scorer = match &self.config.grammar {
            GrammarBackend::Service(_) => "service",
            GrammarBackend::Rules => "rules",
        };
        note_provenance(
            Rubric::Grammar,
            grammar_scorer,
            errors as f64 / words.max(1) as f64 * 100.0,
            None,
        );

        // Fluency: prompted on 1-3, rescaled.
        let fluency_raw = prompted_score(self.gateway, question, answer, PromptedRubric::Fluency, model)
            .map_err(attribute(Rubric::Fluency))?;
        let fluency = self
            .rescale(fluency_raw, 1.0, 3.0)
            .map_err(attribute(Rubric::Fluency))?;
        note_provenance(Rubric::Fluency, "prompted", fluency_raw, None);

        // Completeness, coherence, relevance: prompted, already 1-5.
        let completeness = prompted_score(
            self.gateway,
            question,
            answer,
            PromptedRubric::Completeness,
            model,
        )
        .map_err(attribute(Rubric::Completeness))?;
        note_provenance(Rubric::Completeness, "prompted", completeness, None);
        let coherence =
            prompted_score(self.gateway, question, answer, PromptedRubric::Coherence, model)
                .map_err(attribute(Rubric::Coherence))?;
        note_provenance(Rubric::Coherence, "prompted", coherence, None);
        let relevance =
            prompted_score(self.gateway, question, answer, PromptedRubric::Relevance, model)
                .map_err(attribute(Rubric::Relevance))?;
        note_provenance(Rubric::Relevance, "prompted", relevance, None);

        // Conciseness: lexical density on [0, 1], rescaled.
        let density =
            lexical_density(answer).map_err(attribute(Rubric::Conciseness))?;
        let conciseness = self
            .rescale(density, 0.0, 1.0)
            .map_err(attribute(Rubric::Conciseness))?;
        note_provenance(Rubric::Conciseness, "native", density, None);

        // Use of example: binary, exempt from rescaling.
        let example_flag = binary_flag(self.gateway, question, answer, model)
            .map_err(attribute(Rubric::UseOfExamples))?;
        note_provenance(Rubric::UseOfExamples, "prompted", example_flag as f64, None);

        // Factuality: supported-claim fraction on [0, 1], rescaled.
        let factuality_outcome = factuality_score(self.gateway, answer, model)
            .map_err(attribute(Rubric::Factuality))?;
        let factuality = self
            .rescale(factuality_outcome.score, 0.0, 1.0)
            .map_err(attribute(Rubric::Factuality))?;
        note_provenance(
            Rubric::Factuality,
            "prompted-claims",
            factuality_outcome.score,
            factuality_outcome.no_claims.then(|| "no-claims".to_string()),
        );

        let vector = RubricVector {
            specificity,
            grammar,
            fluency,
            completeness,
            coherence,
            relevance,
            conciseness,
            use_of_example: example_flag as f64,
            factuality,
            provenance,
        };
        vector.validate()?;
        Ok(vector)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockMatcher, MockRule, MockTransport};

    fn full_mock_gateway() -> Gateway {
        Gateway::new(Box::new(MockTransport::new(vec![
            MockRule::text(MockMatcher::Contains("rate the specificity"), "Positive"),
            MockRule::text(MockMatcher::Contains("Fluency (1-3)"), "3"),
            MockRule::text(MockMatcher::Contains("Completeness Evaluation Form"), "4"),
            MockRule::text(MockMatcher::Contains("- Coherence:"), "5"),
            MockRule::text(MockMatcher::Contains("- Relevance:"), "4"),
            MockRule::text(MockMatcher::Contains("concrete example"), "yes"),
            MockRule::text(
                MockMatcher::Contains("Extract every verifiable factual claim"),
                "- only claim",
            ),
            MockRule::text(MockMatcher::Contains("only claim"), "supported"),
        ])))
    }

    #[test]
    fn full_vector_assembles_and_validates() {
        let gateway = full_mock_gateway();
        let engine = RubricEngine::new(&gateway, RubricConfig::offline("m")).unwrap();
        let vector = engine
            .score_answer(
                "Why does ice float on water?",
                "Ice floats because freezing expands water. For example, bottles burst in the freezer.",
            )
            .unwrap();
        vector.validate().unwrap();
        assert_eq!(vector.fluency, 5.0); // native 3 on 1-3 rescales to 5
        assert_eq!(vector.use_of_example, 1.0);
        assert_eq!(vector.factuality, 5.0); // 1/1 supported -> raw 1.0 -> 5
        assert_eq!(vector.coherence, 5.0);
        assert_eq!(vector.provenance["fluency"].raw, 3.0);
    }

    #[test]
    fn sub_scorer_failure_rejects_the_whole_vector() {
        // No rule for the coherence prompt: that rubric hard-fails.
        let gateway = Gateway::new(Box::new(MockTransport::new(vec![
            MockRule::text(MockMatcher::Contains("rate the specificity"), "Neutral"),
            MockRule::text(MockMatcher::Contains("Fluency (1-3)"), "2"),
            MockRule::text(MockMatcher::Contains("Completeness Evaluation Form"), "4"),
        ])));
        let engine = RubricEngine::new(&gateway, RubricConfig::offline("m")).unwrap();
        let err = engine.score_answer("q", "some answer text").unwrap_err();
        match err {
            Error::RubricFailed { rubric, .. } => assert_eq!(rubric, "coherence"),
            other => panic!("expected rubric failure, got {other}"),
        }
    }

    #[test]
    fn midpoint_conciseness_rescales_to_three() {
        // raw 0.5 on [0,1] -> 3.0
        assert_eq!(rescale_minmax(0.5, 0.0, 1.0).unwrap(), 3.0);
        // factuality raw 0.25 -> 2.0
        assert_eq!(rescale_minmax(0.25, 0.0, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn vector_array_round_trip_keeps_order() {
        let values = [1.0, 2.0, 3.0, 4.0, 5.0, 1.5, 2.5, 1.0, 3.5];
        let vector = RubricVector::from_array(values);
        assert_eq!(vector.as_array(), values);
        assert_eq!(vector.use_of_example, 1.0);
    }
}
