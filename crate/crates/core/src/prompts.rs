//! Shipped prompt catalog.
//!
//! Templates use `{}` as the slot marker. The catalog embeds the shipped
//! files at compile time; an override directory can shadow individual
//! prompts by filename for experimentation.

use std::collections::HashMap;
use std::path::PathBuf;

use crate::error::{Error, Result};

pub const LFQ_INITIAL: &str = include_str!("../prompts/lfq_initial.txt");
pub const LFQ_UPDATED: &str = include_str!("../prompts/lfq_updated.txt");
pub const LFQ_BATCH10: &str = include_str!("../prompts/lfq_batch10.txt");
pub const GEVAL_COHERENCE: &str = include_str!("../prompts/geval_coherence.txt");
pub const GEVAL_RELEVANCE: &str = include_str!("../prompts/geval_relevance.txt");
pub const GEVAL_FLUENCY: &str = include_str!("../prompts/geval_fluency.txt");
pub const GEVAL_COMPLETENESS: &str = include_str!("../prompts/geval_completeness.txt");
pub const USE_OF_EXAMPLE: &str = include_str!("../prompts/use_of_example.txt");
pub const CLAIMS_EXTRACT: &str = include_str!("../prompts/claims_extract.txt");
pub const CLAIMS_VERIFY: &str = include_str!("../prompts/claims_verify.txt");
pub const JUDGE_PLAIN: &str = include_str!("../prompts/judge_plain.txt");
pub const JUDGE_RUBRIC: &str = include_str!("../prompts/judge_rubric.txt");
pub const SPECIFICITY_PROMPTED: &str = include_str!("../prompts/specificity_prompted.txt");

const SLOT: &str = "{}";

/// Number of `{}` slots in a template.
pub fn slot_count(template: &str) -> usize {
    template.matches(SLOT).count()
}

/// Fill the template's `{}` slots left to right. Slot markers inside the
/// substituted values are not re-scanned.
pub fn fill_slots(template: &str, values: &[&str]) -> Result<String> {
    let parts: Vec<&str> = template.split(SLOT).collect();
    if parts.len() != values.len() + 1 {
        return Err(Error::SlotMismatch {
            expected: values.len(),
            found: parts.len() - 1,
        });
    }
    let mut out = String::with_capacity(template.len() + values.iter().map(|v| v.len()).sum::<usize>());
    for (part, value) in parts.iter().zip(values.iter()) {
        out.push_str(part);
        out.push_str(value);
    }
    out.push_str(parts.last().unwrap());
    Ok(out)
}

/// Prompt lookup with optional on-disk overrides.
#[derive(Debug, Clone, Default)]
pub struct PromptCatalog {
    override_dir: Option<PathBuf>,
    cache: HashMap<String, String>,
}

impl PromptCatalog {
    pub fn shipped() -> Self {
        Self::default()
    }

    /// Shadow shipped prompts with files from `dir` (matched by filename).
    pub fn with_override_dir(dir: impl Into<PathBuf>) -> Self {
        PromptCatalog {
            override_dir: Some(dir.into()),
            cache: HashMap::new(),
        }
    }

    pub fn get(&self, name: &str) -> Result<String> {
        if let Some(text) = self.cache.get(name) {
            return Ok(text.clone());
        }
        if let Some(dir) = &self.override_dir {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                return std::fs::read_to_string(&path)
                    .map_err(|e| Error::io(path.display().to_string(), e));
            }
        }
        match name {
            "lfq_initial" => Ok(LFQ_INITIAL.to_string()),
            "lfq_updated" => Ok(LFQ_UPDATED.to_string()),
            "lfq_batch10" => Ok(LFQ_BATCH10.to_string()),
            "geval_coherence" => Ok(GEVAL_COHERENCE.to_string()),
            "geval_relevance" => Ok(GEVAL_RELEVANCE.to_string()),
            "geval_fluency" => Ok(GEVAL_FLUENCY.to_string()),
            "geval_completeness" => Ok(GEVAL_COMPLETENESS.to_string()),
            "use_of_example" => Ok(USE_OF_EXAMPLE.to_string()),
            "claims_extract" => Ok(CLAIMS_EXTRACT.to_string()),
            "claims_verify" => Ok(CLAIMS_VERIFY.to_string()),
            "judge_plain" => Ok(JUDGE_PLAIN.to_string()),
            "judge_rubric" => Ok(JUDGE_RUBRIC.to_string()),
            "specificity_prompted" => Ok(SPECIFICITY_PROMPTED.to_string()),
            other => Err(Error::InvalidConfig(format!("unknown prompt: {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_templates_have_declared_slot_counts() {
        assert_eq!(slot_count(LFQ_INITIAL), 1);
        assert_eq!(slot_count(LFQ_UPDATED), 1);
        assert_eq!(slot_count(LFQ_BATCH10), 10);
        assert_eq!(slot_count(GEVAL_COHERENCE), 2);
        assert_eq!(slot_count(GEVAL_RELEVANCE), 2);
        assert_eq!(slot_count(GEVAL_FLUENCY), 1);
        assert_eq!(slot_count(GEVAL_COMPLETENESS), 2);
        assert_eq!(slot_count(USE_OF_EXAMPLE), 2);
        assert_eq!(slot_count(CLAIMS_EXTRACT), 1);
        assert_eq!(slot_count(CLAIMS_VERIFY), 1);
        assert_eq!(slot_count(JUDGE_PLAIN), 3);
        assert_eq!(slot_count(JUDGE_RUBRIC), 3);
        assert_eq!(slot_count(SPECIFICITY_PROMPTED), 2);
    }

    #[test]
    fn fill_is_left_to_right_and_does_not_rescan() {
        let filled = fill_slots("a {} b {}", &["{}", "y"]).unwrap();
        assert_eq!(filled, "a {} b y");
    }

    #[test]
    fn fill_rejects_wrong_arity() {
        let err = fill_slots("{} {}", &["only one"]).unwrap_err();
        assert!(matches!(err, Error::SlotMismatch { expected: 1, found: 2 }));
    }
}
