//! Lexical density: the share of content words among all words.

use std::collections::HashSet;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Decides whether a (lowercased) word is a content word: noun, non-auxiliary
/// verb, adjective, or adverb.
pub trait PosTagger: Send + Sync {
    fn is_content_word(&self, word: &str) -> bool;
}

/// Closed-class stoplist tagger: everything outside the function-word list
/// (determiners, prepositions, conjunctions, pronouns, auxiliaries,
/// particles, wh-words, contraction fragments) counts as content.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleTagger;

fn function_words() -> &'static HashSet<&'static str> {
    static WORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| {
        [
            // determiners and quantifiers
            "a", "an", "the", "this", "that", "these", "those", "all", "each", "every", "some",
            "any", "few", "more", "most", "much", "many", "such", "same", "other", "another",
            "either", "neither", "both", "several", "no", "enough",
            // prepositions
            "of", "in", "on", "at", "by", "for", "with", "without", "about", "against",
            "between", "among", "into", "onto", "through", "throughout", "during", "before",
            "after", "above", "below", "to", "from", "up", "down", "out", "off", "over",
            "under", "within", "upon", "via", "per", "despite", "toward", "towards", "near",
            "since", "until", "across", "along", "around", "behind", "beside", "besides",
            "beyond", "except", "inside", "outside", "past", "underneath",
            // conjunctions and complementizers
            "and", "but", "or", "nor", "so", "yet", "if", "because", "as", "while",
            "although", "though", "than", "whether", "unless", "whereas", "once",
            // pronouns
            "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them",
            "my", "your", "his", "its", "our", "their", "mine", "yours", "hers", "ours",
            "theirs", "myself", "yourself", "himself", "herself", "itself", "ourselves",
            "yourselves", "themselves", "one", "ones", "someone", "anyone", "everyone",
            "something", "anything", "everything", "nothing", "nobody", "somebody",
            "everybody",
            // wh-words
            "who", "whom", "whose", "which", "what", "when", "where", "why", "how",
            "whenever", "wherever", "whatever", "whichever", "whoever",
            // auxiliaries and copulas
            "is", "am", "are", "was", "were", "be", "been", "being", "have", "has", "had",
            "having", "do", "does", "did", "doing", "will", "would", "shall", "should",
            "can", "could", "may", "might", "must", "ought", "need", "dare",
            // negation and existential
            "not", "there",
            // contraction fragments left by tokenization (don't -> don + t)
            "s", "t", "d", "ll", "m", "re", "ve", "don", "doesn", "didn", "isn", "aren",
            "wasn", "weren", "hasn", "haven", "hadn", "won", "wouldn", "shan", "shouldn",
            "couldn", "mightn", "mustn", "needn", "ain", "cannot",
        ]
        .into_iter()
        .collect()
    })
}

impl PosTagger for RuleTagger {
    fn is_content_word(&self, word: &str) -> bool {
        !function_words().contains(word)
    }
}

/// Lowercased alphanumeric word tokens.
pub fn tokenize_words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// content_words / total_words in [0, 1]. Errors on zero words.
pub fn lexical_density_with(text: &str, tagger: &dyn PosTagger) -> Result<f64> {
    let words = tokenize_words(text);
    if words.is_empty() {
        return Err(Error::RubricFailed {
            rubric: "conciseness".into(),
            reason: "text tokenizes to zero words".into(),
        });
    }
    let content = words
        .iter()
        .filter(|w| tagger.is_content_word(w))
        .count();
    Ok(content as f64 / words.len() as f64)
}

/// [`lexical_density_with`] under the default rule tagger.
pub fn lexical_density(text: &str) -> Result<f64> {
    lexical_density_with(text, &RuleTagger)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_function_words_score_zero() {
        assert_eq!(lexical_density("of the and or").unwrap(), 0.0);
    }

    #[test]
    fn all_content_words_score_one() {
        assert_eq!(lexical_density("cats chase mice").unwrap(), 1.0);
    }

    #[test]
    fn mixed_sentence() {
        let got = lexical_density("The cat sat").unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_errors() {
        assert!(lexical_density("  ... !! ").is_err());
    }

    #[test]
    fn density_invariant_under_duplication() {
        let text = "The quick brown fox jumps over the lazy dog because it can";
        let once = lexical_density(text).unwrap();
        let twice = lexical_density(&format!("{text} {text}")).unwrap();
        assert!((once - twice).abs() < 1e-12);
    }
}
