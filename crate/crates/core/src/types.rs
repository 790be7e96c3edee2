//! Shared domain types used across pipeline stages.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Which of the two candidate answers a human or judge preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

impl Choice {
    pub fn opposite(self) -> Choice {
        match self {
            Choice::A => Choice::B,
            Choice::B => Choice::A,
        }
    }
}

impl std::fmt::Display for Choice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Choice::A => write!(f, "A"),
            Choice::B => write!(f, "B"),
        }
    }
}

/// Answer slot within a preference record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnswerSlot {
    A,
    B,
}

/// Accuracy / precision / recall / F1 bundle shared by the benchmark and the
/// audits. Precision, recall, and F1 are macro-averaged over the two choice
/// classes when produced by the judge benchmark, and positive-class scores
/// when produced by the filter evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    pub fn componentwise(&self, other: &Metrics, f: impl Fn(f64, f64) -> f64) -> Metrics {
        Metrics {
            accuracy: f(self.accuracy, other.accuracy),
            precision: f(self.precision, other.precision),
            recall: f(self.recall, other.recall),
            f1: f(self.f1, other.f1),
        }
    }
}

/// Hex-encoded SHA-256 of the given parts, joined with a NUL separator so
/// that distinct part boundaries cannot collide.
pub fn sha256_hex(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0u8]);
        }
        hasher.update(part.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// First 16 hex digits of [`sha256_hex`]; used for stable record ids.
pub fn short_hash(parts: &[&str]) -> String {
    sha256_hex(parts)[..16].to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_boundary_sensitive() {
        assert_eq!(sha256_hex(&["a", "b"]), sha256_hex(&["a", "b"]));
        assert_ne!(sha256_hex(&["ab"]), sha256_hex(&["a", "b"]));
        assert_eq!(short_hash(&["x"]).len(), 16);
    }
}
