//! Score normalization: min-max rescaling and ordinal-to-continuous
//! conversion.

use crate::error::{Error, Result};

/// Affine map of `x` from `[native_min, native_max]` onto `[1, 5]`.
pub fn rescale_minmax(x: f64, native_min: f64, native_max: f64) -> Result<f64> {
    if !(native_min < native_max) {
        return Err(Error::InvalidConfig(format!(
            "invalid native bounds [{native_min}, {native_max}]"
        )));
    }
    if x < native_min || x > native_max {
        return Err(Error::OutOfBounds {
            value: x,
            min: native_min,
            max: native_max,
        });
    }
    Ok(1.0 + 4.0 * (x - native_min) / (native_max - native_min))
}

/// [`rescale_minmax`] with inputs clamped into the native bounds first.
pub fn rescale_minmax_clamped(x: f64, native_min: f64, native_max: f64) -> Result<f64> {
    rescale_minmax(x.clamp(native_min, native_max), native_min, native_max)
}

/// Convert three ordinal-category logits (Negative, Neutral, Positive) into
/// a continuous 1-5 score: softmax the logits, take the expected category
/// index as a latent value in [0, 2], and rescale.
pub fn ordinal_to_continuous(logits: [f64; 3]) -> Result<f64> {
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidConfig("logits must be finite".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    let latent = exp[1] / sum + 2.0 * exp[2] / sum;
    rescale_minmax(latent.clamp(0.0, 2.0), 0.0, 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_map_exactly() {
        assert_eq!(rescale_minmax(0.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(rescale_minmax(1.0, 0.0, 1.0).unwrap(), 5.0);
        assert_eq!(rescale_minmax(0.5, 0.0, 1.0).unwrap(), 3.0);
    }

    #[test]
    fn out_of_bounds_errors_unless_clamped() {
        assert!(rescale_minmax(1.5, 0.0, 1.0).is_err());
        assert_eq!(rescale_minmax_clamped(1.5, 0.0, 1.0).unwrap(), 5.0);
    }

    #[test]
    fn saturated_negative_logits_score_one() {
        let got = ordinal_to_continuous([50.0, -50.0, -50.0]).unwrap();
        assert!((got - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equal_logits_hit_the_midpoint() {
        let got = ordinal_to_continuous([0.3, 0.3, 0.3]).unwrap();
        assert!((got - 3.0).abs() < 1e-12);
    }

    #[test]
    fn worked_logits_example() {
        // softmax(0,1,2) = (0.0900, 0.2447, 0.6652); latent = 1.5752 -> 4.150.
        let got = ordinal_to_continuous([0.0, 1.0, 2.0]).unwrap();
        assert!((got - 4.150420766).abs() < 1e-3);
    }

    #[test]
    fn shift_invariance() {
        let a = ordinal_to_continuous([0.2, -1.3, 0.8]).unwrap();
        let b = ordinal_to_continuous([100.2, 98.7, 100.8]).unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}
