//! Interpretable preference model: binary logistic regression over
//! rubric-difference features.
//!
//! The model has no intercept and trains on mirror-augmented data (every
//! pair also contributes its answer-swapped, label-flipped copy), so its
//! decisions are antisymmetric under answer swap by construction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rubric::{Rubric, RubricVector};
use crate::types::{short_hash, Choice};

pub const N_FEATURES: usize = 9;

/// Componentwise rubric differences (answer A minus answer B), in canonical
/// rubric order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub deltas: [f64; N_FEATURES],
}

impl FeatureVector {
    pub fn new(deltas: [f64; N_FEATURES]) -> Self {
        FeatureVector { deltas }
    }

    pub fn neg(&self) -> Self {
        FeatureVector {
            deltas: self.deltas.map(|d| -d),
        }
    }
}

pub fn build_features(rubrics_a: &RubricVector, rubrics_b: &RubricVector) -> FeatureVector {
    let a = rubrics_a.as_array();
    let b = rubrics_b.as_array();
    let mut deltas = [0.0; N_FEATURES];
    for i in 0..N_FEATURES {
        deltas[i] = a[i] - b[i];
    }
    FeatureVector { deltas }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceModel {
    /// Weights in canonical rubric order.
    pub weights: [f64; N_FEATURES],
    pub regularization_strength: f64,
    /// Fingerprint of the training data.
    pub trained_on: String,
}

impl PreferenceModel {
    pub fn from_weights(weights: [f64; N_FEATURES]) -> Self {
        PreferenceModel {
            weights,
            regularization_strength: 0.0,
            trained_on: "external".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::UntrainedModel);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::jsonl::write_json_pretty(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let model: PreferenceModel = serde_json::from_str(&text)?;
        model.validate()?;
        Ok(model)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(w: &[f64; N_FEATURES], x: &[f64; N_FEATURES]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// log(1 + exp(z)) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean logistic loss plus `l2 * ||w||^2 / 2` over (x, y in {0,1}) samples.
pub fn logistic_loss(xs: &[[f64; N_FEATURES]], ys: &[f64], l2: f64, w: &[f64; N_FEATURES]) -> f64 {
    let n = xs.len() as f64;
    let data: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| softplus(dot(w, x)) - y * dot(w, x))
        .sum();
    let ridge: f64 = w.iter().map(|wi| wi * wi).sum::<f64>() * l2 / 2.0;
    data / n + ridge
}

/// Analytic gradient of [`logistic_loss`].
pub fn logistic_gradient(
    xs: &[[f64; N_FEATURES]],
    ys: &[f64],
    l2: f64,
    w: &[f64; N_FEATURES],
) -> [f64; N_FEATURES] {
    let n = xs.len() as f64;
    let mut grad = [0.0; N_FEATURES];
    for (x, y) in xs.iter().zip(ys) {
        let residual = sigmoid(dot(w, x)) - y;
        for (g, xi) in grad.iter_mut().zip(x) {
            *g += residual * xi;
        }
    }
    for (g, wi) in grad.iter_mut().zip(w) {
        *g = *g / n + l2 * wi;
    }
    grad
}

/// Duplicate every sample with flipped sign and label so the trained model
/// cannot encode a position preference.
pub fn mirror_augment(
    features: &[FeatureVector],
    labels: &[Choice],
) -> (Vec<[f64; N_FEATURES]>, Vec<f64>) {
    let mut xs = Vec::with_capacity(features.len() * 2);
    let mut ys = Vec::with_capacity(features.len() * 2);
    for (feature, label) in features.iter().zip(labels) {
        let y = match label {
            Choice::A => 1.0,
            Choice::B => 0.0,
        };
        xs.push(feature.deltas);
        ys.push(y);
        xs.push(feature.neg().deltas);
        ys.push(1.0 - y);
    }
    (xs, ys)
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub l2: f64,
    pub max_epochs: usize,
    /// Stop when the gradient norm falls below this.
    pub tolerance: f64,
    /// Divide each feature dimension by its standard deviation before
    /// fitting; weights are mapped back to raw-delta units afterwards.
    pub standardize: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            l2: 1e-4,
            max_epochs: 10_000,
            tolerance: 1e-6,
            standardize: false,
        }
    }
}

/// Fit by full-batch gradient descent with backtracking line search.
///
/// Divergence (a non-finite loss) halves the initial step and restarts, at
/// most five times.
pub fn train(
    features: &[FeatureVector],
    labels: &[Choice],
    options: &TrainOptions,
) -> Result<PreferenceModel> {
    if features.len() != labels.len() {
        return Err(Error::InvalidConfig(format!(
            "{} features vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.len() < 10 {
        return Err(Error::InvalidConfig(format!(
            "need at least 10 training pairs, got {}",
            features.len()
        )));
    }
    if options.l2 < 0.0 {
        return Err(Error::InvalidConfig("l2 must be >= 0".into()));
    }

    let (mut xs, ys) = mirror_augment(features, labels);

    let mut scales = [1.0f64; N_FEATURES];
    if options.standardize {
        for dim in 0..N_FEATURES {
            // Mirror augmentation makes every dimension zero-mean.
            let var: f64 =
                xs.iter().map(|x| x[dim] * x[dim]).sum::<f64>() / xs.len() as f64;
            let sd = var.sqrt();
            if sd > 1e-12 {
                scales[dim] = sd;
            }
        }
        for x in xs.iter_mut() {
            for dim in 0..N_FEATURES {
                x[dim] /= scales[dim];
            }
        }
    }

    let mut initial_step = 1.0f64;
    let mut weights = [0.0; N_FEATURES];
    'restarts: for restart in 0..=5 {
        weights = [0.0; N_FEATURES];
        let mut loss = logistic_loss(&xs, &ys, options.l2, &weights);
        for _ in 0..options.max_epochs {
            let grad = logistic_gradient(&xs, &ys, options.l2, &weights);
            let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if grad_norm <= options.tolerance {
                break;
            }
            // Backtracking line search (Armijo condition).
            let mut step = initial_step;
            let mut accepted = false;
            for _ in 0..60 {
                let mut candidate = weights;
                for (c, g) in candidate.iter_mut().zip(&grad) {
                    *c -= step * g;
                }
                let candidate_loss = logistic_loss(&xs, &ys, options.l2, &candidate);
                if !candidate_loss.is_finite() {
                    if restart < 5 {
                        initial_step /= 2.0;
                        continue 'restarts;
                    }
                    return Err(Error::TrainingDiverged(
                        "loss non-finite after 5 restarts".into(),
                    ));
                }
                if candidate_loss <= loss - 1e-4 * step * grad_norm * grad_norm {
                    weights = candidate;
                    loss = candidate_loss;
                    accepted = true;
                    break;
                }
                step /= 2.0;
            }
            if !accepted {
                // Step underflowed: we are at numerical convergence.
                break;
            }
        }
        if weights.iter().all(|w| w.is_finite()) {
            break 'restarts;
        }
    }

    if options.standardize {
        for dim in 0..N_FEATURES {
            weights[dim] /= scales[dim];
        }
    }

    let model = PreferenceModel {
        weights,
        regularization_strength: options.l2,
        trained_on: dataset_fingerprint(features, labels),
    };
    model.validate()?;
    Ok(model)
}

/// 16-hex fingerprint of the (features, labels) training set.
pub fn dataset_fingerprint(features: &[FeatureVector], labels: &[Choice]) -> String {
    let blob = serde_json::to_string(&(features, labels)).unwrap_or_default();
    short_hash(&[&blob])
}

/// Probability that answer A is preferred.
pub fn predict(model: &PreferenceModel, features: &FeatureVector) -> f64 {
    sigmoid(dot(&model.weights, &features.deltas))
}

/// Hard decision with the fixed tie-break: probability exactly 0.5 decides
/// A and is flagged.
pub fn decide(model: &PreferenceModel, features: &FeatureVector) -> (Choice, bool) {
    let p = predict(model, features);
    if p > 0.5 {
        (Choice::A, false)
    } else if p < 0.5 {
        (Choice::B, false)
    } else {
        (Choice::A, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub rubric: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub rows: Vec<WeightRow>,
    pub regularization_strength: f64,
    pub trained_on: String,
}

/// All nine named weights in canonical rubric order, plus the l2 strength
/// and the dataset fingerprint.
pub fn export_weights(model: &PreferenceModel) -> Result<WeightTable> {
    model.validate()?;
    Ok(WeightTable {
        rows: Rubric::ALL
            .iter()
            .zip(&model.weights)
            .map(|(rubric, weight)| WeightRow {
                rubric: rubric.display_name().to_string(),
                weight: *weight,
            })
            .collect(),
        regularization_strength: model.regularization_strength,
        trained_on: model.trained_on.clone(),
    })
}
