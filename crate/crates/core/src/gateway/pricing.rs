//! Model pricing table and cost estimation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-model USD prices per million tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPricing {
    pub model_id: String,
    pub usd_per_million_input: f64,
    pub usd_per_million_output: f64,
}

impl ModelPricing {
    pub fn new(model_id: impl Into<String>, input: f64, output: f64) -> Result<Self> {
        if input < 0.0 || output < 0.0 {
            return Err(Error::InvalidConfig("prices must be >= 0".into()));
        }
        Ok(ModelPricing {
            model_id: model_id.into(),
            usd_per_million_input: input,
            usd_per_million_output: output,
        })
    }
}

/// `usd = input/1e6 * price_in + output/1e6 * price_out`. Total function.
pub fn estimate_cost(input_tokens: u64, output_tokens: u64, pricing: &ModelPricing) -> f64 {
    input_tokens as f64 / 1e6 * pricing.usd_per_million_input
        + output_tokens as f64 / 1e6 * pricing.usd_per_million_output
}

/// Editable pricing table backed by `pricing.json` (model id -> two prices).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PricingTable {
    models: BTreeMap<String, (f64, f64)>,
}

impl PricingTable {
    /// Prices quoted for the models the pipeline defaults to.
    pub fn builtin() -> Self {
        let mut models = BTreeMap::new();
        models.insert("llama-4-scout".to_string(), (0.08, 0.30));
        models.insert("gpt-4o".to_string(), (5.0, 15.0));
        PricingTable { models }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let models: BTreeMap<String, (f64, f64)> = serde_json::from_str(&text)?;
        Ok(PricingTable { models })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.models)?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn get(&self, model_id: &str) -> Option<ModelPricing> {
        self.models.get(model_id).map(|(i, o)| ModelPricing {
            model_id: model_id.to_string(),
            usd_per_million_input: *i,
            usd_per_million_output: *o,
        })
    }

    pub fn insert(&mut self, pricing: ModelPricing) {
        self.models.insert(
            pricing.model_id,
            (pricing.usd_per_million_input, pricing.usd_per_million_output),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn llama() -> ModelPricing {
        PricingTable::builtin().get("llama-4-scout").unwrap()
    }

    #[test]
    fn one_million_input_tokens_costs_the_input_price() {
        assert!((estimate_cost(1_000_000, 0, &llama()) - 0.08).abs() < 1e-12);
    }

    #[test]
    fn zero_tokens_cost_nothing() {
        assert_eq!(estimate_cost(0, 0, &llama()), 0.0);
    }

    #[test]
    fn mixed_token_arithmetic() {
        let gpt4o = PricingTable::builtin().get("gpt-4o").unwrap();
        assert!((estimate_cost(2_000_000, 1_000_000, &gpt4o) - 25.0).abs() < 1e-9);
    }

    #[test]
    fn cost_is_linear_in_tokens() {
        let p = llama();
        let a = estimate_cost(123_456, 789, &p);
        let b = estimate_cost(1_000, 2_000, &p);
        let sum = estimate_cost(124_456, 2_789, &p);
        assert!((a + b - sum).abs() < 1e-12);
    }
}
