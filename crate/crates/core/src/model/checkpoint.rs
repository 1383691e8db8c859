use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureNorm, MlpModel, OptimizerState};
use crate::error::Result;

/// Serialised model snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub layer_sizes: Vec<usize>,
    /// Row-major `fan_out × fan_in` per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub optimizer_state: OptimizerState,
    pub epoch: usize,
    pub seed: u64,
    /// Input standardisation the model was trained with.
    pub feature_norm: Option<FeatureNorm>,
}

impl Checkpoint {
    pub fn capture(
        model: &MlpModel,
        optimizer_state: &OptimizerState,
        epoch: usize,
        seed: u64,
        feature_norm: Option<FeatureNorm>,
    ) -> Self {
        Checkpoint {
            layer_sizes: model.layer_sizes().to_vec(),
            weights: model.weights().to_vec(),
            biases: model.biases().to_vec(),
            optimizer_state: optimizer_state.clone(),
            epoch,
            seed,
            feature_norm,
        }
    }

    pub fn model(&self) -> Result<MlpModel> {
        MlpModel::from_parts(self.layer_sizes.clone(), self.weights.clone(), self.biases.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
