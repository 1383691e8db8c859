//! JSON run configuration.
//!
//! Every field is optional; missing fields take the defaults below and unknown
//! keys are rejected. `key.path=value` overrides are applied to the JSON tree
//! before it is typed, so they can reach any nested field. Override values are
//! parsed as JSON when possible (`3`, `true`, `[1,2]`) and as strings otherwise.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::align::AlignmentParams;
use crate::audio::{AugmentConfig, DatasetConfig, FeatureConfig};
use crate::error::{DpdaError, Result};
use crate::model::OptimizerKind;
use crate::surface::ProbeConfig;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { hidden: vec![32, 16] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size_per_path: usize,
    pub epochs_max: usize,
    pub early_stop_patience: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub single_path: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            batch_size_per_path: t.batch_size_per_path,
            epochs_max: t.epochs_max,
            early_stop_patience: t.early_stop_patience,
            lr: t.lr,
            optimizer: t.optimizer,
            single_path: t.single_path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradVacSection {
    pub beta: f64,
    pub phi_init: f64,
}

impl Default for GradVacSection {
    fn default() -> Self {
        let p = AlignmentParams::default();
        GradVacSection { beta: p.gradvac_beta, phi_init: p.gradvac_phi_init }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaGradSection {
    pub c: f64,
}

impl Default for CaGradSection {
    fn default() -> Self {
        CaGradSection { c: AlignmentParams::default().cagrad_c }
    }
}

/// The whole run description, as written to `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<String>,
    /// Alignment strategy name: `none`, `pcgrad`, `gradvac` or `cagrad`.
    pub method: String,
    pub dataset: DatasetConfig,
    pub features: FeatureConfig,
    pub model: ModelSection,
    pub train: TrainSection,
    pub gradvac: GradVacSection,
    pub cagrad: CaGradSection,
    pub augment: AugmentConfig,
    pub surface: ProbeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: None,
            method: "none".into(),
            dataset: DatasetConfig::default(),
            features: FeatureConfig::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            gradvac: GradVacSection::default(),
            cagrad: CaGradSection::default(),
            augment: AugmentConfig::default(),
            surface: ProbeConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (or starts from `{}`), applies overrides, and types the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
        let mut tree = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| DpdaError::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| DpdaError::Config(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        serde_json::from_value(tree).map_err(|e| DpdaError::Config(e.to_string()))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            dataset: self.dataset.clone(),
            features: self.features,
            hidden: self.model.hidden.clone(),
            batch_size_per_path: self.train.batch_size_per_path,
            epochs_max: self.train.epochs_max,
            early_stop_patience: self.train.early_stop_patience,
            lr: self.train.lr,
            optimizer: self.train.optimizer,
            method: self.method.clone(),
            alignment: AlignmentParams {
                gradvac_beta: self.gradvac.beta,
                gradvac_phi_init: self.gradvac.phi_init,
                cagrad_c: self.cagrad.c,
            },
            augment: self.augment.clone(),
            single_path: self.train.single_path,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate(&crate::align::AlignerRegistry::with_builtins())?;
        self.surface.validate()
    }
}

/// Applies one `a.b.c=value` override to a JSON tree, creating objects along
/// the path as needed.
pub fn apply_override(tree: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| DpdaError::Config(format!("override '{assignment}' is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(DpdaError::Config(format!("override '{assignment}' has an empty key segment")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = tree;
    for p in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| DpdaError::Config(format!("override '{assignment}': '{p}' is not inside an object")))?;
        node = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| DpdaError::Config(format!("override '{assignment}': parent is not an object")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
