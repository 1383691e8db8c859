//! Synthetic bona-fide/spoof audio, the augmentation chain and feature
//! extraction.

mod augment;
mod features;
mod manifest;
mod synth;
mod wav;

use serde::{Deserialize, Serialize};

use crate::error::{DpdaError, Result};

pub use augment::{augment, augment_with_report, AugmentConfig, AugmentStage, StageConfig, StageReport};
pub use features::{extract_features, FeatureConfig, FeatureExtractor, FeatureVector, LOG_FLOOR};
pub use manifest::{read_manifest, write_manifest, ManifestEntry};
pub use synth::{generate_dataset, DatasetConfig, Split, Utterance};
pub use wav::{read_wav, write_wav};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Mono sample buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(DpdaError::Input("waveform must have at least one sample".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(DpdaError::NonFinite("waveform samples".into()));
        }
        if sample_rate == 0 {
            return Err(DpdaError::Input("sample rate must be positive".into()));
        }
        Ok(Waveform { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean squared amplitude.
    pub fn power(&self) -> f64 {
        power(&self.samples)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }
}

pub(crate) fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|s| s * s).sum::<f64>() / x.len() as f64
    }
}

/// Class label. Bona fide is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bonafide,
    Spoof,
}

impl Label {
    /// Target value for the classifier: bona fide = 1, spoof = 0.
    pub fn target(self) -> f64 {
        match self {
            Label::Bonafide => 1.0,
            Label::Spoof => 0.0,
        }
    }
}
