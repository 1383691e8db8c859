use serde::{Deserialize, Serialize};

use super::{Label, Waveform, DEFAULT_SAMPLE_RATE};
use crate::error::{DpdaError, Result};
use crate::numkit::{derive_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    fn tag(self) -> u64 {
        match self {
            Split::Train => 0x0074_7261_696e,
            Split::Val => 0x76_616c,
            Split::Test => 0x7465_7374,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = DpdaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(DpdaError::Input(format!("unknown split '{other}'"))),
        }
    }
}

/// Shape of the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_train_per_class: usize,
    pub n_val_per_class: usize,
    pub n_test_per_class: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    /// Fundamental frequency range of the harmonic stack, Hz.
    pub f0_hz: [f64; 2],
    /// Harmonics are generated up to this frequency.
    pub harmonic_ceiling_hz: f64,
    /// Relative per-period f0 jitter (std) for bona-fide speech.
    pub jitter: f64,
    /// Relative per-period amplitude jitter (std) for bona-fide speech.
    pub shimmer: f64,
    /// Std of the broadband noise floor.
    pub noise_floor: f64,
    /// Frequency of the spoofing artifact tone, Hz.
    pub artifact_hz: f64,
    /// Amplitude range of the spoofing artifact tone.
    pub artifact_amp: [f64; 2],
    /// Peak amplitude range of the harmonic stack.
    pub peak: [f64; 2],
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_train_per_class: 200,
            n_val_per_class: 50,
            n_test_per_class: 100,
            duration_s: 1.0,
            sample_rate: DEFAULT_SAMPLE_RATE,
            f0_hz: [100.0, 250.0],
            harmonic_ceiling_hz: 3000.0,
            jitter: 0.03,
            shimmer: 0.15,
            noise_floor: 0.002,
            artifact_hz: 6000.0,
            artifact_amp: [0.004, 0.02],
            peak: [0.3, 0.8],
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DpdaError::Config(format!("dataset: {m}")));
        if self.n_train_per_class == 0 || self.n_val_per_class == 0 || self.n_test_per_class == 0 {
            return bad("every split needs at least one utterance per class");
        }
        if !(self.duration_s > 0.0) || self.sample_rate == 0 {
            return bad("duration and sample rate must be positive");
        }
        if self.samples_per_utterance() == 0 {
            return bad("utterances would be empty");
        }
        for (name, r) in [("f0_hz", self.f0_hz), ("artifact_amp", self.artifact_amp), ("peak", self.peak)] {
            if !(r[0] <= r[1]) || r[0] < 0.0 {
                return bad(&format!("{name} must be an increasing non-negative range"));
            }
        }
        if self.f0_hz[0] <= 0.0 {
            return bad("f0 must be positive");
        }
        let nyquist = 0.5 * self.sample_rate as f64;
        if self.artifact_hz <= 0.0 || self.artifact_hz >= nyquist {
            return bad("artifact frequency must lie in (0, nyquist)");
        }
        if self.peak[1] > 1.0 {
            return bad("peak must not exceed 1");
        }
        Ok(())
    }

    pub fn samples_per_utterance(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }

    pub fn per_class(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train_per_class,
            Split::Val => self.n_val_per_class,
            Split::Test => self.n_test_per_class,
        }
    }
}

/// One labelled utterance and the seed it was synthesised from.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub label: Label,
    pub split: Split,
    pub seed: u64,
    pub waveform: Waveform,
}

/// Generates `2 * n_per_class` utterances for `split`, alternating bona fide
/// and spoof. Each utterance depends only on `(seed, split, index)`.
pub fn generate_dataset(cfg: &DatasetConfig, n_per_class: usize, seed: u64, split: Split) -> Result<Vec<Utterance>> {
    if n_per_class == 0 {
        return Err(DpdaError::Input("n_per_class must be at least 1".into()));
    }
    cfg.validate()?;
    use rayon::prelude::*;
    (0..2 * n_per_class)
        .into_par_iter()
        .map(|i| {
            let label = if i % 2 == 0 { Label::Bonafide } else { Label::Spoof };
            let useed = derive_seed(seed, &[split.tag(), i as u64]);
            let waveform = synthesize(cfg, label, useed)?;
            Ok(Utterance { id: format!("{}-{:05}", split.name(), i), label, split, seed: useed, waveform })
        })
        .collect()
}

/// Synthesises one utterance from its own seed.
pub(crate) fn synthesize(cfg: &DatasetConfig, label: Label, seed: u64) -> Result<Waveform> {
    let mut rng = Rng::new(seed);
    let n = cfg.samples_per_utterance();
    let sr = cfg.sample_rate as f64;
    let f0 = rng.uniform_range(cfg.f0_hz[0], cfg.f0_hz[1]);
    let n_harm = ((cfg.harmonic_ceiling_hz / f0).floor() as usize).max(1);

    // per-harmonic complex weights a_k e^{i psi_k}, 1/k rolloff with random envelope
    let weights: Vec<(f64, f64)> = (1..=n_harm)
        .map(|k| {
            let a = rng.uniform_range(0.6, 1.4) / k as f64;
            let psi = rng.uniform_range(0.0, std::f64::consts::TAU);
            (a * psi.cos(), a * psi.sin())
        })
        .collect();

    let jittered = label == Label::Bonafide;
    let mut stack = vec![0.0; n];
    let mut phase = 0.0f64;
    let mut f_inst = f0;
    let mut amp = 1.0;
    for s in stack.iter_mut() {
        let (zr, zi) = (phase.cos(), phase.sin());
        let (mut pr, mut pi) = (zr, zi);
        let mut acc = 0.0;
        for &(cr, ci) in &weights {
            // Im((cr + i ci)(pr + i pi))
            acc += cr * pi + ci * pr;
            let nr = pr * zr - pi * zi;
            pi = pr * zi + pi * zr;
            pr = nr;
        }
        *s = amp * acc;
        phase += std::f64::consts::TAU * f_inst / sr;
        if phase >= std::f64::consts::TAU {
            phase -= std::f64::consts::TAU;
            if jittered {
                f_inst = f0 * (1.0 + cfg.jitter * rng.normal()).clamp(0.5, 1.5);
                amp = (1.0 + cfg.shimmer * rng.normal()).clamp(0.2, 2.0);
            }
        }
    }

    let peak = stack.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let target_peak = rng.uniform_range(cfg.peak[0], cfg.peak[1]);
    let gain = if peak > 0.0 { target_peak / peak } else { 0.0 };

    let art_amp = rng.uniform_range(cfg.artifact_amp[0], cfg.artifact_amp[1]);
    let art_phase = rng.uniform_range(0.0, std::f64::consts::TAU);
    let w_art = std::f64::consts::TAU * cfg.artifact_hz / sr;
    let samples = stack
        .iter()
        .enumerate()
        .map(|(t, &s)| {
            let mut v = gain * s + cfg.noise_floor * rng.normal();
            if label == Label::Spoof {
                v += art_amp * (w_art * t as f64 + art_phase).sin();
            }
            v.clamp(-1.0, 1.0)
        })
        .collect();
    Waveform::new(samples, cfg.sample_rate)
}
