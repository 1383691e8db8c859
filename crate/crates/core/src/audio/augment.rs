use std::sync::Arc;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{power, Waveform};
use crate::error::{DpdaError, Result};
use crate::numkit::Rng;

/// One configurable stage of the augmentation chain.
///
/// The first three stages mirror the RawBoost noise families (convolutive,
/// impulsive signal-dependent, stationary additive); the last two stand in for
/// external noise corpora and recorded room impulse responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageConfig {
    /// Cascade of peaking-EQ notches at random frequencies followed by a
    /// random polynomial nonlinearity `y = z + sum_{j>=2} a_j z^j`.
    ConvolutiveNotch {
        #[serde(default = "dflt::n_filters")]
        n_filters: usize,
        #[serde(default = "dflt::freq_hz")]
        freq_hz: [f64; 2],
        #[serde(default = "dflt::q")]
        q: [f64; 2],
        #[serde(default = "dflt::gain_db")]
        gain_db: [f64; 2],
        #[serde(default = "dflt::nonlinear_order")]
        nonlinear_order: usize,
        #[serde(default = "dflt::nonlinear_gain")]
        nonlinear_gain: [f64; 2],
    },
    /// At a random `rate` fraction of samples, adds `±a * x[n]` with `a` drawn
    /// from `amplitude`.
    ImpulsiveSignalDependent {
        #[serde(default = "dflt::rate")]
        rate: f64,
        #[serde(default = "dflt::amplitude")]
        amplitude: [f64; 2],
    },
    /// Gaussian noise through a first-order recursive tilt filter, scaled to a
    /// target SNR against the incoming signal.
    StationaryColoredNoise {
        #[serde(default = "dflt::stationary_snr_db")]
        snr_db: [f64; 2],
        #[serde(default = "dflt::tilt")]
        tilt: [f64; 2],
    },
    /// Amplitude-modulated brown/pink noise mixture at a target SNR.
    AdditiveExternalNoise {
        #[serde(default = "dflt::external_snr_db")]
        snr_db: [f64; 2],
    },
    /// Convolution with an exponentially decaying noise impulse response,
    /// truncated to the input length.
    SyntheticImpulseResponse {
        #[serde(default = "dflt::decay_s")]
        decay_s: [f64; 2],
        #[serde(default = "dflt::ir_length")]
        length: usize,
    },
}

mod dflt {
    pub fn n_filters() -> usize {
        5
    }
    pub fn freq_hz() -> [f64; 2] {
        [20.0, 8000.0]
    }
    pub fn q() -> [f64; 2] {
        [0.5, 4.0]
    }
    pub fn gain_db() -> [f64; 2] {
        [-20.0, 0.0]
    }
    pub fn nonlinear_order() -> usize {
        3
    }
    pub fn nonlinear_gain() -> [f64; 2] {
        [-0.3, 0.3]
    }
    pub fn rate() -> f64 {
        0.1
    }
    pub fn amplitude() -> [f64; 2] {
        [0.0, 2.0]
    }
    pub fn stationary_snr_db() -> [f64; 2] {
        [10.0, 40.0]
    }
    pub fn tilt() -> [f64; 2] {
        [-0.9, 0.9]
    }
    pub fn external_snr_db() -> [f64; 2] {
        [5.0, 20.0]
    }
    pub fn decay_s() -> [f64; 2] {
        [0.02, 0.1]
    }
    pub fn ir_length() -> usize {
        2048
    }
}

impl StageConfig {
    pub fn name(&self) -> &'static str {
        match self {
            StageConfig::ConvolutiveNotch { .. } => "convolutive_notch",
            StageConfig::ImpulsiveSignalDependent { .. } => "impulsive_signal_dependent",
            StageConfig::StationaryColoredNoise { .. } => "stationary_colored_noise",
            StageConfig::AdditiveExternalNoise { .. } => "additive_external_noise",
            StageConfig::SyntheticImpulseResponse { .. } => "synthetic_impulse_response",
        }
    }

    pub fn default_convolutive() -> Self {
        StageConfig::ConvolutiveNotch {
            n_filters: dflt::n_filters(),
            freq_hz: dflt::freq_hz(),
            q: dflt::q(),
            gain_db: dflt::gain_db(),
            nonlinear_order: dflt::nonlinear_order(),
            nonlinear_gain: dflt::nonlinear_gain(),
        }
    }

    pub fn default_impulsive() -> Self {
        StageConfig::ImpulsiveSignalDependent { rate: dflt::rate(), amplitude: dflt::amplitude() }
    }

    pub fn default_stationary() -> Self {
        StageConfig::StationaryColoredNoise { snr_db: dflt::stationary_snr_db(), tilt: dflt::tilt() }
    }

    pub fn default_external() -> Self {
        StageConfig::AdditiveExternalNoise { snr_db: dflt::external_snr_db() }
    }

    pub fn default_impulse_response() -> Self {
        StageConfig::SyntheticImpulseResponse { decay_s: dflt::decay_s(), length: dflt::ir_length() }
    }

    pub fn validate(&self) -> Result<()> {
        let range = |name: &str, r: [f64; 2]| {
            if r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] {
                Ok(())
            } else {
                Err(DpdaError::Config(format!("{}: {name} range must satisfy lo <= hi", self.name())))
            }
        };
        match *self {
            StageConfig::ConvolutiveNotch { freq_hz, q, gain_db, nonlinear_gain, .. } => {
                range("freq_hz", freq_hz)?;
                range("q", q)?;
                range("gain_db", gain_db)?;
                range("nonlinear_gain", nonlinear_gain)?;
                if freq_hz[0] <= 0.0 || q[0] <= 0.0 {
                    return Err(DpdaError::Config("convolutive_notch: freq and q must be positive".into()));
                }
            }
            StageConfig::ImpulsiveSignalDependent { rate, amplitude } => {
                range("amplitude", amplitude)?;
                if !(0.0..=1.0).contains(&rate) {
                    return Err(DpdaError::Config("impulsive_signal_dependent: rate must be in [0, 1]".into()));
                }
            }
            StageConfig::StationaryColoredNoise { snr_db, tilt } => {
                range("snr_db", snr_db)?;
                range("tilt", tilt)?;
                if tilt[0] <= -1.0 || tilt[1] >= 1.0 {
                    return Err(DpdaError::Config("stationary_colored_noise: tilt must lie in (-1, 1)".into()));
                }
            }
            StageConfig::AdditiveExternalNoise { snr_db } => range("snr_db", snr_db)?,
            StageConfig::SyntheticImpulseResponse { decay_s, length } => {
                range("decay_s", decay_s)?;
                if decay_s[0] <= 0.0 || length == 0 {
                    return Err(DpdaError::Config(
                        "synthetic_impulse_response: decay and length must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Box<dyn AugmentStage> {
        Box::new(self.clone())
    }
}

/// What a stage drew when it ran, for inspection and SNR checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    /// Target SNR drawn by additive stages.
    pub target_snr_db: Option<f64>,
}

/// A waveform distortion. Implementations must preserve the buffer length and
/// draw all randomness from `rng`.
pub trait AugmentStage: Send + Sync {
    fn name(&self) -> &'static str;
    fn apply(&self, samples: &mut [f64], sample_rate: u32, rng: &mut Rng) -> StageReport;
}

impl AugmentStage for StageConfig {
    fn name(&self) -> &'static str {
        StageConfig::name(self)
    }

    fn apply(&self, x: &mut [f64], sample_rate: u32, rng: &mut Rng) -> StageReport {
        let sr = sample_rate as f64;
        let mut report = StageReport { stage: self.name().to_string(), target_snr_db: None };
        match *self {
            StageConfig::ConvolutiveNotch { n_filters, freq_hz, q, gain_db, nonlinear_order, nonlinear_gain } => {
                for _ in 0..n_filters {
                    let f = rng.uniform_range(freq_hz[0], freq_hz[1]).min(0.45 * sr);
                    let qq = rng.uniform_range(q[0], q[1]);
                    let g = rng.uniform_range(gain_db[0], gain_db[1]);
                    Biquad::peaking(f, qq, g, sr).run(x);
                }
                let gains: Vec<f64> =
                    (2..=nonlinear_order).map(|_| rng.uniform_range(nonlinear_gain[0], nonlinear_gain[1])).collect();
                if gains.iter().any(|&g| g != 0.0) {
                    for s in x.iter_mut() {
                        let z = *s;
                        let mut zp = z;
                        let mut y = z;
                        for &a in &gains {
                            zp *= z;
                            y += a * zp;
                        }
                        *s = y;
                    }
                }
            }
            StageConfig::ImpulsiveSignalDependent { rate, amplitude } => {
                for s in x.iter_mut() {
                    if rng.uniform() < rate {
                        let a = rng.uniform_range(amplitude[0], amplitude[1]);
                        let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
                        *s += sign * a * *s;
                    }
                }
            }
            StageConfig::StationaryColoredNoise { snr_db, tilt } => {
                let snr = rng.uniform_range(snr_db[0], snr_db[1]);
                let k = rng.uniform_range(tilt[0], tilt[1]);
                let mut prev = 0.0;
                let noise: Vec<f64> = (0..x.len())
                    .map(|_| {
                        prev = rng.normal() + k * prev;
                        prev
                    })
                    .collect();
                add_at_snr(x, &noise, snr);
                report.target_snr_db = Some(snr);
            }
            StageConfig::AdditiveExternalNoise { snr_db } => {
                let snr = rng.uniform_range(snr_db[0], snr_db[1]);
                let noise = external_noise(x.len(), sr, rng);
                add_at_snr(x, &noise, snr);
                report.target_snr_db = Some(snr);
            }
            StageConfig::SyntheticImpulseResponse { decay_s, length } => {
                let tau = rng.uniform_range(decay_s[0], decay_s[1]) * sr;
                let mut h: Vec<f64> =
                    (0..length).map(|n| if n == 0 { 1.0 } else { rng.normal() * (-(n as f64) / tau).exp() }).collect();
                let e = h.iter().map(|v| v * v).sum::<f64>().sqrt();
                h.iter_mut().for_each(|v| *v /= e);
                let y = fft_convolve_truncated(x, &h);
                x.copy_from_slice(&y);
            }
        }
        report
    }
}

/// Adds `noise` scaled so that `10 log10(P_x / P_added) = snr_db`. Silent
/// inputs are left untouched.
fn add_at_snr(x: &mut [f64], noise: &[f64], snr_db: f64) {
    let px = power(x);
    let pn = power(noise);
    if px == 0.0 || pn == 0.0 {
        return;
    }
    let scale = (px / (pn * 10f64.powf(snr_db / 10.0))).sqrt();
    for (s, n) in x.iter_mut().zip(noise) {
        *s += scale * n;
    }
}

/// Brown and pink-ish noise sources with slow random envelopes; a crude
/// stand-in for babble or environmental recordings.
fn external_noise(n: usize, sr: f64, rng: &mut Rng) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for _ in 0..3 {
        let leak = rng.uniform_range(0.9, 0.999);
        let rate_hz = rng.uniform_range(0.5, 4.0);
        let phase = rng.uniform_range(0.0, std::f64::consts::TAU);
        let depth = rng.uniform_range(0.2, 0.9);
        let mut prev = 0.0;
        for (t, o) in out.iter_mut().enumerate() {
            prev = leak * prev + rng.normal();
            let env = 1.0 - depth * 0.5 * (1.0 + (std::f64::consts::TAU * rate_hz * t as f64 / sr + phase).sin());
            *o += env * prev;
        }
    }
    out
}

fn fft_convolve_truncated(x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = (x.len() + h.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex<f64>> = (0..n).map(|i| Complex::new(x.get(i).copied().unwrap_or(0.0), 0.0)).collect();
    let mut b: Vec<Complex<f64>> = (0..n).map(|i| Complex::new(h.get(i).copied().unwrap_or(0.0), 0.0)).collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (u, v) in a.iter_mut().zip(&b) {
        *u *= v;
    }
    inv.process(&mut a);
    a.iter().take(x.len()).map(|c| c.re / n as f64).collect()
}

/// RBJ-cookbook peaking equaliser; negative gain cuts a notch.
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn peaking(freq: f64, q: f64, gain_db: f64, sr: f64) -> Self {
        if gain_db == 0.0 {
            return Biquad { b: [1.0, 0.0, 0.0], a: [0.0, 0.0] };
        }
        let amp = 10f64.powf(gain_db / 40.0);
        let w0 = std::f64::consts::TAU * freq / sr;
        let alpha = w0.sin() / (2.0 * q);
        let cw = w0.cos();
        let a0 = 1.0 + alpha / amp;
        Biquad {
            b: [(1.0 + alpha * amp) / a0, -2.0 * cw / a0, (1.0 - alpha * amp) / a0],
            a: [-2.0 * cw / a0, (1.0 - alpha / amp) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for s in x.iter_mut() {
            let x0 = *s;
            let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            *s = y0;
        }
    }
}

/// Ordered augmentation chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub chain: Vec<StageConfig>,
    /// Base seed for augmentation draws. When absent the run seed is used.
    pub rng_seed: Option<u64>,
}

impl Default for AugmentConfig {
    /// Convolutive, impulsive and stationary stages in series.
    fn default() -> Self {
        AugmentConfig {
            chain: vec![
                StageConfig::default_convolutive(),
                StageConfig::default_impulsive(),
                StageConfig::default_stationary(),
            ],
            rng_seed: None,
        }
    }
}

impl AugmentConfig {
    pub fn identity() -> Self {
        AugmentConfig { chain: Vec::new(), rng_seed: None }
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.iter().try_for_each(StageConfig::validate)
    }

    pub fn is_identity(&self) -> bool {
        self.chain.is_empty()
    }
}

/// Runs the chain and returns the per-stage draws. The output is
/// peak-normalised to 1 only if some sample left `[-1, 1]`.
pub fn augment_with_report(x: &Waveform, cfg: &AugmentConfig, rng: &mut Rng) -> (Waveform, Vec<StageReport>) {
    if cfg.chain.is_empty() {
        return (x.clone(), Vec::new());
    }
    let mut samples = x.samples.clone();
    let reports = cfg.chain.iter().map(|stage| stage.apply(&mut samples, x.sample_rate, rng)).collect();
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 1.0 {
        samples.iter_mut().for_each(|s| *s /= peak);
    }
    (Waveform { samples, sample_rate: x.sample_rate }, reports)
}

pub fn augment(x: &Waveform, cfg: &AugmentConfig, rng: &mut Rng) -> Waveform {
    augment_with_report(x, cfg, rng).0
}
