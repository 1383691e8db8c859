use std::sync::Arc;

use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{Label, Waveform};
use crate::error::{DpdaError, Result};

/// Floor added before taking the log of a band energy.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub n_bands: usize,
    pub frame: usize,
    pub hop: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { n_bands: 24, frame: 512, hop: 256 }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bands == 0 || self.frame < 4 || self.hop == 0 {
            return Err(DpdaError::Config("features: n_bands, frame and hop must be positive".into()));
        }
        if self.n_bands > self.frame / 2 {
            return Err(DpdaError::Config("features: more bands than DFT bins".into()));
        }
        Ok(())
    }
}

/// Log band energies, mean-pooled over frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Option<Label>,
}

/// Reusable framing + FFT + triangular band pooling.
#[derive(Clone)]
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    window_energy: f64,
    /// Per band: (first bin, weights over consecutive bins).
    bands: Vec<(usize, Vec<f64>)>,
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.frame);
        let n = cfg.frame;
        // periodic Hann
        let window: Vec<f64> =
            (0..n).map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos()).collect();
        let window_energy = window.iter().map(|w| w * w).sum();
        Ok(FeatureExtractor { cfg, fft, window, window_energy, bands: triangular_bands(cfg.n_bands, n / 2) })
    }

    pub fn config(&self) -> FeatureConfig {
        self.cfg
    }

    /// Bin index (fractional) at the peak of band `k`.
    pub fn band_center_bin(&self, k: usize) -> f64 {
        band_edge(k + 1, self.cfg.n_bands, self.cfg.frame / 2)
    }

    pub fn band_center_hz(&self, k: usize, sample_rate: u32) -> f64 {
        self.band_center_bin(k) * sample_rate as f64 / self.cfg.frame as f64
    }

    /// Band whose triangle has the largest weight at frequency `hz`.
    pub fn band_for_hz(&self, hz: f64, sample_rate: u32) -> usize {
        let bin = hz * self.cfg.frame as f64 / sample_rate as f64;
        (0..self.cfg.n_bands)
            .min_by(|&a, &b| (self.band_center_bin(a) - bin).abs().total_cmp(&(self.band_center_bin(b) - bin).abs()))
            .unwrap_or(0)
    }

    pub fn extract(&self, x: &Waveform) -> Result<Vec<f64>> {
        let n = self.cfg.frame;
        if x.len() < n {
            return Err(DpdaError::Input(format!("waveform has {} samples, frame needs {n}", x.len())));
        }
        let n_frames = 1 + (x.len() - n) / self.cfg.hop;
        let mut acc = vec![0.0; self.cfg.n_bands];
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut pow = vec![0.0; n / 2 + 1];
        for f in 0..n_frames {
            let start = f * self.cfg.hop;
            for (i, c) in buf.iter_mut().enumerate() {
                *c = Complex::new(x.samples[start + i] * self.window[i], 0.0);
            }
            self.fft.process(&mut buf);
            for (p, c) in pow.iter_mut().zip(&buf) {
                *p = c.norm_sqr() / self.window_energy;
            }
            for (a, (first, w)) in acc.iter_mut().zip(&self.bands) {
                let e: f64 = w.iter().zip(&pow[*first..]).map(|(wi, pi)| wi * pi).sum();
                *a += (LOG_FLOOR + e).ln();
            }
        }
        acc.iter_mut().for_each(|a| *a /= n_frames as f64);
        Ok(acc)
    }
}

fn band_edge(i: usize, n_bands: usize, max_bin: usize) -> f64 {
    i as f64 * max_bin as f64 / (n_bands + 1) as f64
}

/// Linearly spaced triangles over bins `0..=max_bin`. Band `k` rises from edge
/// `k` to a peak of 1 at edge `k+1` and falls to zero at edge `k+2`.
fn triangular_bands(n_bands: usize, max_bin: usize) -> Vec<(usize, Vec<f64>)> {
    (0..n_bands)
        .map(|k| {
            let (lo, mid, hi) = (
                band_edge(k, n_bands, max_bin),
                band_edge(k + 1, n_bands, max_bin),
                band_edge(k + 2, n_bands, max_bin),
            );
            let first = lo.ceil() as usize;
            let last = (hi.floor() as usize).min(max_bin);
            let w = (first..=last)
                .map(|b| {
                    let b = b as f64;
                    if b <= mid {
                        ((b - lo) / (mid - lo)).max(0.0)
                    } else {
                        ((hi - b) / (hi - mid)).max(0.0)
                    }
                })
                .collect();
            (first, w)
        })
        .collect()
}

/// Convenience wrapper building a one-off extractor with the default frame
/// and hop.
pub fn extract_features(x: &Waveform, n_bands: usize) -> Result<FeatureVector> {
    let ex = FeatureExtractor::new(FeatureConfig { n_bands, ..Default::default() })?;
    Ok(FeatureVector { values: ex.extract(x)?, label: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_is_log_floor() {
        let x = Waveform::new(vec![0.0; 4000], 16_000).unwrap();
        let f = extract_features(&x, 24).unwrap();
        assert_eq!(f.values.len(), 24);
        assert!(f.values.iter().all(|&v| (v - LOG_FLOOR.ln()).abs() < 1e-12));
    }

    #[test]
    fn tone_at_band_center_peaks_in_that_band() {
        let ex = FeatureExtractor::new(FeatureConfig::default()).unwrap();
        for k in [0usize, 3, 11, 17, 23] {
            let hz = ex.band_center_hz(k, 16_000);
            let s = (0..8000).map(|t| 0.5 * (std::f64::consts::TAU * hz * t as f64 / 16_000.0).sin()).collect();
            let v = ex.extract(&Waveform::new(s, 16_000).unwrap()).unwrap();
            let argmax = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
            assert_eq!(argmax, k, "tone at {hz} Hz");
            assert_eq!(ex.band_for_hz(hz, 16_000), k);
        }
    }

    #[test]
    fn too_short_waveform_is_input_error() {
        let x = Waveform::new(vec![0.1; 100], 16_000).unwrap();
        assert!(matches!(extract_features(&x, 24), Err(DpdaError::Input(_))));
    }

    #[test]
    fn length_matches_band_count() {
        let x = Waveform::new((0..2048).map(|t| (t as f64).sin() * 0.1).collect(), 16_000).unwrap();
        for nb in [1, 8, 40] {
            assert_eq!(extract_features(&x, nb).unwrap().values.len(), nb);
        }
    }
}
