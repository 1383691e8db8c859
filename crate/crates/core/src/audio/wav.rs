use std::path::Path;

use super::Waveform;
use crate::error::{DpdaError, Result};

/// Writes 16-bit PCM mono. Samples are clipped to `[-1, 1]`.
pub fn write_wav(path: &Path, x: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: x.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &s in &x.samples {
        w.write_sample((s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16)?;
    }
    w.finalize()?;
    Ok(())
}

/// Reads 16-bit PCM mono.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let mut r = hound::WavReader::open(path)?;
    let spec = r.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(DpdaError::Input(format!("{}: expected 16-bit PCM mono", path.display())));
    }
    let samples = r
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / i16::MAX as f64))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Waveform::new(samples, spec.sample_rate)
}
