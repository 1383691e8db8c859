//! Equal error rate and conflict statistics.

use serde::{Deserialize, Serialize};

use crate::error::{DpdaError, Result};
use crate::trainer::IterationRecord;

/// Detection scores; higher means more bona fide.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub bonafide: Vec<f64>,
    pub spoof: Vec<f64>,
}

impl ScoreSet {
    pub fn new(bonafide: Vec<f64>, spoof: Vec<f64>) -> Self {
        ScoreSet { bonafide, spoof }
    }

    /// Splits `scores` by `targets` (1 = bona fide).
    pub fn from_targets(scores: &[f64], targets: &[f64]) -> Self {
        let mut s = ScoreSet::default();
        for (&sc, &t) in scores.iter().zip(targets) {
            if t >= 0.5 {
                s.bonafide.push(sc);
            } else {
                s.spoof.push(sc);
            }
        }
        s
    }
}

/// Equal error rate.
///
/// Operating points are taken at every distinct score plus one threshold
/// above the maximum, with `FAR(θ) = P(spoof ≥ θ)` and `FRR(θ) = P(bona < θ)`.
/// The EER is read off where `FAR − FRR` changes sign, interpolating linearly
/// between the two adjacent operating points.
pub fn eer(scores: &ScoreSet) -> Result<f64> {
    if scores.bonafide.is_empty() || scores.spoof.is_empty() {
        return Err(DpdaError::Input("eer needs scores from both classes".into()));
    }
    if scores.bonafide.iter().chain(&scores.spoof).any(|s| !s.is_finite()) {
        return Err(DpdaError::NonFinite("detection scores".into()));
    }
    let mut bona = scores.bonafide.clone();
    let mut spoof = scores.spoof.clone();
    bona.sort_by(f64::total_cmp);
    spoof.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = bona.iter().chain(&spoof).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);

    let (nb, ns) = (bona.len() as f64, spoof.len() as f64);
    let point = |t: f64| {
        let far = (spoof.len() - spoof.partition_point(|&s| s < t)) as f64 / ns;
        let frr = bona.partition_point(|&s| s < t) as f64 / nb;
        (far, frr)
    };

    let (mut prev_far, mut prev_frr) = point(thresholds[0]);
    if prev_far - prev_frr <= 0.0 {
        return Ok(prev_far);
    }
    for &t in &thresholds[1..] {
        let (far, frr) = point(t);
        let d = far - frr;
        if d <= 0.0 {
            let d_prev = prev_far - prev_frr;
            let w = d_prev / (d_prev - d);
            return Ok(prev_far + w * (far - prev_far));
        }
        prev_far = far;
        prev_frr = frr;
    }
    // the +inf threshold always has FAR = 0, FRR = 1
    unreachable!("FAR - FRR must change sign by the last threshold")
}

/// Fraction of iterations whose raw gradients conflicted.
pub fn conflict_fraction(records: &[IterationRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(DpdaError::Input("conflict_fraction needs at least one iteration".into()));
    }
    Ok(records.iter().filter(|r| r.conflict).count() as f64 / records.len() as f64)
}

/// Contents of `eval.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub eer: f64,
    pub n_bonafide: usize,
    pub n_spoof: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub conflict_fraction: Option<f64>,
    /// EER on the test split passed through a held-out augmentation draw.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eer_augmented: Option<f64>,
}
