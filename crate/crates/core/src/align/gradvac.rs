use serde::{Deserialize, Serialize};

use super::{combine_pair, AlignmentMethod, AlignmentOutcome, GradientAligner};
use crate::error::{DpdaError, Result};
use crate::numkit::{cosine, norm, ParamVector};

/// Upper clamp on the similarity target so the correction denominator
/// `sqrt(1 - target²)` never reaches zero.
pub const PHI_TARGET_MAX: f64 = 1.0 - 1e-9;

/// EMA of the positive cosine similarities seen so far.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GradVacState {
    pub phi_target: f64,
}

impl GradVacState {
    pub fn new(phi_init: f64) -> Self {
        GradVacState { phi_target: phi_init.clamp(0.0, PHI_TARGET_MAX) }
    }

    /// Folds an observed similarity into the target. Only strictly positive
    /// observations count; `beta = 0` leaves the target frozen.
    pub fn observe(&self, phi: f64, beta: f64) -> GradVacState {
        if phi > 0.0 && beta > 0.0 {
            let t = (1.0 - beta) * self.phi_target + beta * phi;
            GradVacState { phi_target: t.clamp(0.0, PHI_TARGET_MAX) }
        } else {
            *self
        }
    }
}

/// Moves `g` toward `other` so that the corrected vector has cosine `target`
/// with `other`, given the current cosine `phi` between them.
fn correct_toward(g: &ParamVector, other: &ParamVector, phi: f64, target: f64) -> ParamVector {
    let s_phi = (1.0 - phi * phi).max(0.0).sqrt();
    let s_target = (1.0 - target * target).sqrt();
    let coeff = norm(g) * (target * s_phi - phi * s_target) / (norm(other) * s_target);
    g.add_scaled(coeff, other)
}

/// GradVac on a pair. When the observed cosine falls below the target, each
/// gradient is corrected toward the other (both from the original pair).
/// Returns the corrected pair and the updated state.
pub fn align_gradvac(
    g_x: &ParamVector,
    g_xt: &ParamVector,
    state: GradVacState,
    beta: f64,
) -> Result<(ParamVector, ParamVector, GradVacState)> {
    g_x.check_len(g_xt)?;
    if norm(g_x) == 0.0 || norm(g_xt) == 0.0 {
        return Err(DpdaError::DegenerateGradient("gradvac on a zero gradient"));
    }
    let phi = cosine(g_x, g_xt)?;
    let target = state.phi_target;
    let next = state.observe(phi, beta);
    if phi >= target {
        return Ok((g_x.clone(), g_xt.clone(), next));
    }
    let a = correct_toward(g_x, g_xt, phi, target);
    let b = correct_toward(g_xt, g_x, phi, target);
    Ok((a, b, next))
}

#[derive(Debug, Clone, Copy)]
pub struct GradVac {
    beta: f64,
    phi_init: f64,
    state: GradVacState,
}

impl GradVac {
    pub fn new(beta: f64, phi_init: f64) -> Result<Self> {
        AlignmentMethod::GradVac { beta, phi_init }.validate()?;
        Ok(GradVac { beta, phi_init, state: GradVacState::new(phi_init) })
    }

    /// Unvalidated constructor; `beta = 0` freezes the target.
    pub(super) fn from_parts(beta: f64, phi_init: f64, state: GradVacState) -> Self {
        GradVac { beta, phi_init, state }
    }

    pub fn state(&self) -> GradVacState {
        self.state
    }
}

impl GradientAligner for GradVac {
    fn name(&self) -> &'static str {
        "gradvac"
    }

    fn method(&self) -> AlignmentMethod {
        AlignmentMethod::GradVac { beta: self.beta, phi_init: self.phi_init }
    }

    fn align(&mut self, g_x: &ParamVector, g_xt: &ParamVector) -> Result<AlignmentOutcome> {
        let before = self.state.phi_target;
        let phi = cosine(g_x, g_xt)?;
        let (a, b, next) = align_gradvac(g_x, g_xt, self.state, self.beta)?;
        self.state = next;
        combine_pair(g_x, g_xt, a, b, phi < before)
    }

    fn similarity_target(&self) -> Option<f64> {
        Some(self.state.phi_target)
    }
}
