//! Gradient conflict detection and alignment strategies.
//!
//! Each strategy implements [`GradientAligner`] and is registered by name in an
//! [`AlignerRegistry`]; the trainer picks one at runtime from the run
//! configuration. The free functions ([`align_pcgrad`], [`align_gradvac`],
//! [`align_cagrad`], [`align`]) are the stateless kernels the strategies wrap.

mod cagrad;
mod gradvac;
mod pcgrad;
mod registry;

use serde::{Deserialize, Serialize};

use crate::error::{DpdaError, Result};
use crate::numkit::{cosine, dot, ParamVector};

pub use cagrad::{align_cagrad, CaGrad};
pub use gradvac::{align_gradvac, GradVac, GradVacState, PHI_TARGET_MAX};
pub use pcgrad::{align_pcgrad, pcgrad_project, PcGrad};
pub use registry::{AlignerFactory, AlignerRegistry, AlignmentParams, NoAlign};

/// Default EMA rate for the GradVac similarity target.
pub const DEFAULT_GRADVAC_BETA: f64 = 0.01;
/// Default CAGrad radius fraction.
pub const DEFAULT_CAGRAD_C: f64 = 0.5;

/// Alignment method together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlignmentMethod {
    NoAlign,
    PcGrad,
    GradVac { beta: f64, phi_init: f64 },
    CaGrad { c: f64 },
}

impl AlignmentMethod {
    pub fn name(&self) -> &'static str {
        match self {
            AlignmentMethod::NoAlign => "none",
            AlignmentMethod::PcGrad => "pcgrad",
            AlignmentMethod::GradVac { .. } => "gradvac",
            AlignmentMethod::CaGrad { .. } => "cagrad",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AlignmentMethod::GradVac { beta, phi_init } => {
                if !(beta > 0.0 && beta <= 1.0) {
                    return Err(DpdaError::Config(format!("gradvac beta must be in (0, 1], got {beta}")));
                }
                if !(0.0..1.0).contains(&phi_init) {
                    return Err(DpdaError::Config(format!("gradvac phi_init must be in [0, 1), got {phi_init}")));
                }
                Ok(())
            }
            AlignmentMethod::CaGrad { c } => check_cagrad_c(c),
            _ => Ok(()),
        }
    }
}

pub(crate) fn check_cagrad_c(c: f64) -> Result<()> {
    if (0.0..1.0).contains(&c) {
        Ok(())
    } else {
        Err(DpdaError::Config(format!("cagrad c must be in [0, 1), got {c}")))
    }
}

/// Result of aligning one gradient pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentOutcome {
    pub g_final: ParamVector,
    /// Raw pair had a negative inner product.
    pub conflict_detected: bool,
    /// The strategy modified the gradients.
    pub alignment_applied: bool,
    pub cosine_before: f64,
    /// Cosine of the aligned pair; equals `cosine_before` when nothing changed.
    /// CAGrad produces a single direction, so it reports `cosine_before`.
    pub cosine_after: f64,
}

/// Strict conflict test: the inner product is negative.
pub fn is_conflict(g_x: &ParamVector, g_xt: &ParamVector) -> Result<bool> {
    Ok(dot(g_x, g_xt)? < 0.0)
}

/// Cosine that reports 0 for a zero-norm input instead of failing. Used only
/// for telemetry.
pub(crate) fn cosine_or_zero(a: &ParamVector, b: &ParamVector) -> f64 {
    cosine(a, b).unwrap_or(0.0)
}

/// Combines two (possibly aligned) path gradients into the update direction.
fn combine_pair(
    g_x: &ParamVector,
    g_xt: &ParamVector,
    a_x: ParamVector,
    a_xt: ParamVector,
    applied: bool,
) -> Result<AlignmentOutcome> {
    let cosine_before = cosine_or_zero(g_x, g_xt);
    let cosine_after = if applied { cosine_or_zero(&a_x, &a_xt) } else { cosine_before };
    let g_final = ParamVector::midpoint(&a_x, &a_xt);
    g_final.ensure_finite("aligned gradient")?;
    Ok(AlignmentOutcome {
        g_final,
        conflict_detected: is_conflict(g_x, g_xt)?,
        alignment_applied: applied,
        cosine_before,
        cosine_after,
    })
}

/// Plain average `½(g_x + g_x̃)`.
pub fn align_none(g_x: &ParamVector, g_xt: &ParamVector) -> Result<AlignmentOutcome> {
    g_x.check_len(g_xt)?;
    combine_pair(g_x, g_xt, g_x.clone(), g_xt.clone(), false)
}

/// Dispatches on `method`, threading GradVac state through `state`.
pub fn align(
    g_x: &ParamVector,
    g_xt: &ParamVector,
    method: &AlignmentMethod,
    state: &mut GradVacState,
) -> Result<AlignmentOutcome> {
    g_x.check_len(g_xt)?;
    g_x.ensure_finite("g_x")?;
    g_xt.ensure_finite("g_xt")?;
    match *method {
        AlignmentMethod::NoAlign => NoAlign.align(g_x, g_xt),
        AlignmentMethod::PcGrad => PcGrad.align(g_x, g_xt),
        AlignmentMethod::GradVac { beta, phi_init } => {
            let mut gv = GradVac::from_parts(beta, phi_init, *state);
            let out = gv.align(g_x, g_xt)?;
            *state = gv.state();
            Ok(out)
        }
        AlignmentMethod::CaGrad { c } => CaGrad::new(c)?.align(g_x, g_xt),
    }
}

/// A named, possibly stateful gradient alignment strategy.
pub trait GradientAligner: Send {
    fn name(&self) -> &'static str;

    /// The method and hyperparameters this instance was built from.
    fn method(&self) -> AlignmentMethod;

    fn align(&mut self, g_x: &ParamVector, g_xt: &ParamVector) -> Result<AlignmentOutcome>;

    /// Current GradVac target, for strategies that keep one.
    fn similarity_target(&self) -> Option<f64> {
        None
    }
}
