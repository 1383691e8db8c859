use super::{align_none, combine_pair, is_conflict, AlignmentMethod, AlignmentOutcome, GradientAligner};
use crate::error::{DpdaError, Result};
use crate::numkit::{dot, ParamVector};

/// Projects `g_a` onto the normal plane of `g_b` when the two conflict;
/// otherwise returns `g_a` unchanged.
pub fn pcgrad_project(g_a: &ParamVector, g_b: &ParamVector) -> Result<ParamVector> {
    let d = dot(g_a, g_b)?;
    let nb2 = dot(g_b, g_b)?;
    if nb2 == 0.0 {
        return Err(DpdaError::DegenerateGradient("pcgrad projection onto a zero gradient"));
    }
    if d >= 0.0 {
        return Ok(g_a.clone());
    }
    Ok(g_a.add_scaled(-d / nb2, g_b))
}

/// Symmetric PCGrad: both projections use the original, unmodified pair.
pub fn align_pcgrad(g_x: &ParamVector, g_xt: &ParamVector) -> Result<(ParamVector, ParamVector)> {
    Ok((pcgrad_project(g_x, g_xt)?, pcgrad_project(g_xt, g_x)?))
}

#[derive(Debug, Default, Clone, Copy)]
pub struct PcGrad;

impl GradientAligner for PcGrad {
    fn name(&self) -> &'static str {
        "pcgrad"
    }

    fn method(&self) -> AlignmentMethod {
        AlignmentMethod::PcGrad
    }

    fn align(&mut self, g_x: &ParamVector, g_xt: &ParamVector) -> Result<AlignmentOutcome> {
        g_x.check_len(g_xt)?;
        if !is_conflict(g_x, g_xt)? {
            return align_none(g_x, g_xt);
        }
        let (a, b) = align_pcgrad(g_x, g_xt)?;
        combine_pair(g_x, g_xt, a, b, true)
    }
}
