use super::{check_cagrad_c, cosine_or_zero, is_conflict, AlignmentMethod, AlignmentOutcome, GradientAligner};
use crate::error::{DpdaError, Result};
use crate::numkit::{dot, minimize_scalar, norm, ParamVector};

const DUAL_TOL: f64 = 1e-8;

/// Conflict-averse update for two objectives.
///
/// Maximises the worst-case improvement `min(<g_x, g>, <g_xt, g>)` over the
/// ball `‖g - g0‖ <= c‖g0‖` around the average gradient `g0`. With two
/// objectives the dual is a 1-D convex problem over the mixing weight `w`:
/// minimise `<g_w, g0> + c‖g0‖ ‖g_w‖` with `g_w = w g_x + (1 - w) g_xt`,
/// then step from `g0` along `g_w` to the ball boundary.
pub fn align_cagrad(g_x: &ParamVector, g_xt: &ParamVector, c: f64) -> Result<ParamVector> {
    check_cagrad_c(c)?;
    g_x.check_len(g_xt)?;
    if norm(g_x) == 0.0 && norm(g_xt) == 0.0 {
        return Err(DpdaError::DegenerateGradient("cagrad with both gradients zero"));
    }
    let g0 = ParamVector::midpoint(g_x, g_xt);
    if c == 0.0 {
        return Ok(g0);
    }
    let radius = c * norm(&g0);

    // Everything F(w) needs is a quadratic form in w over these inner products.
    let xx = dot(g_x, g_x)?;
    let tt = dot(g_xt, g_xt)?;
    let xt = dot(g_x, g_xt)?;
    let x0 = dot(g_x, &g0)?;
    let t0 = dot(g_xt, &g0)?;
    let objective = |w: f64| {
        let v = 1.0 - w;
        let gw_norm2 = (w * w * xx + 2.0 * w * v * xt + v * v * tt).max(0.0);
        w * x0 + v * t0 + radius * gw_norm2.sqrt()
    };
    let w = minimize_scalar(objective, 0.0, 1.0, DUAL_TOL)?;
    let g_w = ParamVector::combine(w, g_x, 1.0 - w, g_xt);
    let gw_norm = norm(&g_w);
    if gw_norm < 1e-12 {
        return Ok(g0);
    }
    Ok(g0.add_scaled(radius / gw_norm, &g_w))
}

#[derive(Debug, Clone, Copy)]
pub struct CaGrad {
    c: f64,
}

impl CaGrad {
    pub fn new(c: f64) -> Result<Self> {
        check_cagrad_c(c)?;
        Ok(CaGrad { c })
    }
}

impl GradientAligner for CaGrad {
    fn name(&self) -> &'static str {
        "cagrad"
    }

    fn method(&self) -> AlignmentMethod {
        AlignmentMethod::CaGrad { c: self.c }
    }

    fn align(&mut self, g_x: &ParamVector, g_xt: &ParamVector) -> Result<AlignmentOutcome> {
        let g = align_cagrad(g_x, g_xt, self.c)?;
        g.ensure_finite("cagrad output")?;
        let applied = self.c > 0.0 && g != ParamVector::midpoint(g_x, g_xt);
        let cosine_before = cosine_or_zero(g_x, g_xt);
        Ok(AlignmentOutcome {
            g_final: g,
            conflict_detected: is_conflict(g_x, g_xt)?,
            alignment_applied: applied,
            cosine_before,
            cosine_after: cosine_before,
        })
    }
}
