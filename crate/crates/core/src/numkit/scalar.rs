use crate::error::{DpdaError, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the minimiser of a unimodal `f` on `[lo, hi]`.
///
/// The bracket is shrunk until its width is at most `2 * tol`; the midpoint of
/// the final bracket is returned, so it lies within `tol` of the true argmin.
pub fn minimize_scalar<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(DpdaError::Input(format!("invalid bracket [{lo}, {hi}] with tol {tol}")));
    }
    let mut eval = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(DpdaError::NonFinite(format!("objective at {x}")))
        }
    };

    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > 2.0 * tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
    }
    Ok(0.5 * (a + b))
}
