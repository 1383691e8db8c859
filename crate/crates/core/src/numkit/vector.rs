use serde::{Deserialize, Serialize};

use crate::error::{DpdaError, Result};

/// Flat vector over every model parameter. Gradients, parameter snapshots and
/// probe directions all share this representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    /// Wraps `values`, rejecting empty or non-finite input.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(DpdaError::Input("parameter vector must be non-empty".into()));
        }
        let v = ParamVector(values);
        v.ensure_finite("ParamVector::new")?;
        Ok(v)
    }

    /// Wraps without validation; callers guarantee the invariants.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.0.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(DpdaError::NonFinite(context.to_string()))
        }
    }

    pub fn check_len(&self, other: &ParamVector) -> Result<()> {
        if self.len() == other.len() {
            Ok(())
        } else {
            Err(DpdaError::DimensionMismatch { expected: self.len(), got: other.len() })
        }
    }

    pub fn scaled(&self, k: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|x| k * x).collect())
    }

    /// `self + k * other`. Lengths must already agree.
    pub fn add_scaled(&self, k: f64, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.len(), other.len());
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a + k * b).collect())
    }

    /// `wa * a + wb * b`.
    pub fn combine(wa: f64, a: &ParamVector, wb: f64, b: &ParamVector) -> ParamVector {
        debug_assert_eq!(a.len(), b.len());
        ParamVector(a.0.iter().zip(&b.0).map(|(x, y)| wa * x + wb * y).collect())
    }

    /// Elementwise `½(a + b)`.
    pub fn midpoint(a: &ParamVector, b: &ParamVector) -> ParamVector {
        debug_assert_eq!(a.len(), b.len());
        ParamVector(a.0.iter().zip(&b.0).map(|(x, y)| 0.5 * (x + y)).collect())
    }

    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        self.add_scaled(-1.0, other)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(v: ParamVector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub fn dot(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    a.check_len(b)?;
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum())
}

pub fn norm(a: &ParamVector) -> f64 {
    a.0.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    let d = dot(a, b)?;
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(DpdaError::DegenerateGradient("cosine of a zero-norm vector"));
    }
    Ok((d / (na * nb)).clamp(-1.0, 1.0))
}

/// Gram–Schmidt on a pair: returns `d1/‖d1‖` and the normalised residual of
/// `d2` after removing its `d1` component.
pub fn orthonormalize_pair(d1: &ParamVector, d2: &ParamVector) -> Result<(ParamVector, ParamVector)> {
    d1.check_len(d2)?;
    let n1 = norm(d1);
    let n2 = norm(d2);
    if n1 == 0.0 || n2 == 0.0 {
        return Err(DpdaError::ResampleRequired);
    }
    let u1 = d1.scaled(1.0 / n1);
    let mut r = d2.add_scaled(-dot(d2, &u1)?, &u1);
    // second pass keeps the mutual dot at rounding level for nearly parallel draws
    r = r.add_scaled(-dot(&r, &u1)?, &u1);
    let nr = norm(&r);
    if nr < 1e-12 * n2 {
        return Err(DpdaError::ResampleRequired);
    }
    Ok((u1, r.scaled(1.0 / nr)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(dot(&pv(&[1.0, 0.0]), &pv(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(dot(&pv(&[1.0, 0.0]), &pv(&[-1.0, 1.0])).unwrap(), -1.0);
    }

    #[test]
    fn dot_length_mismatch() {
        let err = dot(&pv(&[1.0]), &pv(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(err, DpdaError::DimensionMismatch { expected: 1, got: 2 }));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&pv(&[0.0, 0.0, 0.0])), 0.0);
        assert_eq!(norm(&pv(&[3.0, 4.0])), 5.0);
        assert!((norm(&pv(&[1.0, 1.0])) - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(cosine(&pv(&[2.0, 0.0]), &pv(&[5.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine(&pv(&[1.0, 0.0]), &pv(&[-1.0, 0.0])).unwrap(), -1.0);
        assert!(matches!(cosine(&pv(&[0.0, 0.0]), &pv(&[1.0, 0.0])), Err(DpdaError::DegenerateGradient(_))));
    }

    #[test]
    fn orthonormalize_examples() {
        let (u1, u2) = orthonormalize_pair(&pv(&[1.0, 0.0]), &pv(&[1.0, 1.0])).unwrap();
        assert_eq!(u1.as_slice(), &[1.0, 0.0]);
        assert!((u2[0]).abs() < 1e-15 && (u2[1] - 1.0).abs() < 1e-15);

        let (u1, u2) = orthonormalize_pair(&pv(&[2.0, 0.0]), &pv(&[0.0, 3.0])).unwrap();
        assert_eq!(u1.as_slice(), &[1.0, 0.0]);
        assert_eq!(u2.as_slice(), &[0.0, 1.0]);

        let (u1, u2) = orthonormalize_pair(&pv(&[1.0, 1.0]), &pv(&[1.0, 0.0])).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((u1[0] - h).abs() < 1e-12 && (u1[1] - h).abs() < 1e-12);
        assert!((u2[0] - h).abs() < 1e-12 && (u2[1] + h).abs() < 1e-12);
    }

    #[test]
    fn orthonormalize_parallel_requires_resample() {
        let err = orthonormalize_pair(&pv(&[1.0, 2.0]), &pv(&[2.0, 4.0])).unwrap_err();
        assert!(matches!(err, DpdaError::ResampleRequired));
    }

    #[test]
    fn new_rejects_nan_and_empty() {
        assert!(ParamVector::new(vec![]).is_err());
        assert!(ParamVector::new(vec![1.0, f64::NAN]).is_err());
    }
}
