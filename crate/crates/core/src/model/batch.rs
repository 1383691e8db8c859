use serde::{Deserialize, Serialize};

use crate::error::{DpdaError, Result};

/// `n × dim` feature matrix (row-major) with one binary target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<f64>,
}

impl Batch {
    pub fn new(rows: &[Vec<f64>], labels: &[f64]) -> Result<Self> {
        if rows.is_empty() {
            return Err(DpdaError::Input("batch must contain at least one example".into()));
        }
        if rows.len() != labels.len() {
            return Err(DpdaError::DimensionMismatch { expected: rows.len(), got: labels.len() });
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(DpdaError::Input("feature dimension must be positive".into()));
        }
        let mut features = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(DpdaError::DimensionMismatch { expected: dim, got: r.len() });
            }
            features.extend_from_slice(r);
        }
        Ok(Batch { features, dim, labels: labels.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Batch) -> Result<Batch> {
        if self.dim != other.dim {
            return Err(DpdaError::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(Batch { features, dim: self.dim, labels })
    }
}

/// Per-dimension standardisation fitted on the clean training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNorm {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| DpdaError::Input("cannot fit normaliser on no rows".into()))?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std = var.into_iter().map(|v| v.sqrt().max(1e-6)).collect();
        Ok(FeatureNorm { mean, std })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_rejected() {
        assert!(Batch::new(&[vec![1.0, 2.0], vec![1.0]], &[0.0, 1.0]).is_err());
        assert!(Batch::new(&[], &[]).is_err());
        assert!(Batch::new(&[vec![1.0]], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn concat_stacks_rows() {
        let a = Batch::new(&[vec![1.0, 2.0]], &[1.0]).unwrap();
        let b = Batch::new(&[vec![3.0, 4.0]], &[0.0]).unwrap();
        let c = a.concat(&b).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.row(1), &[3.0, 4.0]);
        assert_eq!(c.labels(), &[1.0, 0.0]);
    }

    #[test]
    fn normaliser_standardises() {
        let rows = vec![vec![1.0, 10.0], vec![3.0, 10.0]];
        let n = FeatureNorm::fit(&rows).unwrap();
        assert_eq!(n.apply(&rows[0]), vec![-1.0, 0.0]);
        assert_eq!(n.apply(&rows[1]), vec![1.0, 0.0]);
    }
}
