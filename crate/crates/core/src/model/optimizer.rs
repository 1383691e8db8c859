use serde::{Deserialize, Serialize};

use super::MlpModel;
use crate::error::{DpdaError, Result};
use crate::numkit::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Optimizer together with its running state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerState {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64, t: u64, m: Vec<f64>, v: Vec<f64> },
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, n_params: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => OptimizerState::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                t: 0,
                m: vec![0.0; n_params],
                v: vec![0.0; n_params],
            },
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            OptimizerState::Sgd => OptimizerKind::Sgd,
            OptimizerState::Adam { .. } => OptimizerKind::Adam,
        }
    }

    /// Turns a gradient into the parameter increment for this step.
    fn increment(&mut self, g: &[f64], lr: f64) -> Vec<f64> {
        match self {
            OptimizerState::Sgd => g.iter().map(|gi| -lr * gi).collect(),
            OptimizerState::Adam { beta1, beta2, eps, t, m, v } => {
                *t += 1;
                let bc1 = 1.0 - beta1.powi(*t as i32);
                let bc2 = 1.0 - beta2.powi(*t as i32);
                g.iter()
                    .zip(m.iter_mut())
                    .zip(v.iter_mut())
                    .map(|((gi, mi), vi)| {
                        *mi = *beta1 * *mi + (1.0 - *beta1) * gi;
                        *vi = *beta2 * *vi + (1.0 - *beta2) * gi * gi;
                        let m_hat = *mi / bc1;
                        let v_hat = *vi / bc2;
                        -lr * m_hat / (v_hat.sqrt() + *eps)
                    })
                    .collect()
            }
        }
    }
}

/// One optimizer step along `g`.
pub fn apply_update(model: &mut MlpModel, g: &ParamVector, state: &mut OptimizerState, lr: f64) -> Result<()> {
    if g.len() != model.param_count() {
        return Err(DpdaError::DimensionMismatch { expected: model.param_count(), got: g.len() });
    }
    g.ensure_finite("gradient passed to the optimizer")?;
    if let OptimizerState::Adam { m, .. } = state {
        if m.len() != g.len() {
            return Err(DpdaError::DimensionMismatch { expected: m.len(), got: g.len() });
        }
    }
    let inc = state.increment(g.as_slice(), lr);
    let mut p = model.parameters();
    for (pi, d) in p.as_mut_slice().iter_mut().zip(inc) {
        *pi += d;
    }
    p.ensure_finite("updated parameters")?;
    model.set_parameters(&p)
}
