use std::ops::Range;

use super::Batch;
use crate::error::{DpdaError, Result};
use crate::numkit::{ParamVector, Rng};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the loss.
pub const PROB_CLAMP: f64 = 1e-12;

/// Fully connected network: ReLU hidden layers, sigmoid output.
///
/// Layer `l` stores a `fan_out × fan_in` row-major weight matrix and a bias
/// vector. The flat parameter order is layer by layer, weights then biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl MlpModel {
    /// All-zero model.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(DpdaError::Config("layer sizes need at least two positive entries".into()));
        }
        if *layer_sizes.last().unwrap() != 1 {
            return Err(DpdaError::Config("the output layer must have exactly one unit".into()));
        }
        let weights = layer_sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = layer_sizes.windows(2).map(|w| vec![0.0; w[1]]).collect();
        Ok(MlpModel { layer_sizes: layer_sizes.to_vec(), weights, biases })
    }

    /// He-uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn he_uniform(layer_sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut m = Self::zeros(layer_sizes)?;
        for (l, w) in m.weights.iter_mut().enumerate() {
            let bound = (6.0 / layer_sizes[l] as f64).sqrt();
            w.iter_mut().for_each(|v| *v = rng.uniform_range(-bound, bound));
        }
        Ok(m)
    }

    pub fn from_parts(layer_sizes: Vec<usize>, weights: Vec<Vec<f64>>, biases: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self::zeros(&layer_sizes)?;
        if weights.len() != m.weights.len() || biases.len() != m.biases.len() {
            return Err(DpdaError::Input("layer count does not match layer sizes".into()));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.len() != m.weights[l].len() {
                return Err(DpdaError::DimensionMismatch { expected: m.weights[l].len(), got: w.len() });
            }
            if b.len() != m.biases[l].len() {
                return Err(DpdaError::DimensionMismatch { expected: m.biases[l].len(), got: b.len() });
            }
        }
        let out = MlpModel { layer_sizes, weights, biases };
        out.parameters().ensure_finite("model parameters")?;
        Ok(out)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// `Σ (fan_in + 1) · fan_out`.
    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Flat index range of each layer's weights and biases together.
    pub fn layer_blocks(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let r = start..start + (w[0] + 1) * w[1];
                start = r.end;
                r
            })
            .collect()
    }

    pub fn parameters(&self) -> ParamVector {
        let mut v = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend_from_slice(w);
            v.extend_from_slice(b);
        }
        ParamVector::from_raw(v)
    }

    pub fn set_parameters(&mut self, p: &ParamVector) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(DpdaError::DimensionMismatch { expected: self.param_count(), got: p.len() });
        }
        let mut off = 0;
        let src = p.as_slice();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&src[off..off + nw]);
            off += nw;
            b.copy_from_slice(&src[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    pub fn with_parameters(&self, p: &ParamVector) -> Result<MlpModel> {
        let mut m = self.clone();
        m.set_parameters(p)?;
        Ok(m)
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.dim() != self.input_dim() {
            return Err(DpdaError::DimensionMismatch { expected: self.input_dim(), got: batch.dim() });
        }
        Ok(())
    }

    /// Pre-activations of every layer for one input row.
    fn pre_activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(self.n_layers());
        let mut a: Vec<f64> = x.to_vec();
        for l in 0..self.n_layers() {
            let (fi, fo) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[l];
            let z: Vec<f64> = (0..fo)
                .map(|o| {
                    self.biases[l][o] + w[o * fi..(o + 1) * fi].iter().zip(&a).map(|(wi, ai)| wi * ai).sum::<f64>()
                })
                .collect();
            a = if l + 1 < self.n_layers() { z.iter().map(|v| v.max(0.0)).collect() } else { z.clone() };
            zs.push(z);
        }
        zs
    }

    fn output_logit(&self, x: &[f64]) -> f64 {
        self.pre_activations(x).last().unwrap()[0]
    }

    /// Sigmoid outputs, one per row.
    pub fn forward(&self, batch: &Batch) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        Ok((0..batch.len()).map(|i| sigmoid(self.output_logit(batch.row(i)))).collect())
    }

    /// Mean binary cross-entropy.
    pub fn loss(&self, batch: &Batch) -> Result<f64> {
        let p = self.forward(batch)?;
        let n = p.len() as f64;
        Ok(p.iter().zip(batch.labels()).map(|(&p, &y)| bce(p, y)).sum::<f64>() / n)
    }

    /// Exact gradient of [`loss`](Self::loss) with respect to the flat parameters.
    pub fn backward(&self, batch: &Batch) -> Result<ParamVector> {
        self.check_batch(batch)?;
        let n = batch.len() as f64;
        let mut gw: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let last = self.n_layers() - 1;
        for i in 0..batch.len() {
            let x = batch.row(i);
            let y = batch.labels()[i];
            let zs = self.pre_activations(x);
            let p = sigmoid(zs[last][0]);
            // the clamp is flat outside its range
            let mut delta = if (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) { vec![(p - y) / n] } else { vec![0.0] };
            for l in (0..=last).rev() {
                let fi = self.layer_sizes[l];
                let input: Vec<f64> = if l == 0 { x.to_vec() } else { zs[l - 1].iter().map(|v| v.max(0.0)).collect() };
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    gb[l][o] += d;
                    for (g, a) in gw[l][o * fi..(o + 1) * fi].iter_mut().zip(&input) {
                        *g += d * a;
                    }
                }
                if l > 0 {
                    let w = &self.weights[l];
                    delta = (0..fi)
                        .map(|j| {
                            if zs[l - 1][j] > 0.0 {
                                delta.iter().enumerate().map(|(o, d)| d * w[o * fi + j]).sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for (w, b) in gw.into_iter().zip(gb) {
            flat.extend(w);
            flat.extend(b);
        }
        ParamVector::new(flat)
    }
}

fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_outputs_half() {
        let m = MlpModel::zeros(&[3, 4, 1]).unwrap();
        let b = Batch::new(&[vec![1.0, -2.0, 0.5], vec![0.0, 0.0, 9.0]], &[1.0, 0.0]).unwrap();
        assert_eq!(m.forward(&b).unwrap(), vec![0.5, 0.5]);
        assert!((m.loss(&b).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn single_layer_is_monotone_in_positive_weight_input() {
        let m = MlpModel::from_parts(vec![1, 1], vec![vec![2.0]], vec![vec![-1.0]]).unwrap();
        let xs = [-2.0, -0.5, 0.0, 0.3, 1.0, 4.0];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let p = m.forward(&Batch::new(&rows, &[0.0; 6]).unwrap()).unwrap();
        assert_eq!(p.len(), 6);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn perfect_prediction_loss_is_tiny() {
        let m = MlpModel::from_parts(vec![1, 1], vec![vec![100.0]], vec![vec![0.0]]).unwrap();
        let b = Batch::new(&[vec![1.0], vec![-1.0]], &[1.0, 0.0]).unwrap();
        assert!(m.loss(&b).unwrap() <= 1e-11);
    }

    #[test]
    fn loss_is_mean_over_examples() {
        let m = MlpModel::from_parts(vec![1, 1], vec![vec![1.0]], vec![vec![0.0]]).unwrap();
        let b1 = Batch::new(&[vec![0.7]], &[1.0]).unwrap();
        let b2 = Batch::new(&[vec![-0.2]], &[0.0]).unwrap();
        let both = b1.concat(&b2).unwrap();
        let expect = 0.5 * (m.loss(&b1).unwrap() + m.loss(&b2).unwrap());
        assert!((m.loss(&both).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn duplicated_example_gives_same_gradient() {
        let m = MlpModel::he_uniform(&[2, 3, 1], &mut Rng::new(4)).unwrap();
        let one = Batch::new(&[vec![0.3, -1.2]], &[1.0]).unwrap();
        let two = one.concat(&one).unwrap();
        let (g1, g2) = (m.backward(&one).unwrap(), m.backward(&two).unwrap());
        assert_eq!(g1.len(), m.param_count());
        for i in 0..g1.len() {
            assert!((g1[i] - g2[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn flatten_round_trip_is_exact() {
        let m = MlpModel::he_uniform(&[24, 32, 16, 1], &mut Rng::new(1)).unwrap();
        assert_eq!(m.param_count(), 25 * 32 + 33 * 16 + 17);
        let p = m.parameters();
        let m2 = MlpModel::zeros(&[24, 32, 16, 1]).unwrap().with_parameters(&p).unwrap();
        assert_eq!(m, m2);
        let blocks = m.layer_blocks();
        assert_eq!(blocks.last().unwrap().end, m.param_count());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = MlpModel::zeros(&[3, 1]).unwrap();
        let b = Batch::new(&[vec![1.0, 2.0]], &[1.0]).unwrap();
        assert!(matches!(m.forward(&b), Err(DpdaError::DimensionMismatch { .. })));
    }

    #[test]
    fn bad_layer_sizes_rejected() {
        assert!(MlpModel::zeros(&[3]).is_err());
        assert!(MlpModel::zeros(&[3, 2]).is_err());
        assert!(MlpModel::zeros(&[3, 0, 1]).is_err());
    }
}
