//! 2-D loss-landscape probes around a parameter point.
//!
//! Two random directions are drawn, scaled so that every layer block matches
//! the norm of the corresponding parameters (filter-wise normalisation), made
//! mutually orthogonal, and the loss of both the original and augmented path
//! is evaluated on a regular `(α, β)` grid.

use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DpdaError, Result};
use crate::model::{Batch, MlpModel};
use crate::numkit::{norm, orthonormalize_pair, ParamVector, Rng};
use crate::trainer::fmt_f64;

const MAX_DIRECTION_DRAWS: usize = 16;

/// Grid and batch settings for a probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub half_range: f64,
    pub steps: usize,
    pub top_k: usize,
    /// Training utterances per class in each probe batch.
    pub n_per_class: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { half_range: 1.0, steps: 41, top_k: 3, n_per_class: 50 }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_multiple_of(2) {
            return Err(DpdaError::Config(format!("surface.steps must be odd, got {}", self.steps)));
        }
        if self.top_k == 0 || self.top_k > self.steps * self.steps {
            return Err(DpdaError::Config(format!("surface.top_k {} outside the grid", self.top_k)));
        }
        if self.n_per_class == 0 {
            return Err(DpdaError::Config("surface.n_per_class must be positive".into()));
        }
        if !(self.half_range > 0.0 && self.half_range.is_finite()) {
            return Err(DpdaError::Config("surface.half_range must be positive".into()));
        }
        Ok(())
    }
}

/// A model whose loss can be evaluated at arbitrary parameter vectors.
pub trait Probeable: Sync {
    type Data: Sync;

    fn parameters(&self) -> ParamVector;

    /// Flat index ranges normalised together when drawing directions.
    fn layer_blocks(&self) -> Vec<Range<usize>>;

    fn loss_at(&self, params: &ParamVector, data: &Self::Data) -> Result<f64>;
}

impl Probeable for MlpModel {
    type Data = Batch;

    fn parameters(&self) -> ParamVector {
        MlpModel::parameters(self)
    }

    fn layer_blocks(&self) -> Vec<Range<usize>> {
        MlpModel::layer_blocks(self)
    }

    fn loss_at(&self, params: &ParamVector, data: &Batch) -> Result<f64> {
        self.with_parameters(params)?.loss(data)
    }
}

/// Per-block norms of `v`.
pub fn block_norms(v: &ParamVector, blocks: &[Range<usize>]) -> Vec<f64> {
    blocks.iter().map(|r| v.as_slice()[r.clone()].iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
}

fn layer_normalized_gaussian(theta: &ParamVector, blocks: &[Range<usize>], rng: &mut Rng) -> ParamVector {
    let mut d = ParamVector::zeros(theta.len());
    for r in blocks {
        let target = block_norms(theta, std::slice::from_ref(r))[0];
        let raw: Vec<f64> = r.clone().map(|_| rng.normal()).collect();
        let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let k = if n > 0.0 { target / n } else { 0.0 };
        for (dst, v) in d.as_mut_slice()[r.clone()].iter_mut().zip(raw) {
            *dst = k * v;
        }
    }
    d
}

/// Two orthogonal directions; the first has per-block norms equal to the
/// model's parameter block norms. The second is orthogonalised against the
/// first and rescaled to its pre-orthogonalisation total norm.
pub fn sample_directions<M: Probeable>(model: &M, rng: &mut Rng) -> Result<(ParamVector, ParamVector)> {
    let theta = model.parameters();
    let blocks = model.layer_blocks();
    for _ in 0..MAX_DIRECTION_DRAWS {
        let d1 = layer_normalized_gaussian(&theta, &blocks, rng);
        let d2 = layer_normalized_gaussian(&theta, &blocks, rng);
        match orthonormalize_pair(&d1, &d2) {
            Ok((u1, u2)) => return Ok((u1.scaled(norm(&d1)), u2.scaled(norm(&d2)))),
            Err(DpdaError::ResampleRequired) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(DpdaError::ResampleRequired)
}

/// Loss values over the probe grid. Rows index `alphas`, columns `betas`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub loss_orig: Vec<Vec<f64>>,
    pub loss_aug: Vec<Vec<f64>>,
    pub d1: ParamVector,
    pub d2: ParamVector,
    /// Parameter norm of each layer block at the probe centre.
    pub scale: Vec<f64>,
}

/// `steps` evenly spaced points on `[-half_range, half_range]` with an exact 0
/// in the middle.
pub fn grid_axis(half_range: f64, steps: usize) -> Vec<f64> {
    let m = (steps - 1) as f64;
    (0..steps).map(|i| if 2 * i + 1 == steps { 0.0 } else { half_range * (2.0 * i as f64 / m - 1.0) }).collect()
}

/// Evaluates both paths on the grid. The model itself is never modified.
/// Non-finite losses are stored as `+inf`.
pub fn evaluate_grid<M: Probeable>(
    model: &M,
    d1: &ParamVector,
    d2: &ParamVector,
    data_orig: &M::Data,
    data_aug: &M::Data,
    half_range: f64,
    steps: usize,
) -> Result<SurfaceGrid> {
    if steps == 0 || steps.is_multiple_of(2) {
        return Err(DpdaError::Input(format!("grid steps must be odd, got {steps}")));
    }
    if !(half_range > 0.0 && half_range.is_finite()) {
        return Err(DpdaError::Input("half_range must be positive".into()));
    }
    let theta = model.parameters();
    theta.check_len(d1)?;
    theta.check_len(d2)?;
    let axis = grid_axis(half_range, steps);

    let cell = |a: f64, b: f64| -> Result<(f64, f64)> {
        let p = ParamVector::combine(1.0, &theta.add_scaled(a, d1), b, d2);
        let sentinel = |v: Result<f64>| match v {
            Ok(x) if x.is_finite() => Ok(x),
            Ok(_) | Err(DpdaError::NonFinite(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        };
        Ok((sentinel(model.loss_at(&p, data_orig))?, sentinel(model.loss_at(&p, data_aug))?))
    };

    let rows = axis
        .par_iter()
        .map(|&a| axis.iter().map(|&b| cell(a, b)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let (loss_orig, loss_aug) = rows.into_iter().map(|r| r.into_iter().unzip()).unzip();
    Ok(SurfaceGrid {
        alphas: axis.clone(),
        betas: axis,
        loss_orig,
        loss_aug,
        d1: d1.clone(),
        d2: d2.clone(),
        scale: block_norms(&theta, &model.layer_blocks()),
    })
}

/// One grid cell selected as a low-loss point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMinimum {
    pub alpha: f64,
    pub beta: f64,
    pub loss: f64,
    pub row: usize,
    pub col: usize,
}

/// The `k` lowest cells of one surface, ties broken by distance
/// `|α| + |β|` from the centre and then row-major order.
pub fn top_k_cells(alphas: &[f64], betas: &[f64], losses: &[Vec<f64>], k: usize) -> Result<Vec<GridMinimum>> {
    let cells = alphas.len() * betas.len();
    if k == 0 || k > cells {
        return Err(DpdaError::Input(format!("k must be in 1..={cells}, got {k}")));
    }
    let mut all: Vec<GridMinimum> = (0..alphas.len())
        .flat_map(|i| {
            (0..betas.len()).map(move |j| GridMinimum {
                alpha: alphas[i],
                beta: betas[j],
                loss: losses[i][j],
                row: i,
                col: j,
            })
        })
        .collect();
    all.sort_by(|a, b| {
        a.loss
            .total_cmp(&b.loss)
            .then((a.alpha.abs() + a.beta.abs()).total_cmp(&(b.alpha.abs() + b.beta.abs())))
            .then((a.row, a.col).cmp(&(b.row, b.col)))
    });
    all.truncate(k);
    Ok(all)
}

/// Lowest `k` cells of the original and augmented surfaces.
pub fn top_k_minima(grid: &SurfaceGrid, k: usize) -> Result<(Vec<GridMinimum>, Vec<GridMinimum>)> {
    Ok((
        top_k_cells(&grid.alphas, &grid.betas, &grid.loss_orig, k)?,
        top_k_cells(&grid.alphas, &grid.betas, &grid.loss_aug, k)?,
    ))
}

/// Angle in degrees between rank-matched offsets from the grid centre.
/// `None` where either minimum sits at the centre.
pub fn descent_mismatch(orig: &[GridMinimum], aug: &[GridMinimum]) -> Result<Vec<Option<f64>>> {
    if orig.len() != aug.len() {
        return Err(DpdaError::DimensionMismatch { expected: orig.len(), got: aug.len() });
    }
    Ok(orig.iter().zip(aug).map(|(a, b)| offset_angle((a.alpha, a.beta), (b.alpha, b.beta))).collect())
}

pub fn offset_angle(a: (f64, f64), b: (f64, f64)) -> Option<f64> {
    let na = a.0.hypot(a.1);
    let nb = b.0.hypot(b.1);
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let cross = a.0 * b.1 - a.1 * b.0;
    let dot = a.0 * b.0 + a.1 * b.1;
    Some(cross.abs().atan2(dot).to_degrees())
}

/// Contents of `surface_meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMeta {
    pub seed: u64,
    pub half_range: f64,
    pub steps: usize,
    pub checkpoint_epoch: usize,
    pub minima_orig: Vec<GridMinimum>,
    pub minima_aug: Vec<GridMinimum>,
    pub angles: Vec<Option<f64>>,
}

/// Header row of β values, then one row per α starting with the α value.
pub fn write_surface_csv(path: &Path, alphas: &[f64], betas: &[f64], losses: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["alpha\\beta".to_string()];
    header.extend(betas.iter().map(|&b| fmt_f64(b)));
    w.write_record(&header)?;
    for (a, row) in alphas.iter().zip(losses) {
        let mut rec = vec![fmt_f64(*a)];
        rec.extend(row.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_surface_csv`] into `(alphas, betas, losses)`.
pub fn read_surface_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut records = r.records();
    let parse = |s: &str| s.parse::<f64>().map_err(|e| DpdaError::Input(format!("bad number '{s}': {e}")));
    let header = records.next().ok_or_else(|| DpdaError::Input("empty surface csv".into()))??;
    let betas = header.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?;
    let mut alphas = Vec::new();
    let mut losses = Vec::new();
    for rec in records {
        let rec = rec?;
        let mut it = rec.iter();
        alphas.push(parse(it.next().unwrap_or(""))?);
        losses.push(it.map(parse).collect::<Result<Vec<_>>>()?);
    }
    Ok((alphas, betas, losses))
}
