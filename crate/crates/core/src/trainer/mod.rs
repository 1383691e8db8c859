//! The dual-path training loop.
//!
//! Each step samples `batch_size_per_path` training utterances, builds an
//! original batch and an augmented batch from the same utterances, computes
//! one gradient per path, reconciles them with the configured
//! [`GradientAligner`] and applies the optimizer to the result. Validation
//! always runs on clean inputs; the best-validation checkpoint is kept.

mod data;
mod early_stop;
mod telemetry;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::align::{align_none, AlignerRegistry, AlignmentMethod, AlignmentParams, GradientAligner};
use crate::audio::{AugmentConfig, DatasetConfig, FeatureConfig};
use crate::error::{DpdaError, Result};
use crate::metrics::{conflict_fraction, eer, EvalReport, ScoreSet};
use crate::model::{apply_update, Batch, Checkpoint, MlpModel, OptimizerKind, OptimizerState};
use crate::numkit::{cosine, derive_seed, norm, ParamVector, Rng};
use crate::surface::{
    descent_mismatch, evaluate_grid, sample_directions, top_k_minima, ProbeConfig, SurfaceGrid, SurfaceMeta,
};

pub use data::{data_seed, make_dual_batch, FeaturePipeline, PreparedData};
pub use early_stop::{EarlyStopping, StopDecision};
pub use telemetry::{
    fmt_f64, read_epochs, read_iterations, write_epochs, write_iterations, EpochRecord, IterationRecord, EPOCH_COLUMNS,
    ITERATION_COLUMNS,
};

pub(crate) const TAG_INIT: u64 = 0x1417;
pub(crate) const TAG_SHUFFLE: u64 = 0x5348;
pub(crate) const TAG_AUGMENT: u64 = 0xA06;
pub(crate) const TAG_TEST_AUGMENT: u64 = 0x7E57;
pub(crate) const TAG_DATA: u64 = 0xDA7A;
pub(crate) const TAG_SURFACE: u64 = 0x5EF;

/// Everything a training run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub features: FeatureConfig,
    /// Hidden layer widths; input is `features.n_bands`, output is one unit.
    pub hidden: Vec<usize>,
    pub batch_size_per_path: usize,
    pub epochs_max: usize,
    pub early_stop_patience: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    /// Registered alignment strategy name.
    pub method: String,
    pub alignment: AlignmentParams,
    pub augment: AugmentConfig,
    /// Update on the original path only (conventional single-path baseline).
    /// Augmented-path statistics are still logged.
    pub single_path: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            dataset: DatasetConfig::default(),
            features: FeatureConfig::default(),
            hidden: vec![32, 16],
            batch_size_per_path: 5,
            epochs_max: 40,
            early_stop_patience: 7,
            lr: 1e-3,
            optimizer: OptimizerKind::Adam,
            method: "none".into(),
            alignment: AlignmentParams::default(),
            augment: AugmentConfig::default(),
            single_path: false,
        }
    }
}

impl TrainConfig {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut v = vec![self.features.n_bands];
        v.extend(&self.hidden);
        v.push(1);
        v
    }

    /// Checks every field and resolves the alignment method.
    pub fn validate(&self, registry: &AlignerRegistry) -> Result<AlignmentMethod> {
        if self.batch_size_per_path == 0 {
            return Err(DpdaError::Config("batch_size_per_path must be at least 1".into()));
        }
        if self.early_stop_patience == 0 {
            return Err(DpdaError::Config("early_stop_patience must be at least 1".into()));
        }
        if self.epochs_max == 0 {
            return Err(DpdaError::Config("epochs_max must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(DpdaError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.hidden.contains(&0) {
            return Err(DpdaError::Config("hidden layer widths must be positive".into()));
        }
        self.dataset.validate()?;
        self.features.validate()?;
        self.augment.validate()?;
        if self.dataset.samples_per_utterance() < self.features.frame {
            return Err(DpdaError::Config("utterances are shorter than one feature frame".into()));
        }
        if 2 * self.dataset.n_train_per_class < self.batch_size_per_path {
            return Err(DpdaError::Config("training split is smaller than one batch".into()));
        }
        registry.resolve(&self.method, &self.alignment)
    }

    /// Seed that drives augmentation draws.
    pub fn augment_seed(&self) -> u64 {
        self.augment.rng_seed.unwrap_or(self.seed)
    }
}

/// Result of one dual-path step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub record: IterationRecord,
    /// Direction handed to the optimizer.
    pub update: ParamVector,
}

/// One dual-path step: per-path gradients, alignment, optimizer update.
pub fn train_step(
    model: &mut MlpModel,
    optimizer: &mut OptimizerState,
    lr: f64,
    batch_orig: &Batch,
    batch_aug: &Batch,
    aligner: &mut dyn GradientAligner,
    single_path: bool,
) -> Result<StepOutcome> {
    let g_x = model.backward(batch_orig)?;
    let g_xt = model.backward(batch_aug)?;
    let loss_orig = model.loss(batch_orig)?;
    let loss_aug = model.loss(batch_aug)?;

    let outcome = match aligner.align(&g_x, &g_xt) {
        Ok(o) => o,
        Err(DpdaError::DegenerateGradient(why)) => {
            warn!("degenerate gradient ({why}); falling back to plain averaging for this step");
            align_none(&g_x, &g_xt)?
        }
        Err(e) => return Err(e),
    };
    let update = if single_path { g_x.clone() } else { outcome.g_final };
    apply_update(model, &update, optimizer, lr)?;

    let record = IterationRecord {
        epoch: 0,
        iter: 0,
        loss_orig,
        loss_aug,
        grad_norm_orig: norm(&g_x),
        grad_norm_aug: norm(&g_xt),
        cosine: cosine(&g_x, &g_xt).unwrap_or(0.0),
        conflict: outcome.conflict_detected,
        alignment_applied: outcome.alignment_applied && !single_path,
    };
    Ok(StepOutcome { record, update })
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub iterations: Vec<IterationRecord>,
    pub method: AlignmentMethod,
}

impl TrainOutcome {
    pub fn conflict_fraction(&self) -> Result<f64> {
        conflict_fraction(&self.iterations)
    }
}

/// Validation loss and EER of `model` on a clean batch.
pub fn evaluate_batch(model: &MlpModel, batch: &Batch) -> Result<(f64, f64)> {
    let loss = model.loss(batch)?;
    if !loss.is_finite() {
        return Err(DpdaError::NonFinite("validation loss".into()));
    }
    let scores = model.forward(batch)?;
    let e = eer(&ScoreSet::from_targets(&scores, batch.labels()))?;
    Ok((loss, e))
}

/// Runs training to completion on freshly generated data.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    let registry = AlignerRegistry::with_builtins();
    cfg.validate(&registry)?;
    let data = PreparedData::new(cfg)?;
    train_on(cfg, &data, &registry)
}

/// Runs training on already prepared data with the strategy from `registry`.
pub fn train_on(cfg: &TrainConfig, data: &PreparedData, registry: &AlignerRegistry) -> Result<TrainOutcome> {
    let mut log = Telemetry::default();
    let mut out = train_recording(cfg, data, registry, &mut log)?;
    out.epochs = log.epochs;
    out.iterations = log.iterations;
    Ok(out)
}

/// Records written so far; still holds everything up to the failing step
/// when training aborts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Telemetry {
    pub epochs: Vec<EpochRecord>,
    pub iterations: Vec<IterationRecord>,
}

/// Like [`train_on`], but telemetry accumulates in `log` as training runs.
/// The returned outcome carries empty record lists.
pub fn train_recording(
    cfg: &TrainConfig,
    data: &PreparedData,
    registry: &AlignerRegistry,
    log: &mut Telemetry,
) -> Result<TrainOutcome> {
    let method = cfg.validate(registry)?;
    let mut aligner = registry.create(&cfg.method, &cfg.alignment)?;
    let mut model = MlpModel::he_uniform(&cfg.layer_sizes(), &mut Rng::substream(cfg.seed, &[TAG_INIT]))?;
    let mut optimizer = OptimizerState::new(cfg.optimizer, model.param_count());
    let mut stopper = EarlyStopping::new(cfg.early_stop_patience);
    let norm_stats = Some(data.pipeline.norm.clone());

    let mut best = Checkpoint::capture(&model, &optimizer, 0, cfg.seed, norm_stats.clone());
    let n_train = data.train.len();

    for epoch in 1..=cfg.epochs_max {
        let mut order: Vec<usize> = (0..n_train).collect();
        Rng::substream(cfg.seed, &[TAG_SHUFFLE, epoch as u64]).shuffle(&mut order);
        let epoch_aug_seed = derive_seed(cfg.augment_seed(), &[TAG_AUGMENT, epoch as u64]);

        let first = log.iterations.len();
        for (i, chunk) in order.chunks_exact(cfg.batch_size_per_path).enumerate() {
            let utts: Vec<_> = chunk.iter().map(|&k| (k, &data.train[k])).collect();
            let (a, b) = make_dual_batch(&utts, &data.pipeline, &cfg.augment, epoch_aug_seed)?;
            let mut step = train_step(&mut model, &mut optimizer, cfg.lr, &a, &b, aligner.as_mut(), cfg.single_path)?;
            step.record.epoch = epoch;
            step.record.iter = i + 1;
            log.iterations.push(step.record);
        }
        let epoch_iters = &log.iterations[first..];

        let (val_loss, val_eer) = evaluate_batch(&model, &data.val_batch)?;
        let n = epoch_iters.len() as f64;
        let rec = EpochRecord {
            epoch,
            iters: epoch_iters.len(),
            conflict_count: epoch_iters.iter().filter(|r| r.conflict).count(),
            train_loss_mean_orig: epoch_iters.iter().map(|r| r.loss_orig).sum::<f64>() / n,
            train_loss_mean_aug: epoch_iters.iter().map(|r| r.loss_aug).sum::<f64>() / n,
            val_loss,
            val_eer,
        };
        info!(
            "epoch {epoch}: conflicts {}/{} val_loss {:.5} val_eer {:.4}",
            rec.conflict_count, rec.iters, val_loss, val_eer
        );
        log.epochs.push(rec);

        let decision = stopper.observe(epoch, val_loss);
        if decision.improved {
            best = Checkpoint::capture(&model, &optimizer, epoch, cfg.seed, norm_stats.clone());
        }
        if decision.stop {
            info!("early stop after epoch {epoch}");
            break;
        }
    }

    let last_epoch = log.epochs.last().map(|e| e.epoch).unwrap_or(0);
    Ok(TrainOutcome {
        last: Checkpoint::capture(&model, &optimizer, last_epoch, cfg.seed, norm_stats),
        best_epoch: stopper.best_epoch().unwrap_or(0),
        best_val_loss: stopper.best(),
        best,
        epochs: Vec::new(),
        iterations: Vec::new(),
        method,
    })
}

/// Test-split EER on clean inputs and on a held-out augmentation draw.
pub fn evaluate_test(cfg: &TrainConfig, data: &PreparedData, checkpoint: &Checkpoint) -> Result<EvalReport> {
    let model = checkpoint.model()?;
    let (_, clean) = evaluate_batch(&model, &data.test_batch)?;
    let noisy_seed = derive_seed(cfg.augment_seed(), &[TAG_TEST_AUGMENT]);
    let utts: Vec<_> = data.test.iter().enumerate().collect();
    let (_, noisy_batch) = make_dual_batch(&utts, &data.pipeline, &cfg.augment, noisy_seed)?;
    let (_, noisy) = evaluate_batch(&model, &noisy_batch)?;
    let n_bonafide = data.test_batch.labels().iter().filter(|&&y| y >= 0.5).count();
    Ok(EvalReport {
        eer: clean,
        n_bonafide,
        n_spoof: data.test_batch.len() - n_bonafide,
        conflict_fraction: None,
        eer_augmented: Some(noisy),
    })
}

/// Probes the loss surface around `checkpoint` on paired clean and augmented
/// batches of training utterances. Directions are drawn from `cfg.seed`.
pub fn probe_checkpoint(
    cfg: &TrainConfig,
    probe: &ProbeConfig,
    data: &PreparedData,
    checkpoint: &Checkpoint,
) -> Result<(SurfaceGrid, SurfaceMeta)> {
    probe.validate()?;
    let model = checkpoint.model()?;
    if model.layer_sizes() != cfg.layer_sizes().as_slice() {
        return Err(DpdaError::Config(format!(
            "checkpoint layers {:?} do not match configured {:?}",
            model.layer_sizes(),
            cfg.layer_sizes()
        )));
    }
    let mut pipeline = data.pipeline.clone();
    if let Some(n) = &checkpoint.feature_norm {
        if n.mean.len() != model.input_dim() {
            return Err(DpdaError::Config("checkpoint feature statistics do not match the model input".into()));
        }
        pipeline.norm = n.clone();
    }

    let mut picked = Vec::new();
    let (mut n_bona, mut n_spoof) = (0, 0);
    for (i, u) in data.train.iter().enumerate() {
        let count = match u.label {
            crate::audio::Label::Bonafide => &mut n_bona,
            crate::audio::Label::Spoof => &mut n_spoof,
        };
        if *count < probe.n_per_class {
            *count += 1;
            picked.push((i, u));
        }
    }
    if n_bona < probe.n_per_class || n_spoof < probe.n_per_class {
        return Err(DpdaError::Config(format!("surface.n_per_class {} exceeds the training split", probe.n_per_class)));
    }
    let aug_seed = derive_seed(cfg.augment_seed(), &[TAG_SURFACE]);
    let (orig, aug) = make_dual_batch(&picked, &pipeline, &cfg.augment, aug_seed)?;

    let (d1, d2) = sample_directions(&model, &mut Rng::substream(cfg.seed, &[TAG_SURFACE]))?;
    let grid = evaluate_grid(&model, &d1, &d2, &orig, &aug, probe.half_range, probe.steps)?;
    let (minima_orig, minima_aug) = top_k_minima(&grid, probe.top_k)?;
    let angles = descent_mismatch(&minima_orig, &minima_aug)?;
    let meta = SurfaceMeta {
        seed: cfg.seed,
        half_range: probe.half_range,
        steps: probe.steps,
        checkpoint_epoch: checkpoint.epoch,
        minima_orig,
        minima_aug,
        angles,
    };
    Ok((grid, meta))
}
