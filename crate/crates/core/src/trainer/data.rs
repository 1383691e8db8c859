use rayon::prelude::*;

use super::{TrainConfig, TAG_DATA};
use crate::audio::{augment, generate_dataset, AugmentConfig, FeatureExtractor, Split, Utterance};
use crate::error::Result;
use crate::model::{Batch, FeatureNorm};
use crate::numkit::{derive_seed, Rng};

/// Feature extraction followed by the training-set standardisation.
#[derive(Clone)]
pub struct FeaturePipeline {
    pub extractor: FeatureExtractor,
    pub norm: FeatureNorm,
}

impl FeaturePipeline {
    pub fn features(&self, u: &Utterance) -> Result<Vec<f64>> {
        Ok(self.norm.apply(&self.extractor.extract(&u.waveform)?))
    }

    pub fn batch(&self, utts: &[Utterance]) -> Result<Batch> {
        let rows = utts.par_iter().map(|u| self.features(u)).collect::<Result<Vec<_>>>()?;
        let labels: Vec<f64> = utts.iter().map(|u| u.label.target()).collect();
        Batch::new(&rows, &labels)
    }
}

/// Generated splits, the fitted feature pipeline, and clean val/test batches.
pub struct PreparedData {
    pub train: Vec<Utterance>,
    pub val: Vec<Utterance>,
    pub test: Vec<Utterance>,
    pub pipeline: FeaturePipeline,
    pub val_batch: Batch,
    pub test_batch: Batch,
}

/// Seed of the synthetic corpus for a run.
pub fn data_seed(cfg: &TrainConfig) -> u64 {
    derive_seed(cfg.seed, &[TAG_DATA])
}

impl PreparedData {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        let data_seed = data_seed(cfg);
        let d = &cfg.dataset;
        let train = generate_dataset(d, d.n_train_per_class, data_seed, Split::Train)?;
        let val = generate_dataset(d, d.n_val_per_class, data_seed, Split::Val)?;
        let test = generate_dataset(d, d.n_test_per_class, data_seed, Split::Test)?;
        let extractor = FeatureExtractor::new(cfg.features)?;
        let raw = train.par_iter().map(|u| extractor.extract(&u.waveform)).collect::<Result<Vec<_>>>()?;
        let norm = FeatureNorm::fit(&raw)?;
        let pipeline = FeaturePipeline { extractor, norm };
        let val_batch = pipeline.batch(&val)?;
        let test_batch = pipeline.batch(&test)?;
        Ok(PreparedData { train, val, test, pipeline, val_batch, test_batch })
    }
}

/// Original and augmented batches over the same utterances, paired by row.
///
/// Each entry is `(utterance index, utterance)`; the augmentation draw for an
/// utterance depends only on `aug_seed` and its index.
pub fn make_dual_batch(
    originals: &[(usize, &Utterance)],
    pipeline: &FeaturePipeline,
    aug: &AugmentConfig,
    aug_seed: u64,
) -> Result<(Batch, Batch)> {
    let rows = originals
        .par_iter()
        .map(|&(idx, u)| {
            let clean = pipeline.extractor.extract(&u.waveform)?;
            let augmented = if aug.is_identity() {
                clean.clone()
            } else {
                let mut rng = Rng::substream(aug_seed, &[idx as u64]);
                pipeline.extractor.extract(&augment(&u.waveform, aug, &mut rng))?
            };
            Ok((pipeline.norm.apply(&clean), pipeline.norm.apply(&augmented)))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<f64> = originals.iter().map(|(_, u)| u.label.target()).collect();
    let (a, b): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok((Batch::new(&a, &labels)?, Batch::new(&b, &labels)?))
}
