use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use dpda::audio::{
    augment_with_report, generate_dataset, write_manifest, write_wav, ManifestEntry, Split, StageReport, Utterance,
};
use dpda::config::RunConfig;
use dpda::metrics::{conflict_fraction, EvalReport};
use dpda::model::Checkpoint;
use dpda::numkit::{derive_seed, Rng};
use dpda::surface::write_surface_csv;
use dpda::trainer::{
    evaluate_test, probe_checkpoint, read_epochs, read_iterations, train_recording, write_epochs, write_iterations,
    PreparedData, Telemetry,
};
use dpda::{DpdaError, Result};

use crate::Common;

const PREVIEW_TAG: u64 = 0x9E1;

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(c.config.as_deref(), &c.sets)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(c: &Common, cfg: &RunConfig, command: &str) -> Result<PathBuf> {
    let dir = match (&c.out, &cfg.out_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => {
            let root = std::env::var_os("DPDA_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
            root.join(format!("{command}-seed{}", cfg.seed))
        }
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| DpdaError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| DpdaError::Input(format!("{}: {e}", path.display())))
}

pub fn train(c: &Common) -> Result<PathBuf> {
    let cfg = load_config(c)?;
    let dir = out_dir(c, &cfg, "train")?;
    write_json(&dir.join("run.json"), &cfg)?;

    let tc = cfg.train_config();
    let registry = dpda::align::AlignerRegistry::with_builtins();
    let data = PreparedData::new(&tc)?;
    let mut log = Telemetry::default();
    let result = train_recording(&tc, &data, &registry, &mut log);
    write_iterations(&dir.join("iterations.csv"), &log.iterations)?;
    write_epochs(&dir.join("epochs.csv"), &log.epochs)?;
    let outcome = result?;
    outcome.best.save(&dir.join("checkpoint.json"))?;

    let mut report = evaluate_test(&tc, &data, &outcome.best)?;
    report.conflict_fraction = Some(conflict_fraction(&log.iterations)?);
    write_json(&dir.join("eval.json"), &report)?;
    info!(
        "{}: best epoch {} val_loss {:.5} test EER {:.4}",
        outcome.method.name(),
        outcome.best_epoch,
        outcome.best_val_loss,
        report.eer
    );
    Ok(dir)
}

pub fn surface(c: &Common, checkpoint: &Path) -> Result<PathBuf> {
    let cfg = load_config(c)?;
    let ckpt = Checkpoint::load(checkpoint).map_err(|e| match e {
        DpdaError::Io(io) => DpdaError::Input(format!("{}: {io}", checkpoint.display())),
        DpdaError::Json(j) => DpdaError::Input(format!("{}: {j}", checkpoint.display())),
        other => other,
    })?;
    if ckpt.seed != cfg.seed {
        warn!("checkpoint was trained with seed {} but the probe uses seed {}", ckpt.seed, cfg.seed);
    }
    let tc = cfg.train_config();
    let data = PreparedData::new(&tc)?;
    let (grid, meta) = probe_checkpoint(&tc, &cfg.surface, &data, &ckpt)?;

    let dir = out_dir(c, &cfg, "surface")?;
    write_surface_csv(&dir.join("surface_orig.csv"), &grid.alphas, &grid.betas, &grid.loss_orig)?;
    write_surface_csv(&dir.join("surface_aug.csv"), &grid.alphas, &grid.betas, &grid.loss_aug)?;
    write_json(&dir.join("surface_meta.json"), &meta)?;
    Ok(dir)
}

/// Per-run summary inside `compare.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: String,
    pub conflict_fraction: f64,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub test_eer: f64,
}

/// `a / b` for each summary field. `None` where `b` is zero and `a` is not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRatio {
    pub a: String,
    pub b: String,
    pub conflict_fraction: Option<f64>,
    pub best_val_loss: Option<f64>,
    pub best_epoch: Option<f64>,
    pub test_eer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub runs: Vec<RunSummary>,
    pub ratios: Vec<PairRatio>,
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    if a == b {
        Some(1.0)
    } else if b == 0.0 {
        None
    } else {
        Some(a / b)
    }
}

fn summarize(dir: &Path) -> Result<RunSummary> {
    let need = |name: &str| -> Result<PathBuf> {
        let p = dir.join(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(DpdaError::Input(format!("incomplete run directory {}: missing {name}", dir.display())))
        }
    };
    let iterations = read_iterations(&need("iterations.csv")?)?;
    let epochs = read_epochs(&need("epochs.csv")?)?;
    let eval: EvalReport = read_json(&need("eval.json")?)?;
    let best = epochs
        .iter()
        .fold(None, |acc: Option<&dpda::trainer::EpochRecord>, e| match acc {
            Some(b) if b.val_loss <= e.val_loss => Some(b),
            _ => Some(e),
        })
        .ok_or_else(|| DpdaError::Input(format!("{}: epochs.csv is empty", dir.display())))?;
    Ok(RunSummary {
        run: dir.display().to_string(),
        conflict_fraction: conflict_fraction(&iterations)?,
        best_val_loss: best.val_loss,
        best_epoch: best.epoch,
        test_eer: eval.eer,
    })
}

pub fn compare(c: &Common, runs: &[PathBuf]) -> Result<PathBuf> {
    if runs.len() < 2 {
        return Err(DpdaError::Input("compare needs at least two run directories".into()));
    }
    let summaries = runs.iter().map(|d| summarize(d)).collect::<Result<Vec<_>>>()?;
    let mut ratios = Vec::new();
    for (i, a) in summaries.iter().enumerate() {
        for b in &summaries[i + 1..] {
            ratios.push(PairRatio {
                a: a.run.clone(),
                b: b.run.clone(),
                conflict_fraction: ratio(a.conflict_fraction, b.conflict_fraction),
                best_val_loss: ratio(a.best_val_loss, b.best_val_loss),
                best_epoch: ratio(a.best_epoch as f64, b.best_epoch as f64),
                test_eer: ratio(a.test_eer, b.test_eer),
            });
        }
    }
    let dir = match &c.out {
        Some(p) => p.clone(),
        None => {
            std::env::var_os("DPDA_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs")).join("compare")
        }
    };
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("compare.json"), &Comparison { runs: summaries, ratios })?;
    Ok(dir)
}

fn splits_for(cfg: &RunConfig, only: Option<Split>, limit: Option<usize>) -> Result<Vec<Utterance>> {
    let tc = cfg.train_config();
    let data_seed = dpda::trainer::data_seed(&tc);
    let mut all = Vec::new();
    for split in [Split::Train, Split::Val, Split::Test] {
        if only.is_some_and(|s| s != split) {
            continue;
        }
        let mut utts = generate_dataset(&cfg.dataset, cfg.dataset.per_class(split), data_seed, split)?;
        if let Some(n) = limit {
            utts.truncate(n);
        }
        all.extend(utts);
    }
    Ok(all)
}

pub fn dataset(c: &Common, dump: bool, split: Option<Split>, limit: Option<usize>) -> Result<PathBuf> {
    let cfg = load_config(c)?;
    let utts = splits_for(&cfg, split, limit)?;
    let dir = out_dir(c, &cfg, "dataset")?;
    let manifest: Vec<ManifestEntry> = utts.iter().map(ManifestEntry::from).collect();
    write_manifest(&dir.join("manifest.json"), &manifest)?;
    if dump {
        let wav_dir = dir.join("wav");
        fs::create_dir_all(&wav_dir)?;
        for u in &utts {
            write_wav(&wav_dir.join(format!("{}.wav", u.id)), &u.waveform)?;
        }
    }
    Ok(dir)
}

#[derive(Debug, Serialize)]
struct PreviewEntry {
    id: String,
    label: dpda::audio::Label,
    stages: Vec<StageReport>,
    power_clean: f64,
    power_augmented: f64,
}

pub fn augment_preview(c: &Common, count: usize) -> Result<PathBuf> {
    let cfg = load_config(c)?;
    let utts = splits_for(&cfg, Some(Split::Train), Some(count))?;
    let dir = out_dir(c, &cfg, "augment-preview")?;
    let seed = derive_seed(cfg.train_config().augment_seed(), &[PREVIEW_TAG]);
    let mut entries = Vec::new();
    for (i, u) in utts.iter().enumerate() {
        let (aug, stages) = augment_with_report(&u.waveform, &cfg.augment, &mut Rng::substream(seed, &[i as u64]));
        write_wav(&dir.join(format!("{}_clean.wav", u.id)), &u.waveform)?;
        write_wav(&dir.join(format!("{}_aug.wav", u.id)), &aug)?;
        entries.push(PreviewEntry {
            id: u.id.clone(),
            label: u.label,
            stages,
            power_clean: u.waveform.power(),
            power_augmented: aug.power(),
        });
    }
    write_json(&dir.join("preview.json"), &entries)?;
    Ok(dir)
}
