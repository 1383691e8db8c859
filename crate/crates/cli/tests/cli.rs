use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dpda::audio::{read_manifest, read_wav};
use dpda::metrics::conflict_fraction;
use dpda::surface::{read_surface_csv, SurfaceMeta};
use dpda::trainer::{read_epochs, read_iterations};
use serde_json::Value;

const SMALL: &str = r#"{
  "dataset": {"n_train_per_class": 10, "n_val_per_class": 5, "n_test_per_class": 5, "duration_s": 0.25},
  "train": {"epochs_max": 3},
  "surface": {"steps": 7, "n_per_class": 5}
}"#;

struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("small.json"), SMALL).unwrap();
        Sandbox { dir }
    }

    fn path(&self, p: &str) -> PathBuf {
        self.dir.path().join(p)
    }

    fn dpda(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_dpda"))
            .args(args)
            .env("DPDA_OUT", self.path("out"))
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> PathBuf {
        let out = self.dpda(args);
        assert!(out.status.success(), "dpda {args:?}: {}", String::from_utf8_lossy(&out.stderr));
        PathBuf::from(String::from_utf8(out.stdout).unwrap().trim())
    }

    fn train(&self, name: &str, extra: &[&str]) -> PathBuf {
        let out = self.path(name);
        let mut args = vec!["train", "--config", "small.json", "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        self.ok(&args);
        out
    }
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn overrides_reach_nested_keys() {
    let sb = Sandbox::new();
    let run = sb.train("r", &["--set", "method=pcgrad", "--set", "train.epochs_max=2", "--seed", "5"]);
    let cfg = json(&run.join("run.json"));
    assert_eq!(cfg["method"], "pcgrad");
    assert_eq!(cfg["train"]["epochs_max"], 2);
    assert_eq!(cfg["seed"], 5);
    assert_eq!(cfg["dataset"]["n_train_per_class"], 10);
    assert_eq!(read_epochs(&run.join("epochs.csv")).unwrap().len(), 2);
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let sb = Sandbox::new();
    assert_eq!(sb.dpda(&["train", "--config", "missing.json"]).status.code(), Some(2));
    assert_eq!(sb.dpda(&["train", "--set", "train.nope=1"]).status.code(), Some(2));
    assert_eq!(sb.dpda(&["train", "--set", "method=mgda"]).status.code(), Some(2));
    let empty = sb.path("empty");
    std::fs::create_dir_all(&empty).unwrap();
    assert_eq!(sb.dpda(&["compare", empty.to_str().unwrap(), empty.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn numeric_blowup_exits_three_and_keeps_telemetry() {
    let sb = Sandbox::new();
    let out = sb.path("boom");
    let res = sb.dpda(&[
        "train",
        "--config",
        "small.json",
        "--set",
        "train.optimizer=sgd",
        "--set",
        "train.lr=1e200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(out.join("iterations.csv").is_file());
    assert!(!read_iterations(&out.join("iterations.csv")).unwrap().is_empty());
}

#[test]
fn train_outputs_are_reproducible_and_readable() {
    let sb = Sandbox::new();
    let a = sb.train("a", &["--set", "method=cagrad"]);
    let b = sb.train("b", &["--set", "method=cagrad"]);
    for f in ["run.json", "iterations.csv", "epochs.csv", "checkpoint.json", "eval.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let iters = read_iterations(&a.join("iterations.csv")).unwrap();
    let eval = json(&a.join("eval.json"));
    assert_eq!(eval["conflict_fraction"].as_f64().unwrap(), conflict_fraction(&iters).unwrap());
    dpda::model::Checkpoint::load(&a.join("checkpoint.json")).unwrap();
}

#[test]
fn default_output_root_comes_from_the_environment() {
    let sb = Sandbox::new();
    let dir = sb.ok(&["train", "--config", "small.json", "--seed", "3"]);
    assert_eq!(dir, sb.path("out").join("train-seed3"));
    assert!(dir.join("epochs.csv").is_file());
}

#[test]
fn surface_under_identity_augmentation() {
    let sb = Sandbox::new();
    let run = sb.train("r", &["--set", "augment.chain=[]"]);
    let ckpt = run.join("checkpoint.json");
    let probe = |name: &str| {
        let out = sb.path(name);
        sb.ok(&[
            "surface",
            "--config",
            "small.json",
            "--set",
            "augment.chain=[]",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        out
    };
    let (s1, s2) = (probe("s1"), probe("s2"));
    let orig = std::fs::read(s1.join("surface_orig.csv")).unwrap();
    assert_eq!(orig, std::fs::read(s1.join("surface_aug.csv")).unwrap());
    for f in ["surface_orig.csv", "surface_aug.csv", "surface_meta.json"] {
        assert_eq!(std::fs::read(s1.join(f)).unwrap(), std::fs::read(s2.join(f)).unwrap(), "{f}");
    }
    let (alphas, betas, losses) = read_surface_csv(&s1.join("surface_orig.csv")).unwrap();
    assert_eq!((alphas.len(), betas.len(), losses.len()), (7, 7, 7));
    let meta: SurfaceMeta = serde_json::from_value(json(&s1.join("surface_meta.json"))).unwrap();
    assert_eq!(meta.minima_orig.len(), 3);
    assert_eq!(meta.minima_aug.len(), 3);
    assert_eq!(meta.steps, 7);
}

#[test]
fn surface_rejects_mismatched_checkpoint() {
    let sb = Sandbox::new();
    let run = sb.train("r", &["--set", "train.epochs_max=1"]);
    let ckpt = run.join("checkpoint.json");
    let res = sb.dpda(&[
        "surface",
        "--config",
        "small.json",
        "--set",
        "model.hidden=[8]",
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let res = sb.dpda(&["surface", "--config", "small.json", "--checkpoint", "nope.json"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn compare_summaries_and_ratios() {
    let sb = Sandbox::new();
    let a = sb.train("a", &[]);
    let b = sb.train("b", &["--set", "method=pcgrad"]);
    let out = sb.path("cmp");
    sb.ok(&["compare", a.to_str().unwrap(), a.to_str().unwrap(), b.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let cmp = json(&out.join("compare.json"));
    let self_pair = &cmp["ratios"][0];
    for k in ["conflict_fraction", "best_val_loss", "best_epoch", "test_eer"] {
        assert_eq!(self_pair[k].as_f64(), Some(1.0), "{k}");
    }
    for (run, summary) in [(&a, &cmp["runs"][0]), (&b, &cmp["runs"][2])] {
        let iters = read_iterations(&run.join("iterations.csv")).unwrap();
        assert_eq!(summary["conflict_fraction"].as_f64().unwrap(), conflict_fraction(&iters).unwrap());
        let epochs = read_epochs(&run.join("epochs.csv")).unwrap();
        let best = epochs.iter().min_by(|x, y| x.val_loss.total_cmp(&y.val_loss)).unwrap();
        assert_eq!(summary["best_epoch"].as_u64().unwrap() as usize, best.epoch);
        assert_eq!(summary["best_val_loss"].as_f64().unwrap(), best.val_loss);
    }
    assert_eq!(cmp["ratios"].as_array().unwrap().len(), 3);
}

#[test]
fn dataset_generate_and_dump() {
    let sb = Sandbox::new();
    let g = sb.path("g");
    sb.ok(&["dataset", "generate", "--config", "small.json", "--out", g.to_str().unwrap()]);
    assert_eq!(read_manifest(&g.join("manifest.json")).unwrap().len(), 40);
    let d = sb.path("d");
    sb.ok(&[
        "dataset",
        "dump",
        "--config",
        "small.json",
        "--split",
        "val",
        "--limit",
        "3",
        "--out",
        d.to_str().unwrap(),
    ]);
    let m = read_manifest(&d.join("manifest.json")).unwrap();
    assert_eq!(m.len(), 3);
    let w = read_wav(&d.join("wav").join(format!("{}.wav", m[0].id))).unwrap();
    assert_eq!(w.len(), 4000);
}

#[test]
fn augment_preview_writes_pairs() {
    let sb = Sandbox::new();
    let p = sb.path("p");
    sb.ok(&["augment-preview", "--config", "small.json", "--count", "2", "--out", p.to_str().unwrap()]);
    let report = json(&p.join("preview.json"));
    assert_eq!(report.as_array().unwrap().len(), 2);
    assert_eq!(report[0]["stages"].as_array().unwrap().len(), 3);
    let id = report[0]["id"].as_str().unwrap();
    assert!(p.join(format!("{id}_clean.wav")).is_file());
    assert!(p.join(format!("{id}_aug.wav")).is_file());
}
