use dpda::audio::{
    augment, augment_with_report, generate_dataset, AugmentConfig, DatasetConfig, FeatureConfig, FeatureExtractor,
    Label, Split, StageConfig, Waveform,
};
use dpda::Rng;

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Energy of one DFT bin at `hz`, computed directly.
fn bin_energy(x: &[f64], hz: f64, sr: u32) -> f64 {
    let w = std::f64::consts::TAU * hz / sr as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (n, v) in x.iter().enumerate() {
        re += v * (w * n as f64).cos();
        im -= v * (w * n as f64).sin();
    }
    re * re + im * im
}

fn tone(amp: f64, n: usize) -> Waveform {
    let x = (0..n).map(|i| amp * (0.05 * i as f64).sin() + 0.3 * amp * (0.31 * i as f64).cos()).collect();
    Waveform::new(x, 16_000).unwrap()
}

fn single(stage: StageConfig) -> AugmentConfig {
    AugmentConfig { chain: vec![stage], rng_seed: None }
}

#[test]
fn spoof_carries_more_artifact_energy() {
    let cfg = DatasetConfig::default();
    let utts = generate_dataset(&cfg, 50, 9, Split::Train).unwrap();
    let mean = |label: Label| {
        let e: Vec<f64> = utts
            .iter()
            .filter(|u| u.label == label)
            .map(|u| bin_energy(&u.waveform.samples, cfg.artifact_hz, cfg.sample_rate))
            .collect();
        e.iter().sum::<f64>() / e.len() as f64
    };
    let ratio = mean(Label::Spoof) / mean(Label::Bonafide);
    assert!(ratio > 2.0, "artifact energy ratio {ratio}");
}

#[test]
fn one_feature_threshold_separates_classes() {
    let cfg = DatasetConfig::default();
    let utts = generate_dataset(&cfg, 100, 4, Split::Train).unwrap();
    let ex = FeatureExtractor::new(FeatureConfig::default()).unwrap();
    let band = ex.band_for_hz(cfg.artifact_hz, cfg.sample_rate);
    let vals: Vec<(f64, bool)> =
        utts.iter().map(|u| (ex.extract(&u.waveform).unwrap()[band], u.label == Label::Spoof)).collect();
    let mut best = 0.0f64;
    for &(t, _) in &vals {
        let above = vals.iter().filter(|(v, s)| (*v >= t) == *s).count() as f64 / vals.len() as f64;
        best = best.max(above).max(1.0 - above);
    }
    assert!(best > 0.9, "best single-band accuracy {best}");
}

#[test]
fn additive_stages_hit_their_target_snr() {
    let x = tone(0.3, 16_000);
    for stage in [StageConfig::default_stationary(), StageConfig::default_external()] {
        let cfg = single(stage.clone());
        for draw in 0..100u64 {
            let (y, reports) = augment_with_report(&x, &cfg, &mut Rng::new(draw));
            let target = reports[0].target_snr_db.unwrap();
            let noise: Vec<f64> = y.samples.iter().zip(&x.samples).map(|(a, b)| a - b).collect();
            let snr = 10.0 * (power(&x.samples) / power(&noise)).log10();
            assert!((snr - target).abs() <= 0.5, "{} draw {draw}: {snr} vs {target}", stage.name());
        }
    }
}

#[test]
fn all_pass_notch_keeps_power() {
    let stage = StageConfig::ConvolutiveNotch {
        n_filters: 5,
        freq_hz: [20.0, 8000.0],
        q: [0.5, 4.0],
        gain_db: [0.0, 0.0],
        nonlinear_order: 3,
        nonlinear_gain: [0.0, 0.0],
    };
    let x = tone(0.5, 8000);
    for seed in 0..20 {
        let y = augment(&x, &single(stage.clone()), &mut Rng::new(seed));
        let r = power(&y.samples) / power(&x.samples);
        assert!((r - 1.0).abs() < 0.01, "seed {seed}: power ratio {r}");
    }
}

#[test]
fn augmentation_is_reproducible_and_length_preserving() {
    let x = tone(0.4, 12_000);
    let mut cfg = AugmentConfig::default();
    cfg.chain.push(StageConfig::default_external());
    cfg.chain.push(StageConfig::default_impulse_response());
    let a = augment(&x, &cfg, &mut Rng::new(77));
    let b = augment(&x, &cfg, &mut Rng::new(77));
    assert_eq!(a, b);
    assert_eq!(a.len(), x.len());
    assert!(a.peak() <= 1.0);
    assert_ne!(a, augment(&x, &cfg, &mut Rng::new(78)));
}

#[test]
fn impulsive_noise_on_silence_is_silence() {
    let x = Waveform::new(vec![0.0; 4000], 16_000).unwrap();
    let y = augment(&x, &single(StageConfig::default_impulsive()), &mut Rng::new(1));
    assert!(y.samples.iter().all(|&v| v == 0.0));
}

#[test]
fn empty_chain_is_identity() {
    let x = tone(0.4, 5000);
    assert_eq!(augment(&x, &AugmentConfig::identity(), &mut Rng::new(5)), x);
}
