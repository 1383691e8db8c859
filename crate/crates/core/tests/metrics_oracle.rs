use dpda::metrics::{eer, ScoreSet};
use dpda::Rng;
use proptest::prelude::*;

/// Brute-force EER: FAR/FRR at every midpoint between consecutive sorted
/// scores (plus one point below and one above all scores), then linear
/// interpolation across the sign change of FAR - FRR closest to zero.
fn oracle_eer(bona: &[f64], spoof: &[f64]) -> f64 {
    let mut all: Vec<f64> = bona.iter().chain(spoof).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let mut cands = vec![all[0] - 1.0];
    cands.extend(all.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    cands.push(all[all.len() - 1] + 1.0);
    let rates: Vec<(f64, f64)> = cands
        .iter()
        .map(|&t| {
            let far = spoof.iter().filter(|&&s| s >= t).count() as f64 / spoof.len() as f64;
            let frr = bona.iter().filter(|&&s| s < t).count() as f64 / bona.len() as f64;
            (far, frr)
        })
        .collect();
    let best = (0..rates.len())
        .min_by(|&a, &b| (rates[a].0 - rates[a].1).abs().total_cmp(&(rates[b].0 - rates[b].1).abs()))
        .unwrap();
    let d = |i: usize| rates[i].0 - rates[i].1;
    if d(best) == 0.0 {
        return rates[best].0;
    }
    // neighbour on the other side of zero
    let other = if d(best) > 0.0 { best + 1 } else { best - 1 };
    let (i, j) = if other > best { (best, other) } else { (other, best) };
    let w = d(i) / (d(i) - d(j));
    rates[i].0 + w * (rates[j].0 - rates[i].0)
}

fn random_scores(rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let nb = 1 + rng.index(40);
    let ns = 1 + rng.index(40);
    let shift = rng.uniform_range(-1.0, 3.0);
    // coarse rounding forces ties within and across classes
    let q = if rng.uniform() < 0.5 { 10.0 } else { 1e6 };
    let b = (0..nb).map(|_| ((rng.normal() + shift) * q).round() / q).collect();
    let s = (0..ns).map(|_| (rng.normal() * q).round() / q).collect();
    (b, s)
}

#[test]
fn agrees_with_midpoint_sweep() {
    let mut rng = Rng::new(2024);
    for case in 0..100 {
        let (b, s) = random_scores(&mut rng);
        let got = eer(&ScoreSet::new(b.clone(), s.clone())).unwrap();
        let want = oracle_eer(&b, &s);
        assert!((got - want).abs() <= 1e-9, "case {case}: {got} vs {want}");
    }
}

#[test]
fn fixed_examples() {
    let e = |b: &[f64], s: &[f64]| eer(&ScoreSet::new(b.to_vec(), s.to_vec())).unwrap();
    assert_eq!(e(&[0.9, 0.8], &[0.1, 0.2]), 0.0);
    assert_eq!(e(&[0.9, 0.4], &[0.6, 0.1]), 0.5);
    assert_eq!(e(&[0.9, 0.4], &[0.6, 0.1]), oracle_eer(&[0.9, 0.4], &[0.6, 0.1]));
    assert_eq!(e(&[0.2], &[0.8]), 1.0);
}

proptest! {
    #[test]
    fn invariant_under_monotone_transforms(seed in any::<u64>()) {
        let (b, s) = random_scores(&mut Rng::new(seed));
        let base = eer(&ScoreSet::new(b.clone(), s.clone())).unwrap();
        let f = |x: f64| (0.7 * x).exp() + 3.0 * x;
        let t = eer(&ScoreSet::new(b.iter().map(|&x| f(x)).collect(), s.iter().map(|&x| f(x)).collect())).unwrap();
        prop_assert!((t - base).abs() < 1e-12);
    }

    #[test]
    fn invariant_under_class_swap_with_negation(seed in any::<u64>()) {
        let (b, s) = random_scores(&mut Rng::new(seed));
        let base = eer(&ScoreSet::new(b.clone(), s.clone())).unwrap();
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        let swapped = eer(&ScoreSet::new(neg(&s), neg(&b))).unwrap();
        prop_assert!((swapped - base).abs() < 1e-12, "{} vs {}", swapped, base);
    }
}
