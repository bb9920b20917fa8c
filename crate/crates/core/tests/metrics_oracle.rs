use dlam_core::metrics::{acc, mape};
use dlam_core::Rng;
use proptest::prelude::*;

/// Straight-line recomputation, written independently of the library.
fn oracle(preds: &[f64], obs: &[f64], eps: f64) -> (f64, f64) {
    let n = obs.len() as f64;
    let mut total = 0.0;
    let mut hits = 0usize;
    let mut i = 0;
    while i < obs.len() {
        let e = ((preds[i] - obs[i]) / obs[i]).abs();
        total += e;
        if e <= eps {
            hits += 1;
        }
        i += 1;
    }
    (total / n, hits as f64 / n)
}

fn random_pairs(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = Rng::new(seed);
    let obs: Vec<f64> = (0..n).map(|_| (1 + rng.below(5000)) as f64).collect();
    let preds = obs.iter().map(|o| o * rng.uniform(0.0, 2.5)).collect();
    (preds, obs)
}

#[test]
fn matches_oracle_bitwise_on_random_pairs() {
    let (preds, obs) = random_pairs(2024, 1000);
    let (m, a) = oracle(&preds, &obs, 0.3);
    assert_eq!(mape(&preds, &obs).unwrap().to_bits(), m.to_bits());
    assert_eq!(acc(&preds, &obs, 0.3).unwrap().to_bits(), a.to_bits());
}

#[test]
fn boundary_error_counts_as_correct() {
    // 0.25 and 0.5 are exact in binary, so the relative error is exactly 0.25.
    assert_eq!(acc(&[5.0], &[4.0], 0.25).unwrap(), 1.0);
    assert_eq!(acc(&[3.0], &[4.0], 0.25).unwrap(), 1.0);
    assert_eq!(acc(&[6.0], &[4.0], 0.5).unwrap(), 1.0);
    assert_eq!(acc(&[6.0 + 1e-12], &[4.0], 0.5).unwrap(), 0.0);
}

#[test]
fn acc_is_monotone_in_epsilon() {
    let (preds, obs) = random_pairs(7, 1000);
    let mut last = 0.0;
    for k in 1..=60 {
        let a = acc(&preds, &obs, k as f64 * 0.025).unwrap();
        assert!(a >= last);
        last = a;
    }
    assert_eq!(last, 1.0);
}

proptest! {
    #[test]
    fn metrics_are_permutation_invariant(seed in any::<u64>(), n in 1usize..60, rot in 0usize..60) {
        let (preds, obs) = random_pairs(seed, n);
        let k = rot % n;
        let mut p2 = preds.clone();
        let mut o2 = obs.clone();
        p2.rotate_left(k);
        o2.rotate_left(k);
        prop_assert!((mape(&preds, &obs).unwrap() - mape(&p2, &o2).unwrap()).abs() < 1e-12);
        prop_assert_eq!(acc(&preds, &obs, 0.3).unwrap(), acc(&p2, &o2, 0.3).unwrap());
    }

    #[test]
    fn metrics_are_scale_invariant(seed in any::<u64>(), n in 1usize..60, power in -8i32..8) {
        let (preds, obs) = random_pairs(seed, n);
        // Powers of two scale exactly, so ACC must not move at all.
        let s = 2f64.powi(power);
        let ps: Vec<f64> = preds.iter().map(|p| p * s).collect();
        let os: Vec<f64> = obs.iter().map(|o| o * s).collect();
        prop_assert_eq!(mape(&preds, &obs).unwrap(), mape(&ps, &os).unwrap());
        prop_assert_eq!(acc(&preds, &obs, 0.3).unwrap(), acc(&ps, &os, 0.3).unwrap());
    }

    #[test]
    fn metrics_stay_in_range(seed in any::<u64>(), n in 1usize..60) {
        let (preds, obs) = random_pairs(seed, n);
        let a = acc(&preds, &obs, 0.3).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(mape(&preds, &obs).unwrap() >= 0.0);
    }
}
