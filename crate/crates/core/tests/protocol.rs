use dlam_core::data::{build_samples, filter_training_set, FilterConfig, PopularityHistory, SampleConfig};
use dlam_core::synth::{generate_corpus, CorpusSpec};
use dlam_core::Rng;

fn history(yearly: &[u64]) -> PopularityHistory {
    PopularityHistory::new("x", 2000, yearly.to_vec())
}

#[test]
fn exactly_five_citations_is_excluded_and_six_kept() {
    let f = FilterConfig::default();
    assert!(!f.keeps(&history(&[1, 1, 1, 1, 1, 9, 9, 9, 9, 9])));
    assert!(!f.keeps(&history(&[5, 0, 0, 0, 0, 0, 0, 0, 0, 0])));
    assert!(f.keeps(&history(&[6, 0, 0, 0, 0, 0, 0, 0, 0, 0])));
    assert!(f.keeps(&history(&[0, 0, 0, 0, 6, 0, 0, 0, 0, 0])));
    // Citations after the training period do not count toward the threshold.
    assert!(!f.keeps(&history(&[0, 0, 0, 0, 5, 100, 0, 0, 0, 0])));
    // Not enough follow-up years for five horizons.
    assert!(!f.keeps(&history(&[6, 0, 0, 0, 0, 0, 0, 0, 0])));
}

#[test]
fn filter_matches_a_brute_force_scan() {
    let spec = CorpusSpec {
        items: 1000,
        seed: 1000,
        ..CorpusSpec::default()
    };
    let hs: Vec<PopularityHistory> = generate_corpus(&spec).unwrap().into_iter().map(|i| i.history).collect();
    let kept = filter_training_set(&hs, &FilterConfig::default());
    let mut expected = Vec::new();
    for h in &hs {
        let y = h.yearly();
        let mut first5 = 0;
        let mut k = 0;
        while k < 5 && k < y.len() {
            first5 += y[k];
            k += 1;
        }
        if y.len() >= 10 && first5 >= 6 {
            expected.push(h.item.clone());
        }
    }
    let got: Vec<String> = kept.iter().map(|h| h.item.clone()).collect();
    assert_eq!(got, expected);
    assert!(!expected.is_empty() && expected.len() < hs.len());
}

#[test]
fn features_never_see_the_future() {
    let cfg = SampleConfig::default();
    let mut rng = Rng::new(17);
    for _ in 0..200 {
        let yearly: Vec<u64> = (0..10).map(|_| rng.below(40) as u64).collect();
        let base = build_samples(&history(&yearly), &cfg).unwrap();
        let mut later = yearly.clone();
        for v in &mut later[5..] {
            *v += 1 + rng.below(50) as u64;
        }
        let moved = build_samples(&history(&later), &cfg).unwrap();
        assert_eq!(base.features, moved.features);
        for h in 1..=5u32 {
            assert!(moved.targets[&h] > base.targets[&h]);
        }
        // Changing a training year must show up in the features.
        let mut early = yearly.clone();
        early[rng.below(5)] += 1;
        assert_ne!(build_samples(&history(&early), &cfg).unwrap().features, base.features);
    }
}

#[test]
fn hand_built_window() {
    let s = build_samples(&history(&[6, 0, 0, 0, 0, 0, 0, 0, 0, 0]), &SampleConfig::default()).unwrap();
    let mut x1 = vec![0.0; 10];
    x1[9] = 6.0;
    assert_eq!(s.features[0].as_slice(), &x1[..]);
    let mut x5 = vec![0.0; 10];
    x5[5] = 6.0;
    assert_eq!(s.features[4].as_slice(), &x5[..]);
    assert!(s.targets.values().all(|&t| t == 6.0));
}
