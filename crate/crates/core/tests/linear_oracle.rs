use dlam_core::data::{build_samples, FilterConfig, SampleConfig, TrainingSample};
use dlam_core::linear::{fit_linear, predict_linear, DEFAULT_RIDGE};
use dlam_core::metrics::mape;
use dlam_core::synth::{generate_corpus, CorpusSpec};
use dlam_core::training::Example;
use dlam_core::{Rng, Transform};
use nalgebra::{DMatrix, DVector};

const HORIZON: u32 = 3;

fn corpus() -> (Vec<TrainingSample>, Vec<TrainingSample>) {
    let spec = CorpusSpec {
        items: 1500,
        seed: 99,
        ..CorpusSpec::default()
    };
    let sample = SampleConfig::default();
    let filter = FilterConfig::default();
    let mut all: Vec<TrainingSample> = generate_corpus(&spec)
        .unwrap()
        .iter()
        .filter(|i| filter.keeps(&i.history))
        .map(|i| build_samples(&i.history, &sample).unwrap())
        .collect();
    let test = all.split_off(all.len() * 4 / 5);
    (all, test)
}

fn flat(s: &TrainingSample) -> Vec<f64> {
    s.features.iter().flat_map(|x| x.iter().copied()).collect()
}

/// Normal equations assembled and solved with nalgebra.
fn oracle_weights(train: &[TrainingSample]) -> DVector<f64> {
    let d = flat(&train[0]).len() + 1;
    let mut x = DMatrix::zeros(train.len(), d);
    let mut y = DVector::zeros(train.len());
    for (r, s) in train.iter().enumerate() {
        for (c, v) in flat(s).into_iter().enumerate() {
            x[(r, c)] = v;
        }
        x[(r, d - 1)] = 1.0;
        y[r] = s.targets[&HORIZON].ln_1p();
    }
    let mut gram = x.transpose() * &x;
    for i in 0..d - 1 {
        gram[(i, i)] += DEFAULT_RIDGE;
    }
    let rhs = x.transpose() * y;
    gram.cholesky().expect("ridge keeps the system definite").solve(&rhs)
}

fn examples(s: &[TrainingSample]) -> Vec<Example<'_>> {
    s.iter().map(|s| s.example(HORIZON).unwrap()).collect()
}

#[test]
fn test_mape_matches_independent_normal_equations() {
    let (train, test) = corpus();
    assert!(train.len() > 200 && test.len() > 50);
    let model = fit_linear(&examples(&train), 5, 10, HORIZON, Transform::Log1p, DEFAULT_RIDGE).unwrap();
    let w = oracle_weights(&train);

    let obs: Vec<f64> = test.iter().map(|s| s.targets[&HORIZON]).collect();
    let ours: Vec<f64> = test.iter().map(|s| predict_linear(&model, &s.features).unwrap()).collect();
    let theirs: Vec<f64> = test
        .iter()
        .map(|s| {
            let z: f64 = flat(s).iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>() + w[w.len() - 1];
            z.exp_m1().max(0.0)
        })
        .collect();
    let a = mape(&ours, &obs).unwrap();
    let b = mape(&theirs, &obs).unwrap();
    assert!((a - b).abs() < 1e-10, "{a} vs {b}");
}

#[test]
fn fit_is_order_insensitive_and_repeatable() {
    let (train, test) = corpus();
    let ex = examples(&train);
    let a = fit_linear(&ex, 5, 10, HORIZON, Transform::Log1p, DEFAULT_RIDGE).unwrap();
    let again = fit_linear(&ex, 5, 10, HORIZON, Transform::Log1p, DEFAULT_RIDGE).unwrap();
    assert_eq!(a, again);

    let mut shuffled = ex.clone();
    Rng::new(5).shuffle(&mut shuffled);
    let b = fit_linear(&shuffled, 5, 10, HORIZON, Transform::Log1p, DEFAULT_RIDGE).unwrap();
    for s in &test {
        let (pa, pb) = (a.raw_output(&s.features).unwrap(), b.raw_output(&s.features).unwrap());
        assert!((pa - pb).abs() < 1e-8 * (1.0 + pa.abs()), "{pa} vs {pb}");
    }
}
