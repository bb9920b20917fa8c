use dlam_core::model::{DlamModel, ModelConfig, Transform, Variant};
use dlam_core::training::{loss_and_gradient, Example};
use dlam_core::{DenseVector, Parameters, Rng};

const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-8)
}

fn config(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        layers: 2,
        hidden: 4,
        input_dim: 3,
        steps: 5,
        horizon: 1,
        input_transform: Transform::Log1p,
        target_transform: Transform::Log1p,
    }
}

fn batch(rng: &mut Rng) -> Vec<Vec<DenseVector>> {
    (0..4)
        .map(|_| (0..5).map(|_| DenseVector::from((0..3).map(|_| rng.uniform(0.0, 20.0)).collect::<Vec<_>>())).collect())
        .collect()
}

/// Targets far from the predictions keep every residual away from the
/// kink of the absolute value.
fn targets(model: &DlamModel, xs: &[Vec<DenseVector>]) -> Vec<f64> {
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let p = model.config.target_transform.inverse(model.forward(x).unwrap().output);
            if i % 2 == 0 {
                3.0 * p.abs() + 5.0
            } else {
                0.3 * p.abs() + 0.05
            }
        })
        .collect()
}

fn check(variant: Variant, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let model = DlamModel::new(config(variant), &mut rng).unwrap();
    let xs = batch(&mut rng);
    let ts = targets(&model, &xs);
    let examples: Vec<Example<'_>> = xs
        .iter()
        .zip(&ts)
        .map(|(x, &t)| Example { features: x, target: t })
        .collect();
    let (_, grads) = loss_and_gradient(&model, &examples).unwrap();
    let analytic = grads.flatten();
    let theta = model.params.flatten();
    assert_eq!(analytic.len(), theta.len());

    let loss_at = |values: &[f64]| {
        let mut m = model.clone();
        m.params.assign_flat(values);
        loss_and_gradient(&m, &examples).unwrap().0
    };
    let mut worst: f64 = 0.0;
    let mut probe = theta.clone();
    for i in 0..theta.len() {
        probe[i] = theta[i] + STEP;
        let up = loss_at(&probe);
        probe[i] = theta[i] - STEP;
        let down = loss_at(&probe);
        probe[i] = theta[i];
        let numeric = (up - down) / (2.0 * STEP);
        let e = rel_error(analytic[i], numeric);
        assert!(e < TOLERANCE, "{variant} parameter {i}: analytic {} numeric {numeric}", analytic[i]);
        worst = worst.max(e);
    }
    worst
}

#[test]
fn dlam_end_to_end_gradient_matches_central_differences() {
    for seed in [1, 2, 3] {
        let worst = check(Variant::Dlam, seed);
        assert!(worst < TOLERANCE);
    }
}

#[test]
fn lt_ccp_end_to_end_gradient_matches_central_differences() {
    for seed in [4, 5] {
        check(Variant::LtCcp, seed);
    }
}
