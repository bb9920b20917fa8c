use dlam::format::{
    checkpoint_to_string, model_to_string, parse_checkpoint, parse_model, Checkpoint, SavedModel,
};
use dlam_core::linear::LinearModel;
use dlam_core::training::AdadeltaState;
use dlam_core::{DenseVector, DlamModel, ModelConfig, Parameters, Rng, Transform, Variant};
use proptest::prelude::*;

fn neural(variant: Variant, layers: usize, hidden: usize, seed: u64) -> DlamModel {
    let cfg = ModelConfig {
        variant,
        layers,
        hidden,
        input_dim: 3,
        steps: 4,
        horizon: 2,
        input_transform: Transform::Log1p,
        target_transform: Transform::Log1p,
    };
    let mut m = DlamModel::new(cfg, &mut Rng::new(seed)).unwrap();
    // Spread values over many magnitudes so the text form is exercised.
    let mut rng = Rng::new(seed ^ 0xabc);
    for s in m.params.slices_mut() {
        for v in s.iter_mut() {
            *v *= 10f64.powi(rng.below(30) as i32 - 15);
        }
    }
    m
}

fn linear(seed: u64) -> LinearModel {
    let mut rng = Rng::new(seed);
    LinearModel::new(DenseVector::uniform(13, 2.0, &mut rng), 4, 3, 5, Transform::Log1p).unwrap()
}

fn bits(m: &SavedModel) -> Vec<u64> {
    match m {
        SavedModel::Neural(m) => m.params.flatten().iter().map(|v| v.to_bits()).collect(),
        SavedModel::Linear(m) => m.weights.iter().map(|v| v.to_bits()).collect(),
    }
}

#[test]
fn every_variant_round_trips_bitwise() {
    let models = [
        SavedModel::Neural(neural(Variant::Dlam, 2, 4, 1)),
        SavedModel::Neural(neural(Variant::LtCcp, 2, 4, 2)),
        SavedModel::Neural(neural(Variant::Dlam, 1, 1, 3)),
        SavedModel::Linear(linear(4)),
    ];
    for m in &models {
        let text = model_to_string(m);
        let back = parse_model(&text).unwrap();
        assert_eq!(&back, m);
        assert_eq!(bits(&back), bits(m));
        assert_eq!(model_to_string(&back), text);
    }
}

#[test]
fn checkpoint_round_trips_bitwise() {
    let model = neural(Variant::Dlam, 2, 3, 5);
    let mut optimizer = AdadeltaState::new(&model.params, 0.95, 1e-6);
    let mut rng = Rng::new(6);
    for buf in optimizer.sq_grad.iter_mut().chain(optimizer.sq_update.iter_mut()) {
        for v in buf.iter_mut() {
            *v = rng.next_f64() * 1e-3;
        }
    }
    let ckpt = Checkpoint { model, optimizer };
    let text = checkpoint_to_string(&ckpt);
    assert_eq!(parse_checkpoint(&text).unwrap(), ckpt);
    assert!(parse_model(&text).is_err());
}

#[test]
fn corrupt_numeral_is_located() {
    let text = model_to_string(&SavedModel::Neural(neural(Variant::Dlam, 2, 4, 7)));
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    // Line 11 is the first row of the first tensor; break its second value.
    let mut values: Vec<String> = lines[10].split(' ').map(str::to_string).collect();
    let col = values[0].len() + 2;
    values[1].replace_range(1..2, "x");
    lines[10] = values.join(" ");
    let e = parse_model(&lines.join("\n")).unwrap_err();
    assert_eq!((e.line, e.column), (11, col), "{e}");
    assert!(e.message.contains("number"), "{e}");
}

#[test]
fn version_mismatch_is_rejected() {
    let text = model_to_string(&SavedModel::Linear(linear(8)));
    let e = parse_model(&text.replacen("dlam-model 1", "dlam-model 2", 1)).unwrap_err();
    assert_eq!((e.line, e.column), (1, 12));
    assert!(e.message.contains("version"));
    let e = parse_model(&text.replacen("dlam-model", "other-model", 1)).unwrap_err();
    assert_eq!(e.line, 1);
}

#[test]
fn truncation_is_rejected_with_location() {
    let text = model_to_string(&SavedModel::Neural(neural(Variant::LtCcp, 2, 2, 9)));
    let lines: Vec<&str> = text.lines().collect();
    for keep in [0, 1, 5, 12, lines.len() - 1] {
        let cut = lines[..keep].join("\n");
        let e = parse_model(&cut).unwrap_err();
        assert_eq!(e.line, keep + 1, "{e}");
        assert!(e.message.contains("end of file"), "{e}");
    }
}

#[test]
fn shape_and_structure_errors_are_located() {
    let text = model_to_string(&SavedModel::Neural(neural(Variant::Dlam, 1, 2, 10)));
    let e = parse_model(&text.replacen("tensor layer0.w_i 2 5", "tensor layer0.w_i 2 6", 1)).unwrap_err();
    assert_eq!((e.line, e.column), (10, 21));
    let e = parse_model(&text.replacen("mode DLAM", "mode GRU", 1)).unwrap_err();
    assert_eq!((e.line, e.column), (2, 6));
    let e = parse_model(&format!("{text}extra\n")).unwrap_err();
    assert!(e.message.contains("trailing"));
    let e = parse_model(&text.replacen("hidden 2", "hidden two", 1)).unwrap_err();
    assert_eq!((e.line, e.column), (4, 8));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_models_round_trip(seed in any::<u64>(), hidden in 1usize..5, layers in 1usize..3, dlam in any::<bool>()) {
        let variant = if dlam { Variant::Dlam } else { Variant::LtCcp };
        let m = SavedModel::Neural(neural(variant, layers, hidden, seed));
        let back = parse_model(&model_to_string(&m)).unwrap();
        prop_assert_eq!(bits(&back), bits(&m));
    }
}
