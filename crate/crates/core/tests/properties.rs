use dlam_core::data::{CitationEvent, HistoryBuilder};
use dlam_core::numerics::{finite_diff_grad, sigmoid_scalar, softmax, tanh_scalar};
use dlam_core::{DenseMatrix, DenseVector, Rng};
use proptest::collection::vec;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn softmax_is_a_distribution(xs in vec(-800.0f64..800.0, 1..12)) {
        let p = softmax(&DenseVector::from(xs)).unwrap();
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn gates_stay_in_range(x in -1e6f64..1e6) {
        let s = sigmoid_scalar(x);
        let t = tanh_scalar(x);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((-1.0..=1.0).contains(&t));
        prop_assert!((sigmoid_scalar(-x) - (1.0 - s)).abs() < 1e-15);
    }
}

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(-10.0f64..10.0, n)
}

proptest! {
    #[test]
    fn matvec_distributes_over_addition(
        (rows, cols, m, u, v) in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            (Just(r), Just(c), vector(r * c), vector(c), vector(c))
        })
    ) {
        let a = DenseMatrix::from_row_major(rows, cols, m).unwrap();
        let u = DenseVector::from(u);
        let v = DenseVector::from(v);
        let lhs = a.matvec(&u.add(&v).unwrap()).unwrap();
        let rhs = a.matvec(&u).unwrap().add(&a.matvec(&v).unwrap()).unwrap();
        for (l, r) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((l - r).abs() <= 1e-12 * (1.0 + l.abs()));
        }
    }

    #[test]
    fn finite_differences_recover_polynomial_gradients(c in vector(3), p in vec(-2.0f64..2.0, 2)) {
        // f(x, y) = c0 x^3 + c1 x y + c2 y^2
        let f = |v: &DenseVector| c[0] * v[0].powi(3) + c[1] * v[0] * v[1] + c[2] * v[1] * v[1];
        let at = DenseVector::from(p.clone());
        let g = finite_diff_grad(f, &at, 1e-5).unwrap();
        let exact = [3.0 * c[0] * p[0] * p[0] + c[1] * p[1], c[1] * p[0] + 2.0 * c[2] * p[1]];
        for (a, e) in g.iter().zip(exact) {
            prop_assert!((a - e).abs() < 1e-6, "{a} vs {e}");
        }
    }

    #[test]
    fn ingestion_ignores_event_order(seed in any::<u64>(), n in 0usize..200) {
        let mut rng = Rng::new(seed);
        let events: Vec<CitationEvent> = (0..n)
            .map(|_| CitationEvent::new(format!("p{}", rng.below(6)), 1995 + rng.below(20) as i32).unwrap())
            .collect();
        let build = |order: &[CitationEvent]| {
            let mut b = HistoryBuilder::new();
            for i in 0..5 {
                b.add_item(format!("p{i}"), 2000 + i as i32).unwrap();
            }
            for e in order {
                b.add_event(e);
            }
            b.finish(None)
        };
        let mut shuffled = events.clone();
        rng.shuffle(&mut shuffled);
        prop_assert_eq!(build(&events), build(&shuffled));
    }
}
