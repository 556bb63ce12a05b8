use ipwqr::frame::ModelFrame;
use ipwqr::ipw::fit_kernel_weights;
use ipwqr::qr::{solve, QrProblem};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn problem_data() -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>, Vec<f64>, f64)> {
    (6usize..=20).prop_flat_map(|n| {
        (
            proptest::collection::vec(-2.0f64..2.0, n),
            proptest::collection::vec(-5.0f64..5.0, n),
            proptest::collection::vec(0.2f64..3.0, n),
            0.1f64..0.9,
        )
            .prop_map(move |(xs, ys, w, tau)| {
                let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
                (x, DVector::from_vec(ys), w, tau)
            })
    })
}

/// Frame with one missing-capable linear column `a` and always-observed
/// columns `b` and `z`.
fn frame(cols: &[(f64, f64, f64, f64, bool)]) -> ModelFrame {
    let n = cols.len();
    let y = DVector::from_iterator(n, cols.iter().map(|c| c.0));
    let x = DMatrix::from_fn(n, 2, |i, j| match j {
        0 if !cols[i].4 => f64::NAN,
        0 => cols[i].1,
        _ => cols[i].2,
    });
    let z = DMatrix::from_fn(n, 1, |i, _| cols[i].3);
    ModelFrame::new(y, x, z, "y", vec!["a".into(), "b".into()], vec!["z".into()], vec![0], None)
        .unwrap()
}

fn rows() -> impl Strategy<Value = Vec<(f64, f64, f64, f64, bool)>> {
    proptest::collection::vec(
        (-3.0f64..3.0, -2.0f64..2.0, -2.0f64..2.0, 0.0f64..1.0, prop::bool::weighted(0.7)),
        8..30,
    )
    .prop_filter("needs both complete and incomplete rows", |v| {
        v.iter().any(|r| r.4) && v.iter().any(|r| !r.4)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_weight_rows_do_not_move_the_optimum(
        (x, y, w, tau) in problem_data(),
        extra in proptest::collection::vec((-9.0f64..9.0, -9.0f64..9.0), 1..6),
        l1 in 0.0f64..2.0,
    ) {
        let penalties = [0.0, l1];
        let base = QrProblem::new(&x, &y, tau, &w, &penalties).unwrap();
        let base_obj = solve(&base).unwrap().objective;

        let n = x.nrows();
        let k = extra.len();
        let x2 = DMatrix::from_fn(n + k, 2, |i, j| match (i < n, j) {
            (true, _) => x[(i, j)],
            (false, 0) => 1.0,
            (false, _) => extra[i - n].0,
        });
        let y2 = DVector::from_fn(n + k, |i, _| if i < n { y[i] } else { extra[i - n].1 });
        let mut w2 = w.clone();
        w2.extend(std::iter::repeat(0.0).take(k));
        let padded = QrProblem::new(&x2, &y2, tau, &w2, &penalties).unwrap();
        let padded_obj = solve(&padded).unwrap().objective;
        prop_assert!((base_obj - padded_obj).abs() <= 1e-8 * (1.0 + base_obj.abs()),
            "{base_obj} vs {padded_obj}");
    }

    #[test]
    fn kernel_weights_follow_row_permutations(data in rows(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled: Vec<_> = order.iter().map(|&i| data[i]).collect();

        let cols = [0, 1, 2];
        let a = fit_kernel_weights(&frame(&data), &cols, None, 25.0).unwrap();
        let b = fit_kernel_weights(&frame(&shuffled), &cols, None, 25.0).unwrap();
        for (k, &i) in order.iter().enumerate() {
            prop_assert!((a.pi[i] - b.pi[k]).abs() <= 1e-12);
            prop_assert!((a.weights[i] - b.weights[k]).abs() <= 1e-9);
        }
    }

    #[test]
    fn kernel_weights_are_capped_and_zero_off_complete_rows(data in rows(), cap in 1.5f64..30.0) {
        let f = frame(&data);
        let est = fit_kernel_weights(&f, &[0, 1, 2], None, cap).unwrap();
        for (i, &w) in est.weights.iter().enumerate() {
            if f.r()[i] {
                prop_assert!(w >= 1.0 - 1e-12 && w <= cap);
            } else {
                prop_assert_eq!(w, 0.0);
            }
        }
    }
}
