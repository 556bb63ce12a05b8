mod common;

use ipwqr::qr::{solve, verify_subgradient, QrProblem};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>, Vec<f64>, Vec<f64>, f64)> {
    (2usize..=8, 1usize..=2).prop_flat_map(|(n, m)| {
        (
            proptest::collection::vec(-3.0f64..3.0, n * m),
            proptest::collection::vec(-5.0f64..5.0, n),
            proptest::collection::vec(prop_oneof![Just(0.0), 0.1f64..3.0], n),
            proptest::collection::vec(prop_oneof![Just(0.0), 0.01f64..4.0], m),
            0.05f64..0.95,
        )
            .prop_map(move |(xs, ys, mut w, l1, tau)| {
                let mut x = DMatrix::from_row_slice(n, m, &xs);
                x.column_mut(0).fill(1.0);
                if w.iter().all(|v| *v == 0.0) {
                    w[0] = 1.0;
                }
                (x, DVector::from_vec(ys), w, l1, tau)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_exhaustive_vertex_search((x, y, w, l1, tau) in instance()) {
        let p = QrProblem::new(&x, &y, tau, &w, &l1).unwrap();
        let sol = solve(&p).unwrap();
        let oracle = common::brute_force(&x, &y, &w, &l1, tau);
        prop_assert!((sol.objective - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()),
            "solver {} oracle {}", sol.objective, oracle);
    }

    #[test]
    fn optimum_satisfies_subgradient_conditions((x, y, w, l1, tau) in instance()) {
        let p = QrProblem::new(&x, &y, tau, &w, &l1).unwrap();
        let sol = solve(&p).unwrap();
        let rep = verify_subgradient(&p, &sol.coef);
        prop_assert!(rep.passes(1e-6), "{:?}", rep);
    }
}
