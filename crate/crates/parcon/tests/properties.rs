//! Property tests for the algebraic invariants of the rank machinery and
//! the double-double layer.

use nalgebra::DMatrix;
use parcon::dd::Dd;
use parcon::kalman;
use proptest::prelude::*;

fn small_matrix(n: usize, m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-2i64..=2, n * m)
        .prop_map(move |v| DMatrix::from_iterator(n, m, v.into_iter().map(|x| x as f64)))
}

fn system() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>, usize)> {
    (1usize..=4).prop_flat_map(|n| {
        (1usize..=n).prop_flat_map(move |m| {
            (small_matrix(n, n), small_matrix(n, m), 1usize..=n).prop_map(|(a, b, p)| (a, b, p))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_bounded_by_p_and_full_rank((a, b, p) in system()) {
        let k = kalman::build_kalman_constant(&a, &b).unwrap();
        let (full, _) = kalman::numeric_rank(&k.value, 1e-10).unwrap();
        let verdict = kalman::check_partial_constant(&a, &b, p, 1e-10).unwrap();
        prop_assert!(verdict.rank <= p.min(full));
    }

    #[test]
    fn rank_invariant_under_column_scaling_and_permutation(
        (a, b, p) in system(),
        scale in prop::sample::select(vec![0.5f64, -1.0, 3.0, 0.125]),
        rot in 0usize..8,
    ) {
        let k = kalman::build_kalman_constant(&a, &b).unwrap();
        let cols = k.value.ncols();
        let mut shuffled = DMatrix::zeros(k.value.nrows(), cols);
        for j in 0..cols {
            let src = (j + rot) % cols;
            let factor = if j % 2 == 0 { scale } else { 1.0 };
            shuffled.set_column(j, &(factor * k.value.column(src)));
        }
        let projected = k.value.rows(0, p).into_owned();
        let projected_shuffled = shuffled.rows(0, p).into_owned();
        let (r1, _) = kalman::numeric_rank(&projected, 1e-10).unwrap();
        let (r2, _) = kalman::numeric_rank(&projected_shuffled, 1e-10).unwrap();
        prop_assert_eq!(r1, r2);
    }

    #[test]
    fn chains_span_the_controllable_subspace((a, b, _p) in system()) {
        let basis = kalman::extract_basis(&a, &b, 1e-10).unwrap();
        let k = kalman::build_kalman_constant(&a, &b).unwrap();
        let (s, _) = kalman::numeric_rank(&k.value, 1e-10).unwrap();
        prop_assert_eq!(basis.total_len(), s);
        prop_assert_eq!(basis.s_j.iter().sum::<usize>(), s);
        // chains are reported per selected control column, in scan order
        prop_assert!(basis.l_j.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn dd_exp_respects_the_functional_equation(x in -80.0f64..80.0, y in -40.0f64..40.0) {
        // the sum must be formed in double-double: exp(fl(x+y)) differs
        // from exp(x)exp(y) by the argument rounding alone
        let lhs = (Dd::from_f64(x) + Dd::from_f64(y)).exp();
        let rhs = Dd::from_f64(x).exp() * Dd::from_f64(y).exp();
        let rel = ((lhs - rhs) / rhs).abs().to_f64();
        prop_assert!(rel < 1e-26, "rel {}", rel);
    }

    #[test]
    fn dd_mul_div_roundtrip(a in -1e6f64..1e6, b in -1e6f64..1e6) {
        prop_assume!(b.abs() > 1e-6);
        let x = Dd::from_f64(a);
        let y = Dd::from_f64(b);
        let round = (x * y) / y;
        let err = (round - x).abs().to_f64();
        prop_assert!(err <= 1e-25 * a.abs().max(1.0));
    }
}
