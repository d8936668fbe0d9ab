//! Ridge solver against an explicit dense inverse computed by Gauss-Jordan
//! elimination, written independently of the Cholesky path.

mod oracles;

use oracles::dense::{diff, frob, oracle, ridge_residual, to_dense};
use proptest::prelude::*;
use rfelm_core::linalg::Matrix;
use rfelm_core::rng::StreamRng;
use rfelm_core::trainer::ridge_solve;

fn random(rows: usize, cols: usize, rng: &mut StreamRng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap()
}

#[test]
fn matches_dense_inversion_on_100_instances() {
    let mut rng = StreamRng::new(2024, 9);
    for case in 0..100 {
        let samples = 1 + rng.below(50) as usize;
        let features = 1 + rng.below(20) as usize;
        let classes = 1 + rng.below(10) as usize;
        let a_reg = 2f64.powi(rng.below(21) as i32 - 5);
        let h = random(samples, features, &mut rng);
        let t = random(samples, classes, &mut rng);
        let beta = ridge_solve(&h, &t, a_reg).unwrap();

        let (hd, td, bd) = (to_dense(&h), to_dense(&t), to_dense(&beta));
        let expected = oracle(&hd, &td, a_reg);
        let rel = frob(&diff(&bd, &expected)) / frob(&expected).max(f64::MIN_POSITIVE);
        assert!(rel <= 1e-8, "case {case}: relative difference {rel:e}");

        let (residual, rhs) = ridge_residual(&hd, &td, a_reg, &bd);
        assert!(residual <= 1e-8 * rhs, "case {case}: residual {residual:e}");
    }
}

#[test]
fn large_a_approaches_least_squares() {
    let mut rng = StreamRng::new(5, 9);
    let h = random(30, 6, &mut rng);
    let x_true = random(6, 2, &mut rng);
    let t = h.matmul(&x_true).unwrap();
    let beta = ridge_solve(&h, &t, 1e12).unwrap();
    for (b, x) in beta.data().iter().zip(x_true.data()) {
        assert!((b - x).abs() < 1e-9, "{b} vs {x}");
    }
}

#[test]
fn spec_example_20x5() {
    let mut rng = StreamRng::new(77, 9);
    let h = random(20, 5, &mut rng);
    let t = random(20, 3, &mut rng);
    let beta = to_dense(&ridge_solve(&h, &t, 1.0).unwrap());
    let expected = oracle(&to_dense(&h), &to_dense(&t), 1.0);
    for (r, e) in beta.iter().flatten().zip(expected.iter().flatten()) {
        assert!((r - e).abs() <= 1e-8 * e.abs().max(1e-3), "{r} vs {e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// More regularization (smaller A) never grows the solution norm.
    #[test]
    fn shrinkage_is_monotone(seed in any::<u64>(), k in -5i32..10) {
        let mut rng = StreamRng::new(seed, 9);
        let h = random(12, 4, &mut rng);
        let t = random(12, 2, &mut rng);
        let small = ridge_solve(&h, &t, 2f64.powi(k)).unwrap().frobenius_norm();
        let large = ridge_solve(&h, &t, 2f64.powi(k + 1)).unwrap().frobenius_norm();
        prop_assert!(small <= large * (1.0 + 1e-12));
    }
}
