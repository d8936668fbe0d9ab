//! Rotating the input equals rotating the weight rows, checked in exact
//! rational arithmetic.

mod oracles;

use oracles::dyadic::exact_project;
use proptest::prelude::*;
use rfelm_core::expansion::{expand_features, rotate_input, ExpansionPlan};
use rfelm_core::hw_model::{quantize_h, sample_core, zero_center, CenteringMode, MismatchSpec, QuantSpec, RfeCore};

fn small_core() -> impl Strategy<Value = (RfeCore, Vec<u32>, usize)> {
    (1usize..=8, 1usize..=4, any::<u64>(), 0.0f64..1.0, 0.0f64..0.8).prop_flat_map(|(d, n, seed, sw, sc)| {
        let spec = MismatchSpec { sigma_w: sw, sigma_cco: sc, seed };
        let core = sample_core(&spec, d, n, QuantSpec::default()).unwrap();
        (Just(core), prop::collection::vec(0u32..=255, d), 0..d)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn input_rotation_equals_row_rotation((core, x, k) in small_core()) {
        let lhs = exact_project(&core, &rotate_input(&x, k));
        let rhs = exact_project(&core.rotate_rows(k), &x);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn rotations_compose(x in prop::collection::vec(any::<u8>(), 1..20), a in 0usize..40, b in 0usize..40) {
        let d = x.len();
        prop_assert_eq!(rotate_input(&rotate_input(&x, a), b), rotate_input(&x, (a + b) % d));
        prop_assert_eq!(rotate_input(&x, d), x.clone());
    }

    #[test]
    fn row_rotations_compose((core, _x, k) in small_core(), j in 0usize..8) {
        let d = core.d_phys();
        let j = j % d;
        prop_assert_eq!(core.rotate_rows(k).rotate_rows(j), core.rotate_rows((k + j) % d));
    }
}

/// Integer-valued weights and gains make every f64 sum exact, so the whole
/// expansion (quantize, center) must agree block by block.
#[test]
fn expansion_blocks_match_rotated_cores() {
    let mut state = 7u64;
    let mut next = move |m: u64| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) % m
    };
    for _ in 0..100 {
        let d = 1 + next(8) as usize;
        let n = 2 * (1 + next(2) as usize);
        let weights: Vec<f64> = (0..d * n).map(|_| 1.0 + next(5) as f64).collect();
        let gains: Vec<f64> = (0..n).map(|_| 1.0 + next(3) as f64).collect();
        let core = RfeCore::from_parts(weights, gains, d, n, QuantSpec::default()).unwrap();
        let x: Vec<u32> = (0..d).map(|_| next(256) as u32).collect();
        let plan = ExpansionPlan::new(d, n, d, CenteringMode::PairwiseDifference).unwrap();
        let full_scale = 4000.0;
        let feats = expand_features(&core, &x, &plan, full_scale).unwrap();
        let per = plan.per_conversion();
        for r in 0..d {
            let raw = rfelm_core::project(&core.rotate_rows(r), &x).unwrap();
            let expected = zero_center(&quantize_h(&raw, &QuantSpec::default(), full_scale), CenteringMode::PairwiseDifference).unwrap();
            assert_eq!(&feats[r * per..(r + 1) * per], &expected[..]);
        }
    }
}
