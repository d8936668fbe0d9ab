//! Virtual hidden-neuron expansion by input rotation.
//!
//! The chip only has `N` physical weight columns. Feeding the same image again
//! with its channels circularly rotated is the same as projecting through a
//! weight matrix whose rows are circularly rotated, so `E` conversions give
//! `E * N` hidden neurons out of `D * N` physical mirrors.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;

use crate::error::{invalid, Error, Result};
use crate::hw_model::{quantize_h_into, CenteringMode, RfeCore};

/// How many conversions are run per image and how their outputs are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpansionPlan {
    d_phys: usize,
    n_phys: usize,
    factor_e: usize,
    centering: CenteringMode,
    requested_factor: usize,
}

impl ExpansionPlan {
    /// `factor_e` conversions. Values above `d_phys` only repeat earlier
    /// rotations, so they are clamped to `d_phys`; see [`Self::clamped_from`].
    pub fn new(d_phys: usize, n_phys: usize, factor_e: usize, centering: CenteringMode) -> Result<Self> {
        if d_phys == 0 || n_phys == 0 {
            return Err(invalid("plan dimensions must be positive"));
        }
        if factor_e == 0 {
            return Err(invalid("expansion factor must be at least 1"));
        }
        centering.validate(n_phys)?;
        Ok(Self { d_phys, n_phys, factor_e: factor_e.min(d_phys), centering, requested_factor: factor_e })
    }

    /// Smallest plan yielding at least `features` centered features.
    pub fn for_features(features: usize, d_phys: usize, n_phys: usize, centering: CenteringMode) -> Result<Self> {
        let per = centering.outputs_per_conversion(n_phys);
        if per == 0 {
            return Err(invalid("centering leaves no outputs per conversion"));
        }
        Self::new(d_phys, n_phys, features.div_ceil(per).max(1), centering)
    }

    pub fn d_phys(&self) -> usize {
        self.d_phys
    }

    pub fn n_phys(&self) -> usize {
        self.n_phys
    }

    /// Expansion factor `E`, i.e. conversions per image.
    pub fn factor_e(&self) -> usize {
        self.factor_e
    }

    pub fn centering(&self) -> CenteringMode {
        self.centering
    }

    /// Raw CCO outputs per image, `E * N`.
    pub fn l_total(&self) -> usize {
        self.factor_e * self.n_phys
    }

    /// Features left after zero-centering; this is the `L` the classifier sees.
    pub fn l_effective(&self) -> usize {
        self.factor_e * self.per_conversion()
    }

    pub fn per_conversion(&self) -> usize {
        self.centering.outputs_per_conversion(self.n_phys)
    }

    /// The requested factor when it exceeded `d_phys` and was clamped.
    pub fn clamped_from(&self) -> Option<usize> {
        (self.requested_factor != self.factor_e).then_some(self.requested_factor)
    }

    /// Same hardware, fewer conversions.
    pub fn truncated(&self, factor_e: usize) -> Result<Self> {
        Self::new(self.d_phys, self.n_phys, factor_e.min(self.factor_e), self.centering)
    }
}

/// Circular left rotation: `out[i] = x[(i + k) mod D]`.
pub fn rotate_input<T: Copy>(x: &[T], k: usize) -> Vec<T> {
    if x.is_empty() {
        return Vec::new();
    }
    let k = k % x.len();
    let mut out = Vec::with_capacity(x.len());
    out.extend_from_slice(&x[k..]);
    out.extend_from_slice(&x[..k]);
    out
}

/// All centered, quantized features of one image: block `r` is conversion `r`
/// of the input rotated by `r`, in rotation order.
pub fn expand_features(core: &RfeCore, x_q: &[u32], plan: &ExpansionPlan, full_scale: f64) -> Result<Vec<i32>> {
    expand_batch(core, x_q, 1, plan, full_scale)
}

const BATCH_ROWS: usize = 2048;

/// [`expand_features`] for `rows` images stored row-major in `inputs`;
/// returns a row-major `rows x plan.l_effective()` matrix.
pub fn expand_batch(
    core: &RfeCore,
    inputs: &[u32],
    rows: usize,
    plan: &ExpansionPlan,
    full_scale: f64,
) -> Result<Vec<i32>> {
    let d = core.d_phys();
    let n = core.n_phys();
    if plan.d_phys != d || plan.n_phys != n {
        return Err(invalid("expansion plan does not match core dimensions"));
    }
    if inputs.len() != rows * d {
        return Err(Error::LengthMismatch { expected: rows * d, actual: inputs.len() });
    }
    if !(full_scale > 0.0 && full_scale.is_finite()) {
        return Err(invalid("full scale must be positive"));
    }
    let per = plan.per_conversion();
    let width = plan.l_effective();
    let mut out = vec![0i32; rows * width];
    let chunk = BATCH_ROWS.min(rows.max(1));
    let mut rotated = vec![0.0; chunk * d];
    let mut raw = vec![0.0; chunk * n];
    let mut codes = vec![0i32; n];

    for start in (0..rows).step_by(chunk) {
        let len = chunk.min(rows - start);
        for r in 0..plan.factor_e {
            for (dst, src) in rotated.chunks_exact_mut(d).zip(inputs[start * d..].chunks_exact(d)).take(len) {
                for (i, v) in dst.iter_mut().enumerate() {
                    *v = src[(i + r) % d] as f64;
                }
            }
            core.project_batch(&rotated[..len * d], len, &mut raw[..len * n])?;
            for (k, raw_row) in raw.chunks_exact(n).take(len).enumerate() {
                quantize_h_into(raw_row, core.quant(), full_scale, &mut codes);
                let row = start + k;
                let dst = &mut out[row * width + r * per..row * width + (r + 1) * per];
                center_into(&codes, plan.centering, dst);
            }
        }
    }
    Ok(out)
}

fn center_into(codes: &[i32], mode: CenteringMode, dst: &mut [i32]) {
    match mode {
        CenteringMode::None => dst.copy_from_slice(codes),
        CenteringMode::PairwiseDifference => {
            for (d, p) in dst.iter_mut().zip(codes.chunks_exact(2)) {
                *d = p[0] - p[1];
            }
        }
        CenteringMode::ReferenceColumn { column } => {
            let reference = codes[column];
            for (d, c) in dst.iter_mut().zip(codes) {
                *d = c - reference;
            }
        }
    }
}

/// Number of distinct `d`-element weight vectors drawable from `d * n`
/// mirrors: `C(d * n, d)`, exact.
pub fn count_weight_vectors(d: usize, n: usize) -> BigUint {
    assert!(d >= 1 && n >= 1, "counts must be positive");
    let total = d * n;
    // C(total, d) = prod_{i=1..d} (total - d + i) / i; each prefix is itself a binomial.
    let mut acc = BigUint::from(1u32);
    for i in 1..=d {
        acc *= BigUint::from(total - d + i);
        acc /= BigUint::from(i);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hw_model::{project, quantize_h, sample_core, zero_center, MismatchSpec, QuantSpec};

    #[test]
    fn rotation_examples() {
        assert_eq!(rotate_input(&['a', 'b', 'c'], 1), vec!['b', 'c', 'a']);
        assert_eq!(rotate_input(&['a', 'b', 'c'], 0), vec!['a', 'b', 'c']);
        assert_eq!(rotate_input(&['a', 'b', 'c'], 3), vec!['a', 'b', 'c']);
        assert!(rotate_input::<u8>(&[], 2).is_empty());
    }

    #[test]
    fn plan_accounting() {
        let p = ExpansionPlan::for_features(1280, 128, 128, CenteringMode::PairwiseDifference).unwrap();
        assert_eq!((p.factor_e(), p.l_total(), p.l_effective()), (20, 2560, 1280));
        let p = ExpansionPlan::new(128, 128, 50, CenteringMode::None).unwrap();
        assert_eq!((p.l_total(), p.l_effective()), (6400, 6400));
        let p = ExpansionPlan::new(3, 2, 9, CenteringMode::None).unwrap();
        assert_eq!(p.factor_e(), 3);
        assert_eq!(p.clamped_from(), Some(9));
        assert!(ExpansionPlan::new(3, 2, 0, CenteringMode::None).is_err());
        assert!(ExpansionPlan::new(3, 3, 1, CenteringMode::PairwiseDifference).is_err());
    }

    #[test]
    fn single_conversion_matches_pipeline() {
        let core = sample_core(&MismatchSpec::new(2), 8, 4, QuantSpec::default()).unwrap();
        let plan = ExpansionPlan::new(8, 4, 1, CenteringMode::PairwiseDifference).unwrap();
        let x = [4u32, 0, 200, 13, 9, 255, 1, 77];
        let raw = project(&core, &x).unwrap();
        let expected = zero_center(&quantize_h(&raw, core.quant(), 900.0), plan.centering()).unwrap();
        assert_eq!(expand_features(&core, &x, &plan, 900.0).unwrap(), expected);
    }

    #[test]
    fn constant_input_repeats_blocks() {
        let core = sample_core(&MismatchSpec::new(4), 6, 4, QuantSpec::default()).unwrap();
        let plan = ExpansionPlan::new(6, 4, 5, CenteringMode::None).unwrap();
        let f = expand_features(&core, &[17; 6], &plan, 500.0).unwrap();
        assert_eq!(f.len(), 20);
        for block in f.chunks(4) {
            assert_eq!(block, &f[..4]);
        }
    }

    #[test]
    fn batch_rows_are_independent() {
        let core = sample_core(&MismatchSpec::new(6), 5, 4, QuantSpec::default()).unwrap();
        let plan = ExpansionPlan::new(5, 4, 3, CenteringMode::ReferenceColumn { column: 1 }).unwrap();
        let a = [1u32, 2, 3, 4, 5];
        let b = [9u32, 0, 0, 250, 3];
        let both: Vec<u32> = a.iter().chain(&b).copied().collect();
        let batch = expand_batch(&core, &both, 2, &plan, 300.0).unwrap();
        assert_eq!(&batch[..12], expand_features(&core, &a, &plan, 300.0).unwrap().as_slice());
        assert_eq!(&batch[12..], expand_features(&core, &b, &plan, 300.0).unwrap().as_slice());
    }

    #[test]
    fn binomial_counts() {
        assert_eq!(count_weight_vectors(3, 2), BigUint::from(20u32));
        assert_eq!(count_weight_vectors(1, 1), BigUint::from(1u32));
        assert_eq!(count_weight_vectors(2, 3), BigUint::from(15u32));
    }
}
