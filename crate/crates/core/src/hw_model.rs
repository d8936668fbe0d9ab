//! Behavioral model of the RFE chip.
//!
//! Signal chain: the input DAC turns each digital pixel into a current, the
//! current-mirror array (CMA) scales it by a lognormal mismatch weight and
//! sums the currents per column, and a current-controlled oscillator (CCO)
//! with its own gain counts the summed current into a digital `h`. The FPGA
//! side then quantizes and zero-centers those counts.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Sub;

use crate::error::{invalid, Error, Result};
use crate::rng::{StreamRng, GAIN_STREAM, WEIGHT_STREAM};
use crate::stats;

/// Physical input channels of the chip.
pub const D_PHYS: usize = 128;
/// Physical hidden neurons (CCOs) of the chip.
pub const N_PHYS: usize = 128;
/// Percentile of training-set raw outputs mapped to the top `h` code.
pub const FULL_SCALE_PERCENTILE: f64 = 99.9;

/// Mismatch statistics for one chip instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchSpec {
    /// Std-dev of the Gaussian exponent of each mirror weight.
    pub sigma_w: f64,
    /// Std-dev of the Gaussian exponent of each CCO gain.
    pub sigma_cco: f64,
    pub seed: u64,
}

impl MismatchSpec {
    /// Threshold-voltage mismatch of 0.6 U_T, no CCO spread.
    pub fn new(seed: u64) -> Self {
        Self { sigma_w: 0.6, sigma_cco: 0.0, seed }
    }

    pub fn with_cco(mut self, sigma_cco: f64) -> Self {
        self.sigma_cco = sigma_cco;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_w >= 0.0 && self.sigma_w.is_finite()) {
            return Err(invalid("sigma_w must be finite and >= 0"));
        }
        if !(self.sigma_cco >= 0.0 && self.sigma_cco.is_finite()) {
            return Err(invalid("sigma_cco must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Converter resolutions along the signal chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantSpec {
    /// Input DAC resolution.
    pub bits_input: u32,
    /// Signed resolution of the raw CCO count `h` (b_h).
    pub bits_h: u32,
    /// Unsigned resolution of the RLSU output `H` (b_H).
    pub bits_activation: u32,
    /// Clamp out-of-range `h` to the end codes; otherwise wrap like a free-running counter.
    pub saturating: bool,
}

impl Default for QuantSpec {
    fn default() -> Self {
        Self { bits_input: 8, bits_h: 12, bits_activation: 8, saturating: true }
    }
}

impl QuantSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, bits) in [
            ("bits_input", self.bits_input),
            ("bits_h", self.bits_h),
            ("bits_activation", self.bits_activation),
        ] {
            if !(1..=32).contains(&bits) {
                return Err(invalid(alloc::format!("{name} = {bits} not in [1, 32]")));
            }
        }
        if self.bits_h < 2 {
            return Err(invalid("bits_h must leave room for a sign bit"));
        }
        Ok(())
    }

    /// Largest input DAC code, `2^bits_input - 1`.
    pub fn input_max(&self) -> u32 {
        ((1u64 << self.bits_input) - 1) as u32
    }

    /// Largest magnitude of a signed `h` code, `2^(bits_h - 1) - 1`.
    pub fn h_max(&self) -> i64 {
        (1i64 << (self.bits_h - 1)) - 1
    }
}

/// How raw CCO counts are turned into zero-mean features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CenteringMode {
    None,
    /// `out[k] = raw[2k] - raw[2k + 1]`; halves the outputs of each conversion.
    #[default]
    PairwiseDifference,
    /// `out[j] = raw[j] - raw[column]`.
    ReferenceColumn { column: usize },
}

impl CenteringMode {
    /// Features produced by one conversion of `n_phys` raw outputs.
    pub fn outputs_per_conversion(&self, n_phys: usize) -> usize {
        match self {
            CenteringMode::PairwiseDifference => n_phys / 2,
            _ => n_phys,
        }
    }

    pub fn validate(&self, n_phys: usize) -> Result<()> {
        match *self {
            CenteringMode::PairwiseDifference if !n_phys.is_multiple_of(2) => {
                Err(invalid(alloc::format!("pairwise centering needs an even output count, got {n_phys}")))
            }
            CenteringMode::ReferenceColumn { column } if column >= n_phys => {
                Err(invalid(alloc::format!("reference column {column} out of range for {n_phys} outputs")))
            }
            _ => Ok(()),
        }
    }
}

impl core::fmt::Display for CenteringMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CenteringMode::None => f.write_str("none"),
            CenteringMode::PairwiseDifference => f.write_str("pairwise"),
            CenteringMode::ReferenceColumn { column } => write!(f, "reference:{column}"),
        }
    }
}

/// Parses `none`, `pairwise` or `reference:<column>`.
impl core::str::FromStr for CenteringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CenteringMode::None),
            "pairwise" => Ok(CenteringMode::PairwiseDifference),
            _ => s
                .strip_prefix("reference:")
                .and_then(|c| c.parse().ok())
                .map(|column| CenteringMode::ReferenceColumn { column })
                .ok_or_else(|| invalid(alloc::format!("unknown centering mode {s:?}"))),
        }
    }
}

/// One sampled chip: a frozen lognormal weight matrix plus CCO gains.
#[derive(Debug, Clone, PartialEq)]
pub struct RfeCore {
    /// Row-major `d_phys x n_phys`; row `i` is input channel `i`.
    weights: Vec<f64>,
    cco_gains: Vec<f64>,
    /// Per-neuron offset added to the column sum before the CCO. Zero on the
    /// real chip, which has no bias path.
    bias: Vec<f64>,
    d_phys: usize,
    n_phys: usize,
    quant: QuantSpec,
}

impl RfeCore {
    /// Builds a core from explicit parameters, checking every invariant.
    pub fn from_parts(
        weights: Vec<f64>,
        cco_gains: Vec<f64>,
        d_phys: usize,
        n_phys: usize,
        quant: QuantSpec,
    ) -> Result<Self> {
        if d_phys == 0 || n_phys == 0 {
            return Err(invalid("core dimensions must be positive"));
        }
        quant.validate()?;
        if weights.len() != d_phys * n_phys {
            return Err(Error::LengthMismatch { expected: d_phys * n_phys, actual: weights.len() });
        }
        if cco_gains.len() != n_phys {
            return Err(Error::LengthMismatch { expected: n_phys, actual: cco_gains.len() });
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(invalid(alloc::format!("weight {w} is not a positive finite value")));
        }
        if let Some(g) = cco_gains.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(invalid(alloc::format!("CCO gain {g} is not a positive finite value")));
        }
        Ok(Self { weights, cco_gains, bias: vec![0.0; n_phys], d_phys, n_phys, quant })
    }

    /// Replaces the (normally zero) per-neuron bias.
    pub fn with_bias(mut self, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != self.n_phys {
            return Err(Error::LengthMismatch { expected: self.n_phys, actual: bias.len() });
        }
        self.bias = bias;
        Ok(self)
    }

    pub fn d_phys(&self) -> usize {
        self.d_phys
    }

    pub fn n_phys(&self) -> usize {
        self.n_phys
    }

    pub fn quant(&self) -> &QuantSpec {
        &self.quant
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.n_phys + col]
    }

    pub fn cco_gains(&self) -> &[f64] {
        &self.cco_gains
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// The equivalent core whose weight rows are circularly shifted so that
    /// `project(&self.rotate_rows(r), x) == project(self, &rotate_input(x, r))`.
    /// Row `i` of the result is row `(i - r) mod d_phys` of `self`.
    pub fn rotate_rows(&self, r: usize) -> RfeCore {
        let d = self.d_phys;
        let n = self.n_phys;
        let r = r % d;
        let mut weights = vec![0.0; d * n];
        for i in 0..d {
            let src = (i + d - r) % d;
            weights[i * n..(i + 1) * n].copy_from_slice(&self.weights[src * n..(src + 1) * n]);
        }
        RfeCore { weights, ..self.clone() }
    }

    /// Raw outputs for a batch of quantized inputs (`rows x d_phys`,
    /// row-major), written row-major into `out` (`rows x n_phys`).
    pub fn project_batch(&self, inputs: &[f64], rows: usize, out: &mut [f64]) -> Result<()> {
        let (d, n) = (self.d_phys, self.n_phys);
        if inputs.len() != rows * d {
            return Err(Error::LengthMismatch { expected: rows * d, actual: inputs.len() });
        }
        if out.len() != rows * n {
            return Err(Error::LengthMismatch { expected: rows * n, actual: out.len() });
        }
        if rows == 0 {
            return Ok(());
        }
        // out = inputs * W
        unsafe {
            matrixmultiply::dgemm(
                rows,
                d,
                n,
                1.0,
                inputs.as_ptr(),
                d as isize,
                1,
                self.weights.as_ptr(),
                n as isize,
                1,
                0.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        for row in out.chunks_exact_mut(n) {
            for ((v, g), b) in row.iter_mut().zip(&self.cco_gains).zip(&self.bias) {
                *v = g * (*v + b);
            }
        }
        Ok(())
    }
}

/// Samples a chip instance: `w_ij = exp(x_ij)`, `x_ij ~ N(0, sigma_w)` drawn
/// row-major from the weight stream, and `g_j = exp(y_j)`,
/// `y_j ~ N(0, sigma_cco)` from the gain stream.
pub fn sample_core(spec: &MismatchSpec, d_phys: usize, n_phys: usize, quant: QuantSpec) -> Result<RfeCore> {
    if d_phys == 0 || n_phys == 0 {
        return Err(invalid("core dimensions must be positive"));
    }
    spec.validate()?;
    let mut rng = StreamRng::new(spec.seed, WEIGHT_STREAM);
    let weights = (0..d_phys * n_phys).map(|_| libm::exp(rng.normal(0.0, spec.sigma_w))).collect();
    let mut rng = StreamRng::new(spec.seed, GAIN_STREAM);
    let gains = (0..n_phys).map(|_| libm::exp(rng.normal(0.0, spec.sigma_cco))).collect();
    RfeCore::from_parts(weights, gains, d_phys, n_phys, quant)
}

/// Input DAC: `round(x * (2^bits_input - 1))` for `x` in `[0, 1]`.
pub fn quantize_input(x: &[f64], quant: &QuantSpec) -> Result<Vec<u32>> {
    let max = quant.input_max() as f64;
    x.iter()
        .enumerate()
        .map(|(index, &value)| {
            if (0.0..=1.0).contains(&value) {
                Ok(libm::round(value * max) as u32)
            } else {
                Err(Error::OutOfRange { index, value })
            }
        })
        .collect()
}

/// Raw column sums `g_j * (sum_i w_ij x_i + b_j)`, no nonlinearity.
pub fn project(core: &RfeCore, x_q: &[u32]) -> Result<Vec<f64>> {
    if x_q.len() != core.d_phys {
        return Err(Error::LengthMismatch { expected: core.d_phys, actual: x_q.len() });
    }
    let n = core.n_phys;
    let mut sums = core.bias.clone();
    for (row, &x) in core.weights.chunks_exact(n).zip(x_q) {
        if x == 0 {
            continue;
        }
        let x = x as f64;
        for (s, w) in sums.iter_mut().zip(row) {
            *s += w * x;
        }
    }
    for (s, g) in sums.iter_mut().zip(&core.cco_gains) {
        *s *= g;
    }
    Ok(sums)
}

/// Signed `bits_h` quantization of raw outputs against `full_scale`.
pub fn quantize_h(raw: &[f64], quant: &QuantSpec, full_scale: f64) -> Vec<i32> {
    let mut out = vec![0; raw.len()];
    quantize_h_into(raw, quant, full_scale, &mut out);
    out
}

pub(crate) fn quantize_h_into(raw: &[f64], quant: &QuantSpec, full_scale: f64, out: &mut [i32]) {
    debug_assert!(full_scale > 0.0);
    let max = quant.h_max();
    let step = max as f64 / full_scale;
    let modulus = 1i64 << quant.bits_h;
    for (o, &r) in out.iter_mut().zip(raw) {
        let code = libm::round(r * step);
        *o = if quant.saturating || !code.is_finite() {
            code.clamp(-max as f64, max as f64) as i64
        } else {
            // two's-complement wrap of a bits_h counter
            let c = (code as i64).rem_euclid(modulus);
            if c > modulus / 2 - 1 { c - modulus } else { c }
        } as i32;
    }
}

/// Zero-centering done on the digital side.
pub fn zero_center<T: Copy + Sub<Output = T>>(raw: &[T], mode: CenteringMode) -> Result<Vec<T>> {
    mode.validate(raw.len())?;
    Ok(match mode {
        CenteringMode::None => raw.to_vec(),
        CenteringMode::PairwiseDifference => raw.chunks_exact(2).map(|p| p[0] - p[1]).collect(),
        CenteringMode::ReferenceColumn { column } => {
            let reference = raw[column];
            raw.iter().map(|&v| v - reference).collect()
        }
    })
}

/// Full-scale level for [`quantize_h`]: the given percentile of raw outputs.
pub fn calibrate_full_scale(raw: &mut [f64], percentile: f64) -> Result<f64> {
    let v = stats::percentile(raw, percentile).ok_or_else(|| invalid("no raw values to calibrate"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(alloc::format!("calibrated full scale {v} is not positive")))
    }
}
