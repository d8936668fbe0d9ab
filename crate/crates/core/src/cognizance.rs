//! Cognizance check: mute hidden neurons that sit on one saturation level for
//! more than `theta` percent of the training samples. Such a neuron says the
//! same thing about nearly every image and only costs second-stage work.

use alloc::vec::Vec;

use crate::dataset::{Activated, FeatureMatrix, TrainingSide};
use crate::error::{invalid, Error, Result};
use crate::nonlinearity::ActivationSpec;

/// Default cognizance threshold, in percent.
pub const DEFAULT_THETA: f64 = 99.5;

/// One bit per virtual neuron; set means the neuron is propagated.
#[derive(Debug, Clone, PartialEq)]
pub struct CognizanceMask {
    bits: Vec<bool>,
    theta: f64,
    m_count: usize,
}

impl CognizanceMask {
    pub fn from_bits(bits: Vec<bool>, theta: f64) -> Self {
        let m_count = bits.iter().filter(|b| **b).count();
        Self { bits, theta, m_count }
    }

    pub fn all_ones(len: usize, theta: f64) -> Self {
        Self::from_bits(alloc::vec![true; len], theta)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Virtual neurons covered, `L`.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Cognizant neurons, `M`.
    pub fn m_count(&self) -> usize {
        self.m_count
    }

    /// `M == 0`: nothing left to train on.
    pub fn is_degenerate(&self) -> bool {
        self.m_count == 0
    }

    pub fn ratio(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.m_count as f64 / self.bits.len() as f64
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(j, _)| j).collect()
    }

    /// Little-endian bit packing: neuron `j` is bit `j % 8` of byte `j / 8`.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut out = alloc::vec![0u8; self.bits.len().div_ceil(8)];
        for (j, _) in self.bits.iter().enumerate().filter(|(_, b)| **b) {
            out[j / 8] |= 1 << (j % 8);
        }
        out
    }

    pub fn from_packed(bytes: &[u8], len: usize, theta: f64) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::LengthMismatch { expected: len.div_ceil(8), actual: bytes.len() });
        }
        let bits = (0..len).map(|j| bytes[j / 8] >> (j % 8) & 1 == 1).collect();
        Ok(Self::from_bits(bits, theta))
    }
}

/// How a neuron's usefulness is judged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CognizanceScorer {
    /// Mute when one saturation level covers more than `theta` percent of samples.
    Saturation { theta: f64 },
    /// Mute when the variance of the real-valued output (RLSU codes scaled to
    /// `[0, 1]`) is at or below `min_variance`. Not used by the default pipeline.
    Variance { min_variance: f64 },
}

fn saturation_counts(codes: &FeatureMatrix<i32>, spec: &ActivationSpec) -> Vec<u32> {
    let levels = spec.saturation_levels();
    let mut counts = alloc::vec![0u32; codes.cols() * levels.len()];
    for row in codes.iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            if let Some(k) = levels.iter().position(|&l| l == v) {
                counts[j * levels.len() + k] += 1;
            }
        }
    }
    counts.chunks_exact(levels.len()).map(|c| c.iter().copied().max().unwrap_or(0)).collect()
}

/// Fraction of samples on the most common saturation level, per neuron.
pub fn saturation_fractions(codes: &FeatureMatrix<i32>, spec: &ActivationSpec) -> Vec<f64> {
    let n = codes.rows() as f64;
    saturation_counts(codes, spec).into_iter().map(|c| c as f64 / n).collect()
}

/// Saturation-count mask over an activated `samples x L` code matrix.
pub fn saturation_mask(codes: &FeatureMatrix<i32>, spec: &ActivationSpec, theta: f64) -> Result<CognizanceMask> {
    if codes.rows() == 0 {
        return Err(invalid("cognizance check needs at least one sample"));
    }
    if !(theta > 50.0 && theta <= 100.0) {
        return Err(invalid(alloc::format!("theta {theta} outside (50, 100]")));
    }
    let n = codes.rows() as f64;
    // count / n > theta / 100, compared as count * 100 > theta * n so 996/1000 vs 99.5 is exact
    let bits = saturation_counts(codes, spec).into_iter().map(|c| c as f64 * 100.0 <= theta * n).collect();
    Ok(CognizanceMask::from_bits(bits, theta))
}

/// Variance-based alternative to [`saturation_mask`].
pub fn variance_mask(codes: &FeatureMatrix<i32>, spec: &ActivationSpec, min_variance: f64) -> Result<CognizanceMask> {
    if codes.rows() == 0 {
        return Err(invalid("cognizance check needs at least one sample"));
    }
    let scale = spec.code_scale();
    let n = codes.rows() as f64;
    let mut sum = alloc::vec![0.0; codes.cols()];
    let mut sum_sq = alloc::vec![0.0; codes.cols()];
    for row in codes.iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            let x = v as f64 * scale;
            sum[j] += x;
            sum_sq[j] += x * x;
        }
    }
    let bits = sum
        .iter()
        .zip(&sum_sq)
        .map(|(s, sq)| {
            let mean = s / n;
            (sq / n - mean * mean) > min_variance
        })
        .collect();
    Ok(CognizanceMask::from_bits(bits, f64::NAN))
}

/// The cognizance mask of training-side activations.
pub fn compute_mask<P: TrainingSide>(train: &Activated<P>, theta: f64) -> Result<CognizanceMask> {
    saturation_mask(train.codes(), train.spec(), theta)
}

pub fn compute_mask_with<P: TrainingSide>(train: &Activated<P>, scorer: CognizanceScorer) -> Result<CognizanceMask> {
    match scorer {
        CognizanceScorer::Saturation { theta } => saturation_mask(train.codes(), train.spec(), theta),
        CognizanceScorer::Variance { min_variance } => variance_mask(train.codes(), train.spec(), min_variance),
    }
}

/// Keeps the cognizant columns, in order.
pub fn apply_mask<T: Copy>(h: &FeatureMatrix<T>, mask: &CognizanceMask) -> Result<FeatureMatrix<T>> {
    if mask.len() != h.cols() {
        return Err(Error::LengthMismatch { expected: h.cols(), actual: mask.len() });
    }
    Ok(h.select_columns(&mask.indices()))
}
