//! Seeded, platform-independent random streams.
//!
//! Every random quantity is drawn from ChaCha20 keyed with
//! `rand_core::SeedableRng::seed_from_u64(seed)` (PCG32 key expansion) and a
//! dedicated 64-bit stream id, so adding draws to one quantity never shifts
//! another. Uniforms take the top 53 bits of `next_u64`; normals use the
//! Box-Muller transform evaluated with `libm`, which gives the same bits on
//! every target.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream holding the current-mirror weight exponents, row-major.
pub const WEIGHT_STREAM: u64 = 0;
/// Stream holding the per-neuron CCO gain exponents.
pub const GAIN_STREAM: u64 = 1;
/// Stream driving train/validation splitting.
pub const SPLIT_STREAM: u64 = 2;

pub struct StreamRng {
    inner: ChaCha20Rng,
    spare: Option<f64>,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner, spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`, rejection-sampled so there is no modulo bias.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Standard normal. Draws come in Box-Muller pairs: cosine branch first,
    /// then the cached sine branch.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u keeps the log argument in (0, 1].
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * core::f64::consts::PI * u2;
        self.spare = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        mean + std_dev * self.standard_normal()
    }

    /// Fisher-Yates, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
