//! MNIST samples, 2x3 block averaging and train/validation splitting.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::rng::{StreamRng, SPLIT_STREAM};

pub const IMAGE_ROWS: usize = 28;
pub const IMAGE_COLS: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_ROWS * IMAGE_COLS;
pub const BLOCK_ROWS: usize = 2;
pub const BLOCK_COLS: usize = 3;
/// Output grid: 14 rows of 9 blocks. Column 27 is dropped since 28 = 3 * 9 + 1.
pub const COMPRESSED_ROWS: usize = IMAGE_ROWS / BLOCK_ROWS;
pub const COMPRESSED_COLS: usize = IMAGE_COLS / BLOCK_COLS;
pub const COMPRESSED_LEN: usize = COMPRESSED_ROWS * COMPRESSED_COLS;

/// A 28x28 grayscale digit, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSample {
    pub pixels: [u8; IMAGE_PIXELS],
    pub label: u8,
}

impl ImageSample {
    pub fn new(pixels: &[u8], label: u8) -> Result<Self> {
        let pixels: [u8; IMAGE_PIXELS] = pixels
            .try_into()
            .map_err(|_| Error::LengthMismatch { expected: IMAGE_PIXELS, actual: pixels.len() })?;
        if label >= 10 {
            return Err(invalid(alloc::format!("label {label} is not a digit")));
        }
        Ok(Self { pixels, label })
    }
}

/// A block-averaged digit: 126 values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedSample {
    pub vector: [f64; COMPRESSED_LEN],
    pub label: u8,
}

/// Sum of each 2x3 block (0..=1530); the average is `sum / 6 / 255`.
pub fn block_sums(pixels: &[u8; IMAGE_PIXELS]) -> [u16; COMPRESSED_LEN] {
    let mut out = [0u16; COMPRESSED_LEN];
    for r in 0..COMPRESSED_ROWS {
        for c in 0..COMPRESSED_COLS {
            let mut s = 0u16;
            for dr in 0..BLOCK_ROWS {
                for dc in 0..BLOCK_COLS {
                    s += pixels[(BLOCK_ROWS * r + dr) * IMAGE_COLS + BLOCK_COLS * c + dc] as u16;
                }
            }
            out[r * COMPRESSED_COLS + c] = s;
        }
    }
    out
}

pub fn downsample_2x3(img: &ImageSample) -> CompressedSample {
    CompressedSample { vector: averages_from_sums(&block_sums(&img.pixels)), label: img.label }
}

/// Block averages in `[0, 1]` from [`block_sums`] output.
pub fn averages_from_sums(sums: &[u16; COMPRESSED_LEN]) -> [f64; COMPRESSED_LEN] {
    let mut vector = [0.0; COMPRESSED_LEN];
    for (v, &s) in vector.iter_mut().zip(sums) {
        *v = s as f64 / (BLOCK_ROWS * BLOCK_COLS) as f64 / 255.0;
    }
    vector
}

/// Index sets of a fit/validation split of the training set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub fit: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Stratified, seeded split of `labels` into disjoint fit and validation sets.
///
/// Each class is shuffled on its own and contributes its proportional share
/// (largest-remainder rounding), so class proportions in both subsets track
/// the source to within one sample per class.
pub fn split_train_val(labels: &[u8], fit_size: usize, val_size: usize, seed: u64) -> Result<SplitIndices> {
    let total = labels.len();
    if fit_size + val_size > total {
        return Err(invalid(alloc::format!(
            "split of {fit_size} + {val_size} needs more than the {total} available samples"
        )));
    }
    if fit_size == 0 || val_size == 0 {
        return Err(invalid("split sizes must be positive"));
    }
    let classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let fit_quota = apportion(&counts, fit_size);
    let val_quota = apportion(&counts, val_size);

    let mut rng = StreamRng::new(seed, SPLIT_STREAM);
    let mut fit = Vec::with_capacity(fit_size);
    let mut validation = Vec::with_capacity(val_size);
    for (c, members) in by_class.iter_mut().enumerate() {
        rng.shuffle(members);
        if fit_quota[c] + val_quota[c] > members.len() {
            return Err(invalid(alloc::format!("class {c} is too small for the requested split")));
        }
        fit.extend_from_slice(&members[..fit_quota[c]]);
        validation.extend_from_slice(&members[fit_quota[c]..fit_quota[c] + val_quota[c]]);
    }
    rng.shuffle(&mut fit);
    rng.shuffle(&mut validation);
    Ok(SplitIndices { fit, validation })
}

/// Largest-remainder apportionment of `size` across groups of size `counts`.
fn apportion(counts: &[usize], size: usize) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let mut quota: Vec<usize> = counts.iter().map(|&c| c * size / total).collect();
    let mut left = size - quota.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // biggest remainder first; ties to the lower class index
    order.sort_by(|&a, &b| ((counts[b] * size) % total).cmp(&((counts[a] * size) % total)).then(a.cmp(&b)));
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if quota[c] < counts[c] {
            quota[c] += 1;
            left -= 1;
        }
    }
    quota
}
