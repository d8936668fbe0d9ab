//! MNIST on disk: IDX discovery, 2x3 compression and a checksummed cache of
//! the compressed set.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rfelm_core::data::{averages_from_sums, block_sums, COMPRESSED_LEN, IMAGE_PIXELS};
use rfelm_core::hw_model::{quantize_input, QuantSpec};
use sha2::{Digest, Sha256};

use crate::error::{FileError, FileResult};
use crate::idx;

const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

pub const CACHE_FILE: &str = "rfelm-compressed.bin";
const CACHE_MAGIC: &[u8; 8] = b"RFELMCMP";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error(
        "MNIST file {file} not found in {dir}. Download train-images-idx3-ubyte.gz, \
         train-labels-idx1-ubyte.gz, t10k-images-idx3-ubyte.gz and t10k-labels-idx1-ubyte.gz \
         from any MNIST mirror into that directory (gzipped or not), or point --data-dir \
         (or data_dir in the config) at an existing copy"
    )]
    Missing { dir: String, file: String },
    #[error(transparent)]
    File(#[from] FileError),
}

/// Compressed digits: 126 block sums per sample (average = sum / 6 / 255).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompressedSet {
    pub sums: Vec<u16>,
    pub labels: Vec<u8>,
}

impl CompressedSet {
    pub fn from_pixels(pixels: &[u8], labels: Vec<u8>) -> Self {
        let sums = pixels
            .par_chunks_exact(IMAGE_PIXELS)
            .flat_map_iter(|p| block_sums(p.try_into().unwrap()))
            .collect();
        Self { sums, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_sums(&self, i: usize) -> &[u16; COMPRESSED_LEN] {
        self.sums[i * COMPRESSED_LEN..(i + 1) * COMPRESSED_LEN].try_into().unwrap()
    }

    /// First `n` samples.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self { sums: self.sums[..n * COMPRESSED_LEN].to_vec(), labels: self.labels[..n].to_vec() }
    }

    /// DAC codes of every sample, zero-padded from 126 to `width` inputs.
    pub fn dac_inputs(&self, quant: &QuantSpec, width: usize) -> rfelm_core::Result<Vec<u32>> {
        assert!(width >= COMPRESSED_LEN, "core narrower than the compressed image");
        let mut out = vec![0u32; self.len() * width];
        for (i, row) in out.chunks_exact_mut(width).enumerate() {
            let codes = quantize_input(&averages_from_sums(self.sample_sums(i)), quant)?;
            row[..COMPRESSED_LEN].copy_from_slice(&codes);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mnist {
    pub train: CompressedSet,
    pub test: CompressedSet,
}

fn locate(dir: &Path, stem: &str) -> Result<PathBuf, DataError> {
    let dotted = stem.replacen("-idx", ".idx", 1);
    for name in [stem.to_string(), format!("{stem}.gz"), dotted.clone(), format!("{dotted}.gz")] {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(DataError::Missing { dir: dir.display().to_string(), file: format!("{stem}[.gz]") })
}

/// Reads the four IDX files of `dir` and compresses them.
pub fn load_idx_dir(dir: &Path) -> Result<Mnist, DataError> {
    let mut sets = Vec::new();
    for (images, labels) in [(TRAIN_IMAGES, TRAIN_LABELS), (TEST_IMAGES, TEST_LABELS)] {
        let ip = locate(dir, images)?;
        let lp = locate(dir, labels)?;
        let pixels = idx::read_images(&ip)?;
        let labels = idx::read_labels(&lp)?;
        if pixels.len() / IMAGE_PIXELS != labels.len() {
            return Err(FileError::format(&lp, 4, format!("{} labels for {} images", labels.len(), pixels.len() / IMAGE_PIXELS)).into());
        }
        sets.push(CompressedSet::from_pixels(&pixels, labels));
    }
    let test = sets.pop().unwrap();
    let train = sets.pop().unwrap();
    Ok(Mnist { train, test })
}

/// Loads `dir`, preferring a valid cache file and writing one when absent.
pub fn load_mnist(dir: &Path) -> Result<Mnist, DataError> {
    let cache = dir.join(CACHE_FILE);
    if cache.is_file() {
        match read_cache(&cache) {
            Ok(m) => return Ok(m),
            Err(e) => log::warn!("ignoring compressed cache: {e}"),
        }
    }
    let mnist = load_idx_dir(dir)?;
    if let Err(e) = write_cache(&cache, &mnist) {
        log::warn!("could not write compressed cache: {e}");
    }
    Ok(mnist)
}

pub fn encode_cache(m: &Mnist) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + (m.train.sums.len() + m.test.sums.len()) * 2 + m.train.len() + m.test.len() + 32);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(COMPRESSED_LEN as u32).to_le_bytes());
    out.extend_from_slice(&(m.train.len() as u32).to_le_bytes());
    out.extend_from_slice(&(m.test.len() as u32).to_le_bytes());
    for set in [&m.train, &m.test] {
        for s in &set.sums {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out.extend_from_slice(&set.labels);
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn write_cache(path: &Path, m: &Mnist) -> FileResult<()> {
    fs::write(path, encode_cache(m)).map_err(|e| FileError::io(path, e))
}

pub fn read_cache(path: &Path) -> FileResult<Mnist> {
    let bytes = fs::read(path).map_err(|e| FileError::io(path, e))?;
    decode_cache(&bytes, path)
}

pub fn decode_cache(bytes: &[u8], path: &Path) -> FileResult<Mnist> {
    const HEADER: usize = 24;
    let truncated = |expected: usize| FileError::Truncated {
        path: path.display().to_string(),
        expected: expected as u64,
        actual: bytes.len() as u64,
    };
    if bytes.len() < HEADER + 32 {
        return Err(truncated(HEADER + 32));
    }
    if &bytes[..8] != CACHE_MAGIC {
        return Err(FileError::format(path, 0, "not a compressed MNIST cache"));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let version = word(8) as u32;
    if version != CACHE_VERSION {
        return Err(FileError::Version { path: path.display().to_string(), found: version, supported: CACHE_VERSION });
    }
    if word(12) != COMPRESSED_LEN {
        return Err(FileError::format(path, 12, format!("vector length {}, expected {COMPRESSED_LEN}", word(12))));
    }
    let (n_train, n_test) = (word(16), word(20));
    let body = (n_train + n_test) * (COMPRESSED_LEN * 2 + 1);
    if bytes.len() != HEADER + body + 32 {
        return Err(truncated(HEADER + body + 32));
    }
    let (payload, digest) = bytes.split_at(HEADER + body);
    if Sha256::digest(payload).as_slice() != digest {
        return Err(FileError::Checksum { path: path.display().to_string() });
    }
    let mut pos = HEADER;
    let mut take = |n: usize| -> CompressedSet {
        let sums: Vec<u16> = bytes[pos..pos + n * COMPRESSED_LEN * 2]
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .collect();
        pos += n * COMPRESSED_LEN * 2;
        let labels = bytes[pos..pos + n].to_vec();
        pos += n;
        CompressedSet { sums, labels }
    };
    let train = take(n_train);
    let test = take(n_test);
    // a matching digest only proves the writer agreed with itself
    let max_sum = (255 * 6) as u16;
    for set in [&train, &test] {
        if set.sums.iter().any(|&s| s > max_sum) || set.labels.iter().any(|&l| l >= 10) {
            return Err(FileError::format(path, HEADER as u64, "block sum or label out of range"));
        }
    }
    Ok(Mnist { train, test })
}
