//! IDX container files as distributed with MNIST: big-endian header, magic
//! `0x0000_08TT_NN` (type `0x08` = unsigned byte, `NN` dimensions), then the
//! raw data. Gzip-compressed files are detected by their own magic bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rfelm_core::data::{ImageSample, IMAGE_COLS, IMAGE_PIXELS, IMAGE_ROWS};

use crate::error::{FileError, FileResult};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Reads a file, transparently gunzipping it.
pub fn read_maybe_gz(path: &Path) -> FileResult<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| FileError::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out).map_err(|e| FileError::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Writes `bytes`, gzipped when the path ends in `.gz`.
pub fn write_maybe_gz(path: &Path, bytes: &[u8]) -> FileResult<()> {
    let data = if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(bytes).map_err(|e| FileError::io(path, e))?;
        enc.finish().map_err(|e| FileError::io(path, e))?
    } else {
        bytes.to_vec()
    };
    fs::write(path, data).map_err(|e| FileError::io(path, e))
}

/// Dimensions and payload of an IDX byte array.
pub fn parse_idx<'a>(bytes: &'a [u8], magic: u32, path: &Path) -> FileResult<(Vec<usize>, &'a [u8])> {
    let word = |offset: usize| -> FileResult<u32> {
        bytes
            .get(offset..offset + 4)
            .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
            .ok_or(FileError::Truncated {
                path: path.display().to_string(),
                expected: offset as u64 + 4,
                actual: bytes.len() as u64,
            })
    };
    let found = word(0)?;
    if found != magic {
        return Err(FileError::format(path, 0, format!("magic 0x{found:08x}, expected 0x{magic:08x}")));
    }
    let ndims = (magic & 0xff) as usize;
    let dims: Vec<usize> = (0..ndims).map(|k| word(4 + 4 * k).map(|d| d as usize)).collect::<FileResult<_>>()?;
    let header = 4 + 4 * ndims;
    let len: usize = dims.iter().product();
    if bytes.len() < header + len {
        return Err(FileError::Truncated {
            path: path.display().to_string(),
            expected: (header + len) as u64,
            actual: bytes.len() as u64,
        });
    }
    if bytes.len() > header + len {
        return Err(FileError::format(
            path,
            (header + len) as u64,
            format!("{} trailing bytes after the declared data", bytes.len() - header - len),
        ));
    }
    Ok((dims, &bytes[header..]))
}

/// Raw pixel bytes (row-major 28x28 per image) of an images file.
pub fn read_images(path: &Path) -> FileResult<Vec<u8>> {
    let bytes = read_maybe_gz(path)?;
    let (dims, data) = parse_idx(&bytes, IMAGES_MAGIC, path)?;
    if dims[1] != IMAGE_ROWS || dims[2] != IMAGE_COLS {
        return Err(FileError::format(path, 8, format!("images are {}x{}, expected 28x28", dims[1], dims[2])));
    }
    Ok(data.to_vec())
}

pub fn read_labels(path: &Path) -> FileResult<Vec<u8>> {
    let bytes = read_maybe_gz(path)?;
    let (_, data) = parse_idx(&bytes, LABELS_MAGIC, path)?;
    if let Some(pos) = data.iter().position(|&l| l >= 10) {
        return Err(FileError::format(path, 8 + pos as u64, format!("label {} is not a digit", data[pos])));
    }
    Ok(data.to_vec())
}

/// Paired images and labels as samples.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> FileResult<Vec<ImageSample>> {
    let pixels = read_images(images_path)?;
    let labels = read_labels(labels_path)?;
    let count = pixels.len() / IMAGE_PIXELS;
    if count != labels.len() {
        return Err(FileError::format(
            labels_path,
            4,
            format!("{} labels for {count} images in {}", labels.len(), images_path.display()),
        ));
    }
    pixels
        .chunks_exact(IMAGE_PIXELS)
        .zip(labels)
        .map(|(p, l)| ImageSample::new(p, l).map_err(|e| FileError::core(labels_path, e)))
        .collect()
}

pub fn encode_images(samples: &[ImageSample]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + samples.len() * IMAGE_PIXELS);
    for w in [IMAGES_MAGIC, samples.len() as u32, IMAGE_ROWS as u32, IMAGE_COLS as u32] {
        out.extend_from_slice(&w.to_be_bytes());
    }
    for s in samples {
        out.extend_from_slice(&s.pixels);
    }
    out
}

pub fn encode_labels(samples: &[ImageSample]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + samples.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(samples.len() as u32).to_be_bytes());
    out.extend(samples.iter().map(|s| s.label));
    out
}

/// Writes an images/labels pair (gzipped for `.gz` paths).
pub fn save_idx(samples: &[ImageSample], images_path: &Path, labels_path: &Path) -> FileResult<()> {
    write_maybe_gz(images_path, &encode_images(samples))?;
    write_maybe_gz(labels_path, &encode_labels(samples))
}
