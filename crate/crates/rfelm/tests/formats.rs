use std::fs;
use std::path::Path;

use rfelm::core_file::{load_core, save_core, CoreFile};
use rfelm::idx::{encode_images, encode_labels, load_idx, read_maybe_gz, save_idx};
use rfelm::mnist::{decode_cache, encode_cache, load_mnist, CompressedSet, Mnist, CACHE_FILE};
use rfelm::model_file::{decode_model, encode_model, export_model, header_len, import_model, model_file_size};
use rfelm::FileError;
use rfelm_core::data::{ImageSample, IMAGE_PIXELS};
use rfelm_core::hw_model::{sample_core, CenteringMode, MismatchSpec, QuantSpec};
use rfelm_core::rng::StreamRng;
use rfelm_core::trainer::{train, FeatureSource, TrainParams, TrainedModel};
use rfelm_core::{ActivationKind, ActivationSpec, ExpansionPlan, FeatureMatrix, Labeled, TargetEncoding, Train};

fn samples(n: usize, seed: u64) -> Vec<ImageSample> {
    let mut rng = StreamRng::new(seed, 9);
    (0..n)
        .map(|i| {
            let pixels: Vec<u8> = (0..IMAGE_PIXELS).map(|_| rng.below(256) as u8).collect();
            ImageSample::new(&pixels, (i % 10) as u8).unwrap()
        })
        .collect()
}

#[test]
fn idx_round_trip_plain_and_gzip() {
    let dir = tempfile::tempdir().unwrap();
    let data = samples(7, 1);
    for (img, lab) in [("a-images", "a-labels"), ("b-images.gz", "b-labels.gz")] {
        let (ip, lp) = (dir.path().join(img), dir.path().join(lab));
        save_idx(&data, &ip, &lp).unwrap();
        let loaded = load_idx(&ip, &lp).unwrap();
        assert_eq!(loaded, data);
        // re-serializing reproduces the (decompressed) file bytes
        assert_eq!(encode_images(&loaded), read_maybe_gz(&ip).unwrap());
        assert_eq!(encode_labels(&loaded), read_maybe_gz(&lp).unwrap());
    }
    let raw = fs::read(dir.path().join("b-images.gz")).unwrap();
    assert_eq!(&raw[..2], &[0x1f, 0x8b]);
}

fn write_pair(dir: &Path, images: &[u8], labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
    let (ip, lp) = (dir.join("images"), dir.join("labels"));
    fs::write(&ip, images).unwrap();
    fs::write(&lp, labels).unwrap();
    (ip, lp)
}

#[test]
fn idx_errors_carry_offsets_and_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let data = samples(3, 2);
    let images = encode_images(&data);
    let labels = encode_labels(&data);

    let (ip, lp) = write_pair(dir.path(), &images[..images.len() - 5], &labels);
    match load_idx(&ip, &lp) {
        Err(FileError::Truncated { expected, actual, .. }) => {
            assert_eq!(expected, images.len() as u64);
            assert_eq!(actual, images.len() as u64 - 5);
        }
        other => panic!("expected truncation, got {other:?}"),
    }

    let mut bad = images.clone();
    bad[3] = 0x01;
    let (ip, lp) = write_pair(dir.path(), &bad, &labels);
    assert!(matches!(load_idx(&ip, &lp), Err(FileError::Format { offset: 0, .. })));

    let (ip, lp) = write_pair(dir.path(), &images, &encode_labels(&data[..2]));
    assert!(matches!(load_idx(&ip, &lp), Err(FileError::Format { offset: 4, .. })));

    let mut bad_labels = labels.clone();
    bad_labels[9] = 12;
    let (ip, lp) = write_pair(dir.path(), &images, &bad_labels);
    assert!(matches!(load_idx(&ip, &lp), Err(FileError::Format { offset: 9, .. })));

    let mut trailing = images.clone();
    trailing.push(0);
    let (ip, lp) = write_pair(dir.path(), &trailing, &labels);
    assert!(matches!(load_idx(&ip, &lp), Err(FileError::Format { .. })));
}

fn tiny_mnist() -> Mnist {
    let to_set = |s: &[ImageSample]| {
        let pixels: Vec<u8> = s.iter().flat_map(|x| x.pixels).collect();
        CompressedSet::from_pixels(&pixels, s.iter().map(|x| x.label).collect())
    };
    Mnist { train: to_set(&samples(12, 3)), test: to_set(&samples(5, 4)) }
}

#[test]
fn cache_round_trip_and_integrity() {
    let m = tiny_mnist();
    let path = Path::new("cache.bin");
    let bytes = encode_cache(&m);
    assert_eq!(decode_cache(&bytes, path).unwrap(), m);

    let mut flipped = bytes.clone();
    flipped[30] ^= 1;
    assert!(matches!(decode_cache(&flipped, path), Err(FileError::Checksum { .. })));

    let mut version = bytes.clone();
    version[8] = 9;
    assert!(matches!(decode_cache(&version, path), Err(FileError::Version { found: 9, .. })));

    assert!(matches!(decode_cache(&bytes[..bytes.len() - 1], path), Err(FileError::Truncated { .. })));
}

#[test]
fn dataset_directory_is_compressed_once_and_cached() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = (samples(12, 5), samples(4, 6));
    save_idx(&train, &dir.path().join("train-images-idx3-ubyte.gz"), &dir.path().join("train-labels-idx1-ubyte.gz")).unwrap();
    save_idx(&test, &dir.path().join("t10k-images.idx3-ubyte"), &dir.path().join("t10k-labels.idx1-ubyte")).unwrap();
    let first = load_mnist(dir.path()).unwrap();
    assert!(dir.path().join(CACHE_FILE).is_file());
    assert_eq!(first.train.len(), 12);
    assert_eq!(first.test.labels, test.iter().map(|s| s.label).collect::<Vec<_>>());
    let second = load_mnist(dir.path()).unwrap();
    assert_eq!(first, second);
}

#[test]
fn missing_dataset_explains_how_to_fetch_it() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_mnist(dir.path()).unwrap_err().to_string();
    assert!(err.contains("train-images-idx3-ubyte"), "{err}");
}

#[test]
fn core_file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let spec = MismatchSpec { sigma_w: 0.6, sigma_cco: 0.6, seed: u64::MAX - 3 };
    let core = sample_core(&spec, 128, 128, QuantSpec::default()).unwrap();

    let with = dir.path().join("with.toml");
    save_core(&with, &CoreFile::describe(&spec, &core, true)).unwrap();
    let rebuilt = load_core(&with).unwrap().build().unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(rebuilt.weights()), bits(core.weights()));
    assert_eq!(bits(rebuilt.cco_gains()), bits(core.cco_gains()));

    let without = dir.path().join("without.toml");
    save_core(&without, &CoreFile::describe(&spec, &core, false)).unwrap();
    let file = load_core(&without).unwrap();
    assert_eq!(file.mismatch().unwrap(), spec);
    assert_eq!(bits(file.build().unwrap().weights()), bits(core.weights()));

    let text = fs::read_to_string(&without).unwrap().replace("format_version = 1", "format_version = 2");
    fs::write(&without, text).unwrap();
    assert!(matches!(load_core(&without), Err(FileError::Version { found: 2, supported: 1, .. })));
}

/// A model over 128 pairwise features trained on noise-free class codes.
fn model(kind: ActivationKind) -> TrainedModel {
    let mut rng = StreamRng::new(21, 3);
    let rows = 300;
    let prototypes: Vec<Vec<i32>> = (0..10).map(|_| (0..128).map(|_| rng.below(400) as i32 - 200).collect()).collect();
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for i in 0..rows {
        let c = i % 10;
        labels.push(c as u8);
        feats.extend(prototypes[c].iter().map(|&p| p + rng.below(41) as i32 - 20));
    }
    // one constant column gets muted, so M < L
    for r in 0..rows {
        feats[r * 128 + 5] = -500;
    }
    let data: Labeled<Train> = Labeled::new(FeatureMatrix::new(rows, 128, feats).unwrap(), labels).unwrap();
    let source = FeatureSource {
        mismatch: MismatchSpec::new(7),
        quant: QuantSpec::default(),
        plan: ExpansionPlan::new(128, 128, 2, CenteringMode::PairwiseDifference).unwrap(),
        full_scale: 12345.678,
    };
    let params = TrainParams {
        activation: ActivationSpec::new(kind, 100.0, 8).unwrap(),
        a_reg: 0.125,
        theta: 99.5,
        bits_beta: 6,
        encoding: TargetEncoding::ZeroOne,
        classes: 10,
    };
    train(&data, &params, source).unwrap().model
}

#[test]
fn model_round_trip_and_size_formula() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [ActivationKind::Rlsu, ActivationKind::Tristate] {
        let m = model(kind);
        assert_eq!(m.mask.len(), 128);
        assert!(m.mask.m_count() < 128);
        let path = dir.path().join(format!("{}.rfm", kind.name()));
        export_model(&m, &path).unwrap();
        assert_eq!(import_model(&path).unwrap(), m);

        let size = fs::metadata(&path).unwrap().len() as usize;
        let mcount = m.mask.m_count();
        // 16 fixed bytes, the text header, one mask bit per neuron, six bits per weight
        let analytic = 16 + header_len(&m) + 128 / 8 + (mcount * 10 * 6).div_ceil(8);
        assert_eq!(size, analytic);
        assert_eq!(size, model_file_size(header_len(&m), 128, mcount, 10, 6));
        assert!(mcount * 10 * 6 / 8 + 16 > size / 2, "weights and mask dominate");
    }
}

#[test]
fn corrupt_model_files_are_rejected() {
    let bytes = encode_model(&model(ActivationKind::Tristate));
    let path = Path::new("m.rfm");

    let mut version = bytes.clone();
    version[8] = 2;
    assert!(matches!(decode_model(&version, path), Err(FileError::Version { found: 2, supported: 1, .. })));

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(decode_model(&magic, path), Err(FileError::Format { offset: 0, .. })));

    let text = String::from_utf8_lossy(&bytes[16..16 + 40]).to_string();
    let mut header = bytes.clone();
    let eq = 16 + text.find('=').unwrap();
    header[eq] = b':';
    assert!(matches!(decode_model(&header, path), Err(FileError::Format { .. })));

    assert!(matches!(decode_model(&bytes[..bytes.len() - 1], path), Err(FileError::Truncated { .. })));
}
