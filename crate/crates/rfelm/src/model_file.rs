//! Binary model files.
//!
//! ```text
//! magic      8 bytes  "RFELMMDL"
//! version    u32 LE
//! header_len u32 LE
//! header     header_len bytes of UTF-8 `key=value` lines
//! mask       ceil(L / 8) bytes, neuron j is bit j % 8 of byte j / 8
//! beta       ceil(M * C * b / 8) bytes of b-bit sign-magnitude codes,
//!            row-major M x C, packed LSB first
//! ```
//!
//! Reals in the header are shortest round-trip decimals, so export followed
//! by import gives back an identical model.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rfelm_core::cognizance::CognizanceMask;
use rfelm_core::expansion::ExpansionPlan;
use rfelm_core::hw_model::{CenteringMode, MismatchSpec, QuantSpec};
use rfelm_core::nonlinearity::{ActivationKind, ActivationSpec};
use rfelm_core::trainer::{FeatureSource, QuantizedBeta, TargetEncoding, TrainedModel};

use crate::error::{FileError, FileResult};

pub const MODEL_MAGIC: &[u8; 8] = b"RFELMMDL";
pub const MODEL_VERSION: u32 = 1;
const FIXED_BYTES: usize = 16;

fn header_lines(m: &TrainedModel) -> Vec<(&'static str, String)> {
    let s = &m.source;
    vec![
        ("l", m.mask.len().to_string()),
        ("m", m.beta.rows().to_string()),
        ("classes", m.beta.cols().to_string()),
        ("bits_beta", m.beta.bits().to_string()),
        ("scale", m.beta.scale().to_string()),
        ("a_reg", m.a_reg.to_string()),
        ("activation", m.activation.kind.name().to_string()),
        ("th", m.activation.th.to_string()),
        ("bits_activation", m.activation.bits_activation.to_string()),
        ("theta", m.mask.theta().to_string()),
        ("encoding", m.encoding.name().to_string()),
        ("core_seed", s.mismatch.seed.to_string()),
        ("sigma_w", s.mismatch.sigma_w.to_string()),
        ("sigma_cco", s.mismatch.sigma_cco.to_string()),
        ("d_phys", s.plan.d_phys().to_string()),
        ("n_phys", s.plan.n_phys().to_string()),
        ("factor_e", s.plan.factor_e().to_string()),
        ("centering", s.plan.centering().to_string()),
        ("full_scale", s.full_scale.to_string()),
        ("bits_input", s.quant.bits_input.to_string()),
        ("bits_h", s.quant.bits_h.to_string()),
        ("q_bits_activation", s.quant.bits_activation.to_string()),
        ("saturating", s.quant.saturating.to_string()),
    ]
}

fn header_text(m: &TrainedModel) -> String {
    header_lines(m).into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// Exact size of the file [`export_model`] writes.
pub fn model_file_size(header_len: usize, l: usize, m: usize, classes: usize, bits: u32) -> usize {
    FIXED_BYTES + header_len + l.div_ceil(8) + (m * classes * bits as usize).div_ceil(8)
}

pub fn header_len(m: &TrainedModel) -> usize {
    header_text(m).len()
}

fn pack_sign_magnitude(values: &[i32], bits: u32) -> Vec<u8> {
    let mut out = vec![0u8; (values.len() * bits as usize).div_ceil(8)];
    let sign = 1u64 << (bits - 1);
    for (k, &v) in values.iter().enumerate() {
        let code = if v < 0 { sign | v.unsigned_abs() as u64 } else { v as u64 };
        let start = k * bits as usize;
        for b in 0..bits as usize {
            if code >> b & 1 == 1 {
                out[(start + b) / 8] |= 1 << ((start + b) % 8);
            }
        }
    }
    out
}

fn unpack_sign_magnitude(bytes: &[u8], count: usize, bits: u32) -> Vec<i32> {
    let sign = 1u64 << (bits - 1);
    (0..count)
        .map(|k| {
            let start = k * bits as usize;
            let code = (0..bits as usize).fold(0u64, |c, b| c | ((bytes[(start + b) / 8] >> ((start + b) % 8) & 1) as u64) << b);
            let magnitude = (code & (sign - 1)) as i32;
            if code & sign != 0 {
                -magnitude
            } else {
                magnitude
            }
        })
        .collect()
}

pub fn encode_model(m: &TrainedModel) -> Vec<u8> {
    let header = header_text(m);
    let mut out = Vec::with_capacity(model_file_size(header.len(), m.mask.len(), m.beta.rows(), m.beta.cols(), m.beta.bits()));
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&m.mask.to_packed());
    out.extend_from_slice(&pack_sign_magnitude(m.beta.values(), m.beta.bits()));
    out
}

pub fn export_model(m: &TrainedModel, path: &Path) -> FileResult<()> {
    fs::write(path, encode_model(m)).map_err(|e| FileError::io(path, e))
}

pub fn import_model(path: &Path) -> FileResult<TrainedModel> {
    let bytes = fs::read(path).map_err(|e| FileError::io(path, e))?;
    decode_model(&bytes, path)
}

struct Header<'a> {
    fields: BTreeMap<&'a str, &'a str>,
    path: &'a Path,
}

impl Header<'_> {
    fn get<T: std::str::FromStr>(&self, key: &str) -> FileResult<T> {
        let raw = self.fields.get(key).ok_or_else(|| FileError::format(self.path, 16, format!("header lacks {key}")))?;
        raw.parse().map_err(|_| FileError::format(self.path, 16, format!("bad value {raw:?} for {key}")))
    }
}

pub fn decode_model(bytes: &[u8], path: &Path) -> FileResult<TrainedModel> {
    let truncated = |expected: usize| FileError::Truncated {
        path: path.display().to_string(),
        expected: expected as u64,
        actual: bytes.len() as u64,
    };
    if bytes.len() < FIXED_BYTES {
        return Err(truncated(FIXED_BYTES));
    }
    if &bytes[..8] != MODEL_MAGIC {
        return Err(FileError::format(path, 0, "not an rfelm model file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(FileError::Version { path: path.display().to_string(), found: version, supported: MODEL_VERSION });
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if bytes.len() < FIXED_BYTES + hlen {
        return Err(truncated(FIXED_BYTES + hlen));
    }
    let text = std::str::from_utf8(&bytes[FIXED_BYTES..FIXED_BYTES + hlen])
        .map_err(|e| FileError::format(path, (FIXED_BYTES + e.valid_up_to()) as u64, "header is not UTF-8"))?;
    let mut fields = BTreeMap::new();
    let mut offset = FIXED_BYTES;
    for line in text.lines() {
        let (k, v) = line.split_once('=').ok_or_else(|| FileError::format(path, offset as u64, format!("malformed header line {line:?}")))?;
        fields.insert(k, v);
        offset += line.len() + 1;
    }
    let h = Header { fields, path };

    let l: usize = h.get("l")?;
    let m: usize = h.get("m")?;
    let classes: usize = h.get("classes")?;
    let bits: u32 = h.get("bits_beta")?;
    if !(2..=31).contains(&bits) {
        return Err(FileError::format(path, 16, format!("bits_beta {bits} out of range")));
    }
    let mask_len = l.div_ceil(8);
    let beta_len = (m * classes * bits as usize).div_ceil(8);
    let expected = model_file_size(hlen, l, m, classes, bits);
    if bytes.len() != expected {
        return Err(truncated(expected));
    }
    let body = &bytes[FIXED_BYTES + hlen..];
    let core_err = |e| FileError::core(path, e);

    let theta: f64 = h.get("theta")?;
    let mask = CognizanceMask::from_packed(&body[..mask_len], l, theta).map_err(core_err)?;
    if mask.m_count() != m {
        return Err(FileError::format(path, (FIXED_BYTES + hlen) as u64, format!("mask keeps {} neurons, header says {m}", mask.m_count())));
    }
    let values = unpack_sign_magnitude(&body[mask_len..mask_len + beta_len], m * classes, bits);
    let beta = QuantizedBeta::from_parts(m, classes, values, h.get("scale")?, bits).map_err(core_err)?;

    let kind_name: String = h.get("activation")?;
    let kind = ActivationKind::parse(&kind_name).ok_or_else(|| FileError::format(path, 16, format!("unknown activation {kind_name}")))?;
    let activation = ActivationSpec::new(kind, h.get("th")?, h.get("bits_activation")?).map_err(core_err)?;
    let enc_name: String = h.get("encoding")?;
    let encoding = TargetEncoding::parse(&enc_name).ok_or_else(|| FileError::format(path, 16, format!("unknown encoding {enc_name}")))?;
    let centering: CenteringMode = h.get::<String>("centering")?.parse().map_err(core_err)?;
    let plan = ExpansionPlan::new(h.get("d_phys")?, h.get("n_phys")?, h.get("factor_e")?, centering).map_err(core_err)?;
    if plan.l_effective() != l {
        return Err(FileError::format(path, 16, format!("plan yields {} features, mask covers {l}", plan.l_effective())));
    }
    let source = FeatureSource {
        mismatch: MismatchSpec { sigma_w: h.get("sigma_w")?, sigma_cco: h.get("sigma_cco")?, seed: h.get("core_seed")? },
        quant: QuantSpec {
            bits_input: h.get("bits_input")?,
            bits_h: h.get("bits_h")?,
            bits_activation: h.get("q_bits_activation")?,
            saturating: h.get("saturating")?,
        },
        plan,
        full_scale: h.get("full_scale")?,
    };
    Ok(TrainedModel { beta, a_reg: h.get("a_reg")?, activation, mask, encoding, source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_magnitude_codes() {
        let packed = pack_sign_magnitude(&[31, -31, 0, -1], 6);
        // 011111 111111 000000 100001, LSB first
        assert_eq!(packed, vec![0b1101_1111, 0b0000_1111, 0b1000_0100]);
        assert_eq!(unpack_sign_magnitude(&packed, 4, 6), vec![31, -31, 0, -1]);
    }
}
