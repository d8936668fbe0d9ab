//! Versioned TOML description of a sampled core. The mismatch parameters
//! and seed are enough to resample it; the explicit weights are optional and
//! written with shortest round-trip decimals, so reloading is bit-exact.

use std::fs;
use std::path::Path;

use rfelm_core::hw_model::{sample_core, MismatchSpec, QuantSpec, RfeCore};
use serde::{Deserialize, Serialize};

use crate::error::{FileError, FileResult};

pub const CORE_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreFile {
    pub format_version: u32,
    /// Decimal string: TOML integers stop at 2^63 - 1.
    pub seed: String,
    pub sigma_w: f64,
    pub sigma_cco: f64,
    pub d_phys: usize,
    pub n_phys: usize,
    pub bits_input: u32,
    pub bits_h: u32,
    pub bits_activation: u32,
    pub saturating: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cco_gains: Option<Vec<f64>>,
    /// One row per input channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<f64>>>,
}

impl CoreFile {
    pub fn describe(spec: &MismatchSpec, core: &RfeCore, include_weights: bool) -> Self {
        let q = core.quant();
        Self {
            format_version: CORE_FILE_VERSION,
            seed: spec.seed.to_string(),
            sigma_w: spec.sigma_w,
            sigma_cco: spec.sigma_cco,
            d_phys: core.d_phys(),
            n_phys: core.n_phys(),
            bits_input: q.bits_input,
            bits_h: q.bits_h,
            bits_activation: q.bits_activation,
            saturating: q.saturating,
            cco_gains: include_weights.then(|| core.cco_gains().to_vec()),
            weights: include_weights.then(|| core.weights().chunks(core.n_phys()).map(<[f64]>::to_vec).collect()),
        }
    }

    pub fn mismatch(&self) -> Result<MismatchSpec, String> {
        let seed = self.seed.parse().map_err(|_| format!("seed {:?} is not an unsigned integer", self.seed))?;
        Ok(MismatchSpec { sigma_w: self.sigma_w, sigma_cco: self.sigma_cco, seed })
    }

    pub fn quant(&self) -> QuantSpec {
        QuantSpec {
            bits_input: self.bits_input,
            bits_h: self.bits_h,
            bits_activation: self.bits_activation,
            saturating: self.saturating,
        }
    }

    /// The stored weights, or a fresh sample from the recorded spec.
    pub fn build(&self) -> rfelm_core::Result<RfeCore> {
        let spec = self.mismatch().map_err(rfelm_core::Error::InvalidArgument)?;
        match (&self.weights, &self.cco_gains) {
            (Some(rows), Some(gains)) => {
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                if rows.iter().any(|r| r.len() != self.n_phys) {
                    return Err(rfelm_core::Error::InvalidArgument("weight rows must have n_phys entries".into()));
                }
                RfeCore::from_parts(flat, gains.clone(), self.d_phys, self.n_phys, self.quant())
            }
            (None, None) => sample_core(&spec, self.d_phys, self.n_phys, self.quant()),
            _ => Err(rfelm_core::Error::InvalidArgument("weights and cco_gains must be given together".into())),
        }
    }
}

pub fn save_core(path: &Path, file: &CoreFile) -> FileResult<()> {
    let text = toml::to_string(file).map_err(|e| FileError::format(path, 0, e.to_string()))?;
    fs::write(path, text).map_err(|e| FileError::io(path, e))
}

pub fn load_core(path: &Path) -> FileResult<CoreFile> {
    let text = fs::read_to_string(path).map_err(|e| FileError::io(path, e))?;
    let file: CoreFile = toml::from_str(&text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start as u64);
        FileError::format(path, offset, e.message().to_string())
    })?;
    if file.format_version != CORE_FILE_VERSION {
        return Err(FileError::Version {
            path: path.display().to_string(),
            found: file.format_version,
            supported: CORE_FILE_VERSION,
        });
    }
    Ok(file)
}
