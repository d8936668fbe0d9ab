//! Experiment configuration (TOML).
//!
//! ```toml
//! name = "table1"
//! data_dir = "data/mnist"
//! out_dir = "runs/table1"
//! seeds = [1, 2, 3]            # one sampled core and one split per seed
//! features = [128, 640, 1280]  # L: centered features after expansion
//! activations = ["rlsu", "tristate"]
//! bits_beta = [6]
//! theta = [99.5]               # cognizance threshold, percent
//! encoding = "zero_one"        # or "plus_minus_one"
//! save_models = true
//! float_reference = true       # also score the unquantized weights
//! # train_limit / test_limit truncate the sets (smoke runs)
//!
//! [core]
//! sigma_w = 0.6
//! sigma_cco = [0.0]
//! d_phys = 128
//! n_phys = 128
//! bits_input = 8
//! bits_h = 12
//! bits_activation = 8
//! saturating = true
//! centering = "pairwise"       # none | pairwise | reference:<column>
//!
//! [split]
//! fit = 10000
//! validation = 20000
//!
//! [grid]
//! a_exponents = [-5, ..., 15]            # A = 2^k
//! rlsu_th_exponents = [-2, ..., 5]       # th = s * 2^k
//! tristate_th_exponents = [-5, ..., 2]
//! ```

use std::path::{Path, PathBuf};

use rfelm_core::data::COMPRESSED_LEN;
use rfelm_core::hw_model::{CenteringMode, MismatchSpec, QuantSpec};
use rfelm_core::nonlinearity::ActivationKind;
use rfelm_core::trainer::{default_th_exponents, TargetEncoding};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreConfig {
    pub sigma_w: f64,
    pub sigma_cco: Vec<f64>,
    pub d_phys: usize,
    pub n_phys: usize,
    pub bits_input: u32,
    pub bits_h: u32,
    pub bits_activation: u32,
    pub saturating: bool,
    pub centering: String,
}

impl Default for CoreConfig {
    fn default() -> Self {
        let q = QuantSpec::default();
        Self {
            sigma_w: 0.6,
            sigma_cco: vec![0.0],
            d_phys: rfelm_core::hw_model::D_PHYS,
            n_phys: rfelm_core::hw_model::N_PHYS,
            bits_input: q.bits_input,
            bits_h: q.bits_h,
            bits_activation: q.bits_activation,
            saturating: q.saturating,
            centering: CenteringMode::PairwiseDifference.to_string(),
        }
    }
}

impl CoreConfig {
    pub fn quant(&self) -> QuantSpec {
        QuantSpec {
            bits_input: self.bits_input,
            bits_h: self.bits_h,
            bits_activation: self.bits_activation,
            saturating: self.saturating,
        }
    }

    pub fn mismatch(&self, seed: u64, sigma_cco: f64) -> MismatchSpec {
        MismatchSpec { sigma_w: self.sigma_w, sigma_cco, seed }
    }

    pub fn centering(&self) -> Result<CenteringMode, ConfigError> {
        self.centering.parse().map_err(|e: rfelm_core::Error| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub fit: usize,
    pub validation: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { fit: 10_000, validation: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub a_exponents: Vec<i32>,
    pub rlsu_th_exponents: Vec<i32>,
    pub tristate_th_exponents: Vec<i32>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            a_exponents: (-5..=15).collect(),
            rlsu_th_exponents: default_th_exponents(ActivationKind::Rlsu),
            tristate_th_exponents: default_th_exponents(ActivationKind::Tristate),
        }
    }
}

impl GridConfig {
    pub fn th_exponents(&self, kind: ActivationKind) -> &[i32] {
        match kind {
            ActivationKind::Rlsu => &self.rlsu_th_exponents,
            ActivationKind::Tristate => &self.tristate_th_exponents,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub features: Vec<usize>,
    pub activations: Vec<String>,
    pub bits_beta: Vec<u32>,
    pub theta: Vec<f64>,
    #[serde(default = "default_encoding")]
    pub encoding: String,
    #[serde(default = "yes")]
    pub save_models: bool,
    #[serde(default = "yes")]
    pub float_reference: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_limit: Option<usize>,
    #[serde(default)]
    pub core: CoreConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub grid: GridConfig,
}

fn default_encoding() -> String {
    TargetEncoding::ZeroOne.name().to_string()
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    /// The simulated-performance grid: three cores, L in {128, 640, 1280},
    /// both activations, 6-bit output weights.
    pub fn table1() -> Self {
        Self {
            name: "table1".into(),
            data_dir: PathBuf::from("data/mnist"),
            out_dir: PathBuf::from("runs/table1"),
            seeds: vec![1, 2, 3],
            features: vec![128, 640, 1280],
            activations: vec!["rlsu".into(), "tristate".into()],
            bits_beta: vec![6],
            theta: vec![99.5],
            encoding: default_encoding(),
            save_models: true,
            float_reference: true,
            train_limit: None,
            test_limit: None,
            core: CoreConfig::default(),
            split: SplitConfig::default(),
            grid: GridConfig::default(),
        }
    }

    /// One small point end to end, for checking an installation.
    pub fn smoke() -> Self {
        Self {
            name: "smoke".into(),
            out_dir: PathBuf::from("runs/smoke"),
            seeds: vec![1],
            features: vec![128],
            activations: vec!["rlsu".into()],
            train_limit: Some(1000),
            test_limit: Some(1000),
            split: SplitConfig { fit: 300, validation: 600 },
            ..Self::table1()
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.display().to_string(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn activation_kinds(&self) -> Result<Vec<ActivationKind>, ConfigError> {
        self.activations
            .iter()
            .map(|a| ActivationKind::parse(a).ok_or_else(|| ConfigError::Invalid(format!("unknown activation {a:?}"))))
            .collect()
    }

    pub fn target_encoding(&self) -> Result<TargetEncoding, ConfigError> {
        TargetEncoding::parse(&self.encoding).ok_or_else(|| ConfigError::Invalid(format!("unknown encoding {:?}", self.encoding)))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        for (name, empty) in [
            ("seeds", self.seeds.is_empty()),
            ("features", self.features.is_empty()),
            ("activations", self.activations.is_empty()),
            ("bits_beta", self.bits_beta.is_empty()),
            ("theta", self.theta.is_empty()),
            ("core.sigma_cco", self.core.sigma_cco.is_empty()),
            ("grid.a_exponents", self.grid.a_exponents.is_empty()),
            ("grid.rlsu_th_exponents", self.grid.rlsu_th_exponents.is_empty()),
            ("grid.tristate_th_exponents", self.grid.tristate_th_exponents.is_empty()),
        ] {
            if empty {
                return bad(format!("{name} must not be empty"));
            }
        }
        self.activation_kinds()?;
        self.target_encoding()?;
        let centering = self.core.centering()?;
        self.core.quant().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        centering.validate(self.core.n_phys).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.core.d_phys < COMPRESSED_LEN || self.core.n_phys == 0 {
            return bad(format!("core must have at least {COMPRESSED_LEN} inputs and one output"));
        }
        for &s in &self.core.sigma_cco {
            self.core.mismatch(0, s).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        let per = centering.outputs_per_conversion(self.core.n_phys);
        for &l in &self.features {
            if l == 0 || l % per != 0 {
                return bad(format!("feature count {l} is not a positive multiple of the {per} features per conversion"));
            }
            if l / per > self.core.d_phys {
                return bad(format!("feature count {l} needs more than the {} distinct rotations", self.core.d_phys));
            }
        }
        for &b in &self.bits_beta {
            if !(2..=31).contains(&b) {
                return bad(format!("bits_beta {b} not in [2, 31]"));
            }
        }
        for &t in &self.theta {
            if !(t > 50.0 && t <= 100.0) {
                return bad(format!("theta {t} outside (50, 100]"));
            }
        }
        if self.split.fit == 0 || self.split.validation == 0 {
            return bad("split sizes must be positive".into());
        }
        if let Some(n) = self.train_limit {
            if n < self.split.fit + self.split.validation {
                return bad(format!("train_limit {n} is smaller than the fit + validation split"));
            }
        }
        if self.test_limit == Some(0) {
            return bad("test_limit must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for cfg in [ExperimentConfig::table1(), ExperimentConfig::smoke()] {
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_toml(&cfg.to_toml(), Path::new("x.toml")).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = ExperimentConfig::smoke();
        cfg.features = vec![100];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::smoke();
        cfg.activations = vec!["relu".into()];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::smoke();
        cfg.train_limit = Some(500);
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_toml("name = 3", Path::new("x.toml")).is_err());
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let text = r#"
            name = "mini"
            data_dir = "d"
            out_dir = "o"
            seeds = [4]
            features = [256]
            activations = ["tristate"]
            bits_beta = [4]
            theta = [99.0]
        "#;
        let cfg = ExperimentConfig::from_toml(text, Path::new("mini.toml")).unwrap();
        assert_eq!(cfg.core, CoreConfig::default());
        assert_eq!(cfg.split.fit, 10_000);
        assert!(cfg.save_models);
    }
}
