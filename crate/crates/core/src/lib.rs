//! Behavioral model of an analog random-feature-extractor (RFE) core and the
//! two-stage Extreme Learning Machine that runs on top of it.
//!
//! The crate is `no_std` + `alloc` when the default `std` feature is turned
//! off. Everything here is pure computation; file formats, dataset loading
//! and experiment orchestration live in the `rfelm` companion crate.
//!
//! Pipeline for one image:
//!
//! 1. [`data::downsample_2x3`] shrinks a 28x28 MNIST digit to 126 values.
//! 2. [`hw_model::quantize_input`] models the input DAC.
//! 3. [`expansion::expand_features`] reruns the core once per input rotation,
//!    quantizes each conversion and zero-centers it.
//! 4. [`nonlinearity::ActivationSpec::activate_features`] applies RLSU or
//!    tristate.
//! 5. [`cognizance`] drops neurons stuck at a saturation value.
//! 6. [`trainer`] fits, quantizes and evaluates the output weights.
//! 7. [`energy::estimate`] prices one classification.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod cognizance;
pub mod data;
pub mod dataset;
pub mod energy;
mod error;
pub mod expansion;
pub mod hw_model;
pub mod linalg;
pub mod nonlinearity;
pub mod rng;
pub mod stats;
pub mod trainer;

pub use cognizance::{apply_mask, compute_mask, CognizanceMask, CognizanceScorer};
pub use dataset::{Activated, Fit, FeatureMatrix, Labeled, Partition, Test, Train, TrainingSide, Validation};
pub use energy::{estimate, EnergyParams, EnergyReport, Femtojoules};
pub use error::{Error, Result};
pub use expansion::{count_weight_vectors, expand_features, rotate_input, ExpansionPlan};
pub use hw_model::{
    project, quantize_h, quantize_input, sample_core, zero_center, CenteringMode, MismatchSpec,
    QuantSpec, RfeCore,
};
pub use nonlinearity::{rlsu, tristate, ActivationKind, ActivationSpec};
pub use trainer::{
    grid_search, predict, quantize_beta, ridge_solve, GridSearchConfig, OpCounter, QuantizedBeta,
    TargetEncoding, TrainedModel,
};

/// Number of output classes for MNIST.
pub const MNIST_CLASSES: usize = 10;
