//! One seed's worth of features and the per-point protocol: search `(A, th)`
//! on a fit/validation split of the training set, retrain on the whole
//! training set, score the test set once.

use std::borrow::Cow;

use rayon::prelude::*;
use rfelm_core::data::SplitIndices;
use rfelm_core::energy::{estimate, EnergyParams, EnergyReport};
use rfelm_core::expansion::{expand_batch, ExpansionPlan};
use rfelm_core::hw_model::{calibrate_full_scale, sample_core, MismatchSpec, QuantSpec, RfeCore, FULL_SCALE_PERCENTILE};
use rfelm_core::nonlinearity::{ActivationKind, ActivationSpec};
use rfelm_core::trainer::{
    a_grid, evaluate, evaluate_float, grid_search, th_anchor, th_grid, train, Evaluation, FeatureSource,
    GridSearchConfig, GridSearchOutcome, TargetEncoding, TrainParams, TrainedModel,
};
use rfelm_core::{Error, FeatureMatrix, Fit, Labeled, Test, Train, Validation, MNIST_CLASSES};

use crate::mnist::CompressedSet;

/// Rows handed to one worker when expanding features.
const WORK_ROWS: usize = 1024;

/// DAC codes of a dataset, padded to the core width.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub codes: Vec<u32>,
    pub labels: Vec<u8>,
    pub width: usize,
}

impl Inputs {
    pub fn new(set: &CompressedSet, quant: &QuantSpec, width: usize) -> rfelm_core::Result<Self> {
        Ok(Self { codes: set.dac_inputs(quant, width)?, labels: set.labels.clone(), width })
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }
}

/// Raw outputs of the unrotated conversion over `inputs`, mapped so that
/// the 99.9th percentile lands on the top `h` code.
pub fn calibrate(core: &RfeCore, inputs: &Inputs) -> rfelm_core::Result<f64> {
    let n = core.n_phys();
    let d = core.d_phys();
    let raw: Vec<f64> = inputs
        .codes
        .par_chunks(WORK_ROWS * d)
        .map(|chunk| {
            let rows = chunk.len() / d;
            let x: Vec<f64> = chunk.iter().map(|&v| v as f64).collect();
            let mut out = vec![0.0; rows * n];
            core.project_batch(&x, rows, &mut out).map(|_| out)
        })
        .collect::<rfelm_core::Result<Vec<_>>>()?
        .concat();
    let mut raw = raw;
    calibrate_full_scale(&mut raw, FULL_SCALE_PERCENTILE)
}

/// [`expand_batch`] spread over the rayon pool; row order is preserved.
pub fn expand_parallel(core: &RfeCore, inputs: &Inputs, plan: &ExpansionPlan, full_scale: f64) -> rfelm_core::Result<FeatureMatrix<i32>> {
    let d = core.d_phys();
    let parts = inputs
        .codes
        .par_chunks(WORK_ROWS * d)
        .map(|chunk| expand_batch(core, chunk, chunk.len() / d, plan, full_scale))
        .collect::<rfelm_core::Result<Vec<_>>>()?;
    FeatureMatrix::new(inputs.rows(), plan.l_effective(), parts.concat())
}

/// Features of one sampled core, at the largest expansion of the sweep.
pub struct SeedFeatures {
    pub mismatch: MismatchSpec,
    pub quant: QuantSpec,
    pub plan: ExpansionPlan,
    pub full_scale: f64,
    pub train: Labeled<Train>,
    pub test: Labeled<Test>,
}

pub fn seed_features(
    mismatch: MismatchSpec,
    quant: QuantSpec,
    plan: ExpansionPlan,
    train_inputs: &Inputs,
    test_inputs: &Inputs,
) -> rfelm_core::Result<SeedFeatures> {
    let core = sample_core(&mismatch, plan.d_phys(), plan.n_phys(), quant)?;
    let full_scale = calibrate(&core, train_inputs)?;
    let train = Labeled::new(expand_parallel(&core, train_inputs, &plan, full_scale)?, train_inputs.labels.clone())?;
    let test = Labeled::new(expand_parallel(&core, test_inputs, &plan, full_scale)?, test_inputs.labels.clone())?;
    Ok(SeedFeatures { mismatch, quant, plan, full_scale, train, test })
}

/// Settings of one sweep point that are not data.
#[derive(Debug, Clone)]
pub struct PointSettings {
    pub features: usize,
    pub kind: ActivationKind,
    pub bits_beta: u32,
    pub theta: f64,
    pub encoding: TargetEncoding,
    pub a_exponents: Vec<i32>,
    pub th_exponents: Vec<i32>,
    pub float_reference: bool,
}

pub struct PointOutcome {
    pub model: TrainedModel,
    pub search: GridSearchOutcome,
    pub test: Evaluation,
    pub float_test_error: Option<f64>,
    pub energy: EnergyReport,
}

fn prefix<P: rfelm_core::Partition>(data: &Labeled<P>, cols: usize) -> rfelm_core::Result<Cow<'_, Labeled<P>>> {
    if cols == data.features().cols() {
        Ok(Cow::Borrowed(data))
    } else {
        Ok(Cow::Owned(data.with_feature_prefix(cols)?))
    }
}

pub fn run_point(seed: &SeedFeatures, split: &SplitIndices, s: &PointSettings) -> rfelm_core::Result<PointOutcome> {
    let per = seed.plan.per_conversion();
    let plan = seed.plan.truncated(s.features / per)?;
    let train_set = prefix(&seed.train, plan.l_effective())?;
    let test_set = prefix(&seed.test, plan.l_effective())?;

    let fit: Labeled<Fit> = train_set.subset(&split.fit);
    let val: Labeled<Validation> = train_set.subset(&split.validation);
    let cfg = GridSearchConfig {
        kind: s.kind,
        bits_activation: seed.quant.bits_activation,
        a_grid: a_grid(&s.a_exponents),
        th_grid: th_grid(th_anchor(fit.features())?, &s.th_exponents),
        theta: s.theta,
        bits_beta: s.bits_beta,
        encoding: s.encoding,
        classes: MNIST_CLASSES,
    };
    let search = grid_search(&fit, &val, &cfg)?;
    drop((fit, val));
    if search.best.m_count == 0 {
        return Err(Error::AllMuted { total: plan.l_effective() });
    }
    log::debug!("best A={} th={} val acc={:.4}", search.best.a_reg, search.best.th, search.best.accuracy());

    let params = TrainParams {
        activation: ActivationSpec::new(s.kind, search.best.th, seed.quant.bits_activation)?,
        a_reg: search.best.a_reg,
        theta: s.theta,
        bits_beta: s.bits_beta,
        encoding: s.encoding,
        classes: MNIST_CLASSES,
    };
    let source = FeatureSource { mismatch: seed.mismatch, quant: seed.quant, plan, full_scale: seed.full_scale };
    let fitted = train(&train_set, &params, source)?;
    let test = evaluate(&fitted.model, &test_set)?;
    let float_test_error = if s.float_reference {
        Some(evaluate_float(&fitted.beta_float, &fitted.model.activation, &fitted.model.mask, &test_set)?)
    } else {
        None
    };
    let energy = estimate(&plan, fitted.model.mask.m_count(), MNIST_CLASSES, &EnergyParams::default(), plan.centering());
    Ok(PointOutcome { model: fitted.model, search, test, float_test_error, energy })
}
