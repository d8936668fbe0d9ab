//! Second ELM stage: ridge-regularized least squares for the output weights,
//! sign-magnitude weight quantization, integer inference and the `(A, th)`
//! hyperparameter search.
//!
//! The closed form used is `beta = (I / A + H^T H)^{-1} H^T T`, solved with a
//! Cholesky factorization rather than an explicit inverse.

use alloc::vec;
use alloc::vec::Vec;

use crate::cognizance::{compute_mask, CognizanceMask};
use crate::dataset::{Activated, FeatureMatrix, Fit, Labeled, Partition, TrainingSide, Validation};
use crate::error::{invalid, Error, Result};
use crate::expansion::ExpansionPlan;
use crate::hw_model::{MismatchSpec, QuantSpec};
use crate::linalg::{cholesky_in_place, cholesky_solve, GramAccumulator, Matrix};
use crate::nonlinearity::{ActivationKind, ActivationSpec};
use crate::stats;

/// Rows converted to f64 at a time when forming `H^T H`.
const CHUNK_ROWS: usize = 4096;

/// Class targets for the least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetEncoding {
    /// 1 for the true class, 0 elsewhere.
    #[default]
    ZeroOne,
    /// +1 for the true class, -1 elsewhere.
    PlusMinusOne,
}

impl TargetEncoding {
    pub fn name(&self) -> &'static str {
        match self {
            TargetEncoding::ZeroOne => "zero_one",
            TargetEncoding::PlusMinusOne => "plus_minus_one",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero_one" => Some(TargetEncoding::ZeroOne),
            "plus_minus_one" => Some(TargetEncoding::PlusMinusOne),
            _ => None,
        }
    }

    pub fn baseline(&self) -> f64 {
        match self {
            TargetEncoding::ZeroOne => 0.0,
            TargetEncoding::PlusMinusOne => -1.0,
        }
    }

    pub fn encode(&self, labels: &[u8], classes: usize) -> Result<Matrix> {
        let mut t = Matrix::from_vec(labels.len(), classes, vec![self.baseline(); labels.len() * classes])?;
        for (i, &l) in labels.iter().enumerate() {
            if l as usize >= classes {
                return Err(invalid(alloc::format!("label {l} outside {classes} classes")));
            }
            t.set(i, l as usize, 1.0);
        }
        Ok(t)
    }
}

/// Output weights `beta` (`M x C`) for hidden outputs `H` (`samples x M`).
pub fn ridge_solve(h: &Matrix, t: &Matrix, a_reg: f64) -> Result<Matrix> {
    if h.rows() == 0 {
        return Err(invalid("ridge regression needs at least one sample"));
    }
    if h.rows() != t.rows() {
        return Err(Error::LengthMismatch { expected: h.rows(), actual: t.rows() });
    }
    if !h.is_finite() || !t.is_finite() {
        return Err(invalid("non-finite entries in ridge inputs"));
    }
    let mut acc = GramAccumulator::new(h.cols());
    acc.add_rows(h.data(), h.rows());
    ridge_from_gram(&acc.finish(), &h.t_matmul(t)?, a_reg)
}

/// Ridge solution from precomputed `H^T H` and `H^T T`.
pub fn ridge_from_gram(gram: &Matrix, htt: &Matrix, a_reg: f64) -> Result<Matrix> {
    if !(a_reg > 0.0 && a_reg.is_finite()) {
        return Err(invalid(alloc::format!("regularization factor {a_reg} must be positive")));
    }
    if gram.cols() == 0 {
        return Err(Error::AllMuted { total: 0 });
    }
    let mut system = gram.clone();
    system.add_to_diagonal(1.0 / a_reg);
    cholesky_in_place(&mut system)?;
    let mut beta = htt.clone();
    cholesky_solve(&system, &mut beta)?;
    Ok(beta)
}

/// Sign-magnitude quantized output weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedBeta {
    rows: usize,
    cols: usize,
    values: Vec<i32>,
    scale: f64,
    bits: u32,
}

impl QuantizedBeta {
    pub fn from_parts(rows: usize, cols: usize, values: Vec<i32>, scale: f64, bits: u32) -> Result<Self> {
        if !(2..=31).contains(&bits) {
            return Err(invalid(alloc::format!("bits_beta {bits} not in [2, 31]")));
        }
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, actual: values.len() });
        }
        let limit = magnitude_limit(bits);
        if let Some(v) = values.iter().find(|v| v.abs() > limit) {
            return Err(invalid(alloc::format!("weight {v} exceeds the {bits}-bit range")));
        }
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(invalid("scale must be finite and non-negative"));
        }
        Ok(Self { rows, cols, values, scale, bits })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of classes.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn row(&self, j: usize) -> &[i32] {
        &self.values[j * self.cols..(j + 1) * self.cols]
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn dequantize(&self) -> Matrix {
        Matrix::from_vec(self.rows, self.cols, self.values.iter().map(|&v| v as f64 * self.scale).collect())
            .expect("shape checked at construction")
    }
}

/// `2^(bits - 1) - 1`, e.g. 31 for 6-bit sign-magnitude.
pub fn magnitude_limit(bits: u32) -> i32 {
    ((1i64 << (bits - 1)) - 1) as i32
}

/// `scale = max|beta| / (2^(bits-1) - 1)`, entries `round(beta / scale)`.
pub fn quantize_beta(beta: &Matrix, bits: u32) -> Result<QuantizedBeta> {
    if !(2..=31).contains(&bits) {
        return Err(invalid(alloc::format!("bits_beta {bits} not in [2, 31]")));
    }
    if !beta.is_finite() {
        return Err(invalid("non-finite output weights"));
    }
    let limit = magnitude_limit(bits);
    let max = beta.max_abs();
    if max == 0.0 {
        return QuantizedBeta::from_parts(beta.rows(), beta.cols(), vec![0; beta.data().len()], 0.0, bits);
    }
    let scale = max / limit as f64;
    let values = beta
        .data()
        .iter()
        .map(|&b| (libm::round(b / scale) as i64).clamp(-(limit as i64), limit as i64) as i32)
        .collect();
    QuantizedBeta::from_parts(beta.rows(), beta.cols(), values, scale, bits)
}

/// Arithmetic performed by the integer second stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub additions: u64,
    pub subtractions: u64,
    pub multiplications: u64,
}

impl core::ops::AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.additions += rhs.additions;
        self.subtractions += rhs.subtractions;
        self.multiplications += rhs.multiplications;
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(scores: &[T]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

/// Integer class scores `O_k = sum_j beta_q[j][k] * H[j]` for one sample of
/// `M` cognizant codes. Tristate codes only add or subtract weight rows.
pub fn score_counted(
    h_row: &[i32],
    beta: &QuantizedBeta,
    kind: ActivationKind,
    ops: &mut OpCounter,
) -> Result<Vec<i32>> {
    if h_row.len() != beta.rows {
        return Err(Error::LengthMismatch { expected: beta.rows, actual: h_row.len() });
    }
    let mut acc = vec![0i32; beta.cols];
    for (j, &h) in h_row.iter().enumerate() {
        accumulate(&mut acc, beta.row(j), h, kind, ops)?;
    }
    Ok(acc)
}

#[inline]
fn accumulate(acc: &mut [i32], weights: &[i32], h: i32, kind: ActivationKind, ops: &mut OpCounter) -> Result<()> {
    match kind {
        ActivationKind::Tristate => match h {
            0 => {}
            1 => {
                for (k, (a, &w)) in acc.iter_mut().zip(weights).enumerate() {
                    *a = a.checked_add(w).ok_or(Error::Overflow { class: k })?;
                }
                ops.additions += weights.len() as u64;
            }
            -1 => {
                for (k, (a, &w)) in acc.iter_mut().zip(weights).enumerate() {
                    *a = a.checked_sub(w).ok_or(Error::Overflow { class: k })?;
                }
                ops.subtractions += weights.len() as u64;
            }
            other => return Err(invalid(alloc::format!("tristate code {other}"))),
        },
        ActivationKind::Rlsu => {
            if h == 0 {
                return Ok(());
            }
            for (k, (a, &w)) in acc.iter_mut().zip(weights).enumerate() {
                let p = w.checked_mul(h).ok_or(Error::Overflow { class: k })?;
                *a = a.checked_add(p).ok_or(Error::Overflow { class: k })?;
            }
            ops.multiplications += weights.len() as u64;
            ops.additions += weights.len() as u64;
        }
    }
    Ok(())
}

/// Where a trained model's features come from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSource {
    pub mismatch: MismatchSpec,
    pub quant: QuantSpec,
    pub plan: ExpansionPlan,
    /// Raw level mapped to the top `h` code.
    pub full_scale: f64,
}

/// A deployable second stage: quantized weights plus everything needed to
/// rebuild its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub beta: QuantizedBeta,
    pub a_reg: f64,
    pub activation: ActivationSpec,
    pub mask: CognizanceMask,
    pub encoding: TargetEncoding,
    pub source: FeatureSource,
}

impl TrainedModel {
    pub fn classes(&self) -> usize {
        self.beta.cols()
    }

    pub fn core_seed(&self) -> u64 {
        self.source.mismatch.seed
    }

    /// Class of one sample given its `L` centered features `h`. The mask
    /// decides which weight rows are fetched at all.
    pub fn classify_counted(&self, h: &[i32], ops: &mut OpCounter) -> Result<usize> {
        if h.len() != self.mask.len() {
            return Err(Error::LengthMismatch { expected: self.mask.len(), actual: h.len() });
        }
        let mut acc = vec![0i32; self.classes()];
        let mut row = 0;
        for (&v, &keep) in h.iter().zip(self.mask.bits()) {
            if keep {
                let code = self.activation.activate(v as f64);
                accumulate(&mut acc, self.beta.row(row), code, self.activation.kind, ops)?;
                row += 1;
            }
        }
        Ok(argmax(&acc))
    }

    pub fn classify(&self, h: &[i32]) -> Result<usize> {
        self.classify_counted(h, &mut OpCounter::default())
    }
}

/// Predicted class for a vector of `M` cognizant activation codes.
pub fn predict(h_row: &[i32], model: &TrainedModel) -> Result<usize> {
    predict_counted(h_row, model, &mut OpCounter::default())
}

pub fn predict_counted(h_row: &[i32], model: &TrainedModel, ops: &mut OpCounter) -> Result<usize> {
    Ok(argmax(&score_counted(h_row, &model.beta, model.activation.kind, ops)?))
}

/// Misclassification rate in percent.
pub fn error_percent(predictions: &[usize], labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let wrong = predictions.iter().zip(labels).filter(|(p, l)| **p != **l as usize).count();
    100.0 * wrong as f64 / labels.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub errors: usize,
    pub total: usize,
    pub ops: OpCounter,
}

impl Evaluation {
    pub fn error_percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.errors as f64 / self.total as f64
        }
    }
}

/// Runs the integer second stage over every sample of `data`.
pub fn evaluate<P: Partition>(model: &TrainedModel, data: &Labeled<P>) -> Result<Evaluation> {
    let mut ops = OpCounter::default();
    let mut errors = 0;
    for (h, &label) in data.features().iter_rows().zip(data.labels()) {
        if model.classify_counted(h, &mut ops)? != label as usize {
            errors += 1;
        }
    }
    Ok(Evaluation { errors, total: data.len(), ops })
}

/// Error of the unquantized weights on the same features, for comparison.
pub fn evaluate_float<P: Partition>(
    beta: &Matrix,
    activation: &ActivationSpec,
    mask: &CognizanceMask,
    data: &Labeled<P>,
) -> Result<f64> {
    let columns = mask.indices();
    if beta.rows() != columns.len() {
        return Err(Error::LengthMismatch { expected: columns.len(), actual: beta.rows() });
    }
    let codes = data.activate(activation);
    let scores = scores_f64(codes.codes(), &columns, activation.code_scale(), beta)?;
    let predictions: Vec<usize> = (0..scores.rows()).map(|i| argmax(scores.row(i))).collect();
    Ok(error_percent(&predictions, data.labels()))
}

/// `codes[:, columns] * scale * weights` in f64, chunked.
fn scores_f64(codes: &FeatureMatrix<i32>, columns: &[usize], scale: f64, weights: &Matrix) -> Result<Matrix> {
    let m = columns.len();
    let c = weights.cols();
    let mut out = Vec::with_capacity(codes.rows() * c);
    let mut buf = Vec::new();
    for start in (0..codes.rows()).step_by(CHUNK_ROWS) {
        let rows = CHUNK_ROWS.min(codes.rows() - start);
        fill_chunk(codes, start, rows, columns, scale, &mut buf);
        let chunk = Matrix::from_vec(rows, m, core::mem::take(&mut buf))?;
        out.extend_from_slice(chunk.matmul(weights)?.data());
        buf = chunk_into_vec(chunk);
    }
    Matrix::from_vec(codes.rows(), c, out)
}

fn chunk_into_vec(m: Matrix) -> Vec<f64> {
    let mut v = Vec::from(m.data());
    v.clear();
    v
}

fn fill_chunk(codes: &FeatureMatrix<i32>, start: usize, rows: usize, columns: &[usize], scale: f64, buf: &mut Vec<f64>) {
    buf.clear();
    buf.reserve(rows * columns.len());
    for i in start..start + rows {
        let row = codes.row(i);
        buf.extend(columns.iter().map(|&j| row[j] as f64 * scale));
    }
}

/// `H^T H` and `H^T T` over the selected columns of activated codes.
pub fn normal_equations(
    codes: &FeatureMatrix<i32>,
    columns: &[usize],
    scale: f64,
    targets: &Matrix,
) -> Result<(Matrix, Matrix)> {
    if targets.rows() != codes.rows() {
        return Err(Error::LengthMismatch { expected: codes.rows(), actual: targets.rows() });
    }
    let m = columns.len();
    let c = targets.cols();
    let mut gram = GramAccumulator::new(m);
    let mut htt = Matrix::zeros(m, c);
    let mut buf = Vec::new();
    for start in (0..codes.rows()).step_by(CHUNK_ROWS) {
        let rows = CHUNK_ROWS.min(codes.rows() - start);
        fill_chunk(codes, start, rows, columns, scale, &mut buf);
        gram.add_rows(&buf, rows);
        let h = Matrix::from_vec(rows, m, core::mem::take(&mut buf))?;
        let t = Matrix::from_vec(rows, c, targets.data()[start * c..(start + rows) * c].to_vec())?;
        let part = h.t_matmul(&t)?;
        for (a, b) in htt.data_mut().iter_mut().zip(part.data()) {
            *a += b;
        }
        buf = chunk_into_vec(h);
    }
    Ok((gram.finish(), htt))
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub activation: ActivationSpec,
    pub a_reg: f64,
    /// Cognizance threshold in percent.
    pub theta: f64,
    pub bits_beta: u32,
    pub encoding: TargetEncoding,
    pub classes: usize,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: TrainedModel,
    /// Unquantized weights, kept for accuracy-vs-bits comparisons.
    pub beta_float: Matrix,
}

/// Mask, solve and quantize on training-side features.
pub fn train<P: TrainingSide>(data: &Labeled<P>, params: &TrainParams, source: FeatureSource) -> Result<FitOutcome> {
    params.activation.validate()?;
    if data.is_empty() {
        return Err(invalid("no training samples"));
    }
    let activated = data.activate(&params.activation);
    let mask = compute_mask(&activated, params.theta)?;
    if mask.is_degenerate() {
        return Err(Error::AllMuted { total: mask.len() });
    }
    let targets = params.encoding.encode(data.labels(), params.classes)?;
    let (gram, htt) =
        normal_equations(activated.codes(), &mask.indices(), params.activation.code_scale(), &targets)?;
    let beta_float = ridge_from_gram(&gram, &htt, params.a_reg)?;
    let beta = quantize_beta(&beta_float, params.bits_beta)?;
    let model = TrainedModel {
        beta,
        a_reg: params.a_reg,
        activation: params.activation,
        mask,
        encoding: params.encoding,
        source,
    };
    Ok(FitOutcome { model, beta_float })
}

/// Search space and fixed settings of the `(A, th)` search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchConfig {
    pub kind: ActivationKind,
    pub bits_activation: u32,
    pub a_grid: Vec<f64>,
    pub th_grid: Vec<f64>,
    pub theta: f64,
    pub bits_beta: u32,
    pub encoding: TargetEncoding,
    pub classes: usize,
}

/// Validation score of one `(A, th)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub a_reg: f64,
    pub th: f64,
    pub m_count: usize,
    pub correct: usize,
    pub total: usize,
}

impl GridPoint {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    /// Higher validation accuracy wins; ties go to smaller `A`, then smaller `th`.
    pub fn beats(&self, other: &GridPoint) -> bool {
        if self.correct != other.correct {
            return self.correct > other.correct;
        }
        if self.a_reg != other.a_reg {
            return self.a_reg < other.a_reg;
        }
        self.th < other.th
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchOutcome {
    pub best: GridPoint,
    /// Every evaluated point, `th`-major in grid order.
    pub points: Vec<GridPoint>,
}

/// Exhaustive `(A, th)` search: for every pair the full second stage
/// (activation, mask, solve, 6-bit-style quantization, integer scoring) is
/// fitted on `fit` and scored on `val`.
pub fn grid_search(fit: &Labeled<Fit>, val: &Labeled<Validation>, cfg: &GridSearchConfig) -> Result<GridSearchOutcome> {
    if cfg.a_grid.is_empty() || cfg.th_grid.is_empty() {
        return Err(invalid("hyperparameter grids must not be empty"));
    }
    if fit.is_empty() || val.is_empty() {
        return Err(invalid("fit and validation sets must not be empty"));
    }
    let targets = cfg.encoding.encode(fit.labels(), cfg.classes)?;
    let mut points = Vec::with_capacity(cfg.a_grid.len() * cfg.th_grid.len());
    for &th in &cfg.th_grid {
        let spec = ActivationSpec::new(cfg.kind, th, cfg.bits_activation)?;
        let fit_codes = fit.activate(&spec);
        let mask = compute_mask(&fit_codes, cfg.theta)?;
        if mask.is_degenerate() {
            points.extend(cfg.a_grid.iter().map(|&a_reg| GridPoint { a_reg, th, m_count: 0, correct: 0, total: val.len() }));
            continue;
        }
        let columns = mask.indices();
        let (gram, htt) = normal_equations(fit_codes.codes(), &columns, spec.code_scale(), &targets)?;
        drop(fit_codes);
        let val_codes = val.activate(&spec);
        let val_design = design_matrix(&val_codes, &columns, 1.0)?;
        for &a_reg in &cfg.a_grid {
            let beta = ridge_from_gram(&gram, &htt, a_reg)?;
            let q = quantize_beta(&beta, cfg.bits_beta)?;
            let correct = count_correct(&val_design, &q, val_codes.labels())?;
            points.push(GridPoint { a_reg, th, m_count: columns.len(), correct, total: val.len() });
        }
    }
    let mut best = points[0];
    for p in &points[1..] {
        if p.beats(&best) {
            best = *p;
        }
    }
    Ok(GridSearchOutcome { best, points })
}

fn design_matrix<P: Partition>(codes: &Activated<P>, columns: &[usize], scale: f64) -> Result<Matrix> {
    let mut buf = Vec::new();
    fill_chunk(codes.codes(), 0, codes.len(), columns, scale, &mut buf);
    Matrix::from_vec(codes.len(), columns.len(), buf)
}

/// Integer scoring done as one f64 product. Codes and weights are small
/// integers, so every partial sum is exact and the argmax equals the
/// adder-based path.
fn count_correct(design: &Matrix, beta: &QuantizedBeta, labels: &[u8]) -> Result<usize> {
    let weights = Matrix::from_vec(beta.rows(), beta.cols(), beta.values().iter().map(|&v| v as f64).collect())?;
    let scores = design.matmul(&weights)?;
    Ok((0..scores.rows()).filter(|&i| argmax(scores.row(i)) == labels[i] as usize).count())
}

/// Default regularization grid: `A = 2^k`, `k = -5..=15`.
pub fn default_a_grid() -> Vec<f64> {
    a_grid(&(-5..=15).collect::<Vec<_>>())
}

pub fn a_grid(exponents: &[i32]) -> Vec<f64> {
    exponents.iter().map(|&k| libm::pow(2.0, k as f64)).collect()
}

/// Percentile of `|h|` that anchors the threshold grid (one standard
/// deviation for Gaussian features).
pub const TH_ANCHOR_PERCENTILE: f64 = 68.27;
/// Most `|h|` samples looked at when anchoring the threshold grid.
const TH_ANCHOR_SAMPLES: usize = 1 << 20;

/// Default threshold exponents: RLSU does best near its linear regime,
/// while the tristate dead zone has to stay narrow.
pub fn default_th_exponents(kind: ActivationKind) -> Vec<i32> {
    match kind {
        ActivationKind::Rlsu => (-2..=5).collect(),
        ActivationKind::Tristate => (-5..=2).collect(),
    }
}

/// Scale `s` of the threshold grid: the 68.27th percentile of `|h|` over
/// (a strided sample of) `features`, at least one code.
pub fn th_anchor(features: &FeatureMatrix<i32>) -> Result<f64> {
    let data = features.data();
    let stride = data.len().div_ceil(TH_ANCHOR_SAMPLES).max(1);
    let mut mags: Vec<f64> = data.iter().step_by(stride).map(|&v| (v as f64).abs()).collect();
    let anchor = stats::percentile(&mut mags, TH_ANCHOR_PERCENTILE).ok_or_else(|| invalid("no features"))?;
    Ok(anchor.max(1.0))
}

/// Thresholds `anchor * 2^k`.
pub fn th_grid(anchor: f64, exponents: &[i32]) -> Vec<f64> {
    exponents.iter().map(|&k| anchor * libm::pow(2.0, k as f64)).collect()
}

/// Eight log-spaced thresholds around the typical feature magnitude.
pub fn default_th_grid(kind: ActivationKind, features: &FeatureMatrix<i32>) -> Result<Vec<f64>> {
    Ok(th_grid(th_anchor(features)?, &default_th_exponents(kind)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = StreamRng::new(seed, 5);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.normal(0.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn ridge_identity_limit() {
        let i = Matrix::identity(2);
        let beta = ridge_solve(&i, &i, 1e12).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((beta.get(r, c) - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ridge_zero_features() {
        let h = Matrix::zeros(4, 3);
        let t = random(4, 2, 1);
        assert!(ridge_solve(&h, &t, 1.0).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ridge_rejects_bad_inputs() {
        let h = random(3, 2, 2);
        let t = random(3, 2, 3);
        assert!(ridge_solve(&h, &t, 0.0).is_err());
        assert!(ridge_solve(&h, &t, -1.0).is_err());
        let mut bad = h.clone();
        bad.set(0, 0, f64::NAN);
        assert!(ridge_solve(&bad, &t, 1.0).is_err());
        assert!(ridge_solve(&h, &random(2, 2, 4), 1.0).is_err());
    }

    #[test]
    fn beta_quantization_examples() {
        let beta = Matrix::from_vec(1, 3, vec![1.0, -0.5, 0.0]).unwrap();
        let q = quantize_beta(&beta, 6).unwrap();
        assert_eq!(q.values(), &[31, -16, 0]);
        assert_eq!(q.scale(), 1.0 / 31.0);
        let neg = quantize_beta(&Matrix::from_vec(1, 2, vec![-2.0, 1.0]).unwrap(), 6).unwrap();
        assert_eq!(neg.values(), &[-31, 16]);
        let zero = quantize_beta(&Matrix::zeros(2, 2), 6).unwrap();
        assert_eq!((zero.values(), zero.scale()), (&[0, 0, 0, 0][..], 0.0));
        assert!(quantize_beta(&beta, 1).is_err());
    }

    fn tristate_model(beta: Vec<i32>, rows: usize, cols: usize) -> TrainedModel {
        let activation = ActivationSpec::new(ActivationKind::Tristate, 1.0, 8).unwrap();
        TrainedModel {
            beta: QuantizedBeta::from_parts(rows, cols, beta, 0.1, 6).unwrap(),
            a_reg: 1.0,
            activation,
            mask: CognizanceMask::all_ones(rows, 99.5),
            encoding: TargetEncoding::ZeroOne,
            source: FeatureSource {
                mismatch: MismatchSpec::new(0),
                quant: QuantSpec::default(),
                plan: ExpansionPlan::new(4, 4, 1, crate::hw_model::CenteringMode::None).unwrap(),
                full_scale: 1.0,
            },
        }
    }

    #[test]
    fn tristate_prediction_by_hand() {
        let model = tristate_model(vec![3, 0, 0, 3], 2, 2);
        let mut ops = OpCounter::default();
        let scores = score_counted(&[1, -1], &model.beta, ActivationKind::Tristate, &mut ops).unwrap();
        assert_eq!(scores, vec![3, -3]);
        assert_eq!(predict(&[1, -1], &model).unwrap(), 0);
        assert_eq!(ops.multiplications, 0);
        assert_eq!((ops.additions, ops.subtractions), (2, 2));
        // all-zero features tie at zero; lowest index wins
        assert_eq!(predict(&[0, 0], &model).unwrap(), 0);
        assert!(predict(&[0, 0, 0], &model).is_err());
        assert!(predict(&[2, 0], &model).is_err());
    }

    #[test]
    fn single_column_predicts_that_class() {
        let mut model = tristate_model(vec![0, 0, 5, 0, 0, 2], 2, 3);
        model.activation = ActivationSpec::new(ActivationKind::Rlsu, 1.0, 8).unwrap();
        assert_eq!(predict(&[7, 0], &model).unwrap(), 2);
        assert_eq!(predict(&[0, 255], &model).unwrap(), 2);
    }

    #[test]
    fn overflow_is_reported() {
        let mut model = tristate_model(vec![0, 0], 2, 1);
        model.beta = QuantizedBeta { rows: 2, cols: 1, values: vec![i32::MAX, i32::MAX], scale: 1.0, bits: 31 };
        assert!(matches!(predict(&[1, 1], &model), Err(Error::Overflow { class: 0 })));
    }

    #[test]
    fn ties_prefer_smaller_a_then_th() {
        let p = |a_reg, th, correct| GridPoint { a_reg, th, m_count: 1, correct, total: 10 };
        assert!(p(1.0, 1.0, 6).beats(&p(0.5, 0.5, 5)));
        assert!(p(0.5, 2.0, 5).beats(&p(1.0, 1.0, 5)));
        assert!(p(1.0, 1.0, 5).beats(&p(1.0, 2.0, 5)));
        assert!(!p(1.0, 1.0, 5).beats(&p(1.0, 1.0, 5)));
    }

    #[test]
    fn default_grids() {
        let a = default_a_grid();
        assert_eq!((a.len(), a[0], a[20]), (21, 1.0 / 32.0, 32768.0));
        let f = FeatureMatrix::new(1, 4, vec![-10, 10, 10, -10]).unwrap();
        let rlsu = default_th_grid(ActivationKind::Rlsu, &f).unwrap();
        assert_eq!(rlsu, vec![2.5, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 320.0]);
        let tri = default_th_grid(ActivationKind::Tristate, &f).unwrap();
        assert_eq!(tri.len(), 8);
        assert_eq!(tri[5], 10.0);
    }

    #[test]
    fn encodings() {
        let t = TargetEncoding::ZeroOne.encode(&[1, 0], 3).unwrap();
        assert_eq!(t.data(), &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let t = TargetEncoding::PlusMinusOne.encode(&[2], 3).unwrap();
        assert_eq!(t.data(), &[-1.0, -1.0, 1.0]);
        assert!(TargetEncoding::ZeroOne.encode(&[3], 3).is_err());
    }

    #[test]
    fn error_rates() {
        assert_eq!(error_percent(&[1, 2, 3], &[1, 2, 3]), 0.0);
        let labels: Vec<u8> = (0..100).map(|i| (i % 10) as u8).collect();
        assert_eq!(error_percent(&[0; 100], &labels), 90.0);
    }
}
