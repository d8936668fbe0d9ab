//! Feature matrices tagged with the data split they came from.
//!
//! The split is a type parameter, so the cognizance check and the grid search,
//! which only accept [`TrainingSide`] data, cannot be handed test features.

use alloc::vec::Vec;
use core::marker::PhantomData;

use crate::error::{invalid, Error, Result};
use crate::nonlinearity::ActivationSpec;

/// Dense row-major matrix; one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> FeatureMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, actual: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact(0) panics; a zero-width matrix still has `rows` empty rows
        let cols = self.cols;
        (0..self.rows).map(move |i| &self.data[i * cols..(i + 1) * cols])
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = T> + '_ {
        (0..self.rows).map(move |i| self.data[i * self.cols + j])
    }

    /// Copy of the first `cols` columns.
    pub fn column_prefix(&self, cols: usize) -> Result<Self> {
        if cols > self.cols {
            return Err(invalid(alloc::format!("prefix of {cols} columns from {}", self.cols)));
        }
        let mut data = Vec::with_capacity(self.rows * cols);
        for row in self.iter_rows() {
            data.extend_from_slice(&row[..cols]);
        }
        Ok(Self { rows: self.rows, cols, data })
    }

    /// Copy of the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * columns.len());
        for row in self.iter_rows() {
            data.extend(columns.iter().map(|&j| row[j]));
        }
        Self { rows: self.rows, cols: columns.len(), data }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: rows.len(), cols: self.cols, data }
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> FeatureMatrix<U> {
        FeatureMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

pub trait Partition {
    const NAME: &'static str;
}

/// Splits drawn from the training set.
pub trait TrainingSide: Partition {}

/// The full training set.
#[derive(Debug)]
pub enum Train {}
/// Subset of the training set used to fit during hyperparameter search.
#[derive(Debug)]
pub enum Fit {}
/// Held-out subset of the training set that scores the search.
#[derive(Debug)]
pub enum Validation {}
/// The test set. Never used for masks, search or training.
#[derive(Debug)]
pub enum Test {}

impl Partition for Train {
    const NAME: &'static str = "train";
}
impl Partition for Fit {
    const NAME: &'static str = "fit";
}
impl Partition for Validation {
    const NAME: &'static str = "validation";
}
impl Partition for Test {
    const NAME: &'static str = "test";
}
impl TrainingSide for Train {}
impl TrainingSide for Fit {}
impl TrainingSide for Validation {}

/// Centered pre-activation features `h` with class labels.
#[derive(Debug)]
pub struct Labeled<P> {
    features: FeatureMatrix<i32>,
    labels: Vec<u8>,
    _split: PhantomData<P>,
}

impl<P> Clone for Labeled<P> {
    fn clone(&self) -> Self {
        Self { features: self.features.clone(), labels: self.labels.clone(), _split: PhantomData }
    }
}

impl<P: Partition> Labeled<P> {
    pub fn new(features: FeatureMatrix<i32>, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::LengthMismatch { expected: features.rows(), actual: labels.len() });
        }
        Ok(Self { features, labels, _split: PhantomData })
    }

    pub fn features(&self) -> &FeatureMatrix<i32> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Same samples, first `cols` features (a smaller expansion of the same run).
    pub fn with_feature_prefix(&self, cols: usize) -> Result<Self> {
        Ok(Self { features: self.features.column_prefix(cols)?, labels: self.labels.clone(), _split: PhantomData })
    }

    pub fn activate(&self, spec: &ActivationSpec) -> Activated<P> {
        Activated {
            codes: self.features.map(|h| spec.activate(h as f64)),
            labels: self.labels.clone(),
            spec: *spec,
            _split: PhantomData,
        }
    }
}

impl Labeled<Train> {
    /// Carves a fit or validation subset out of the training set.
    pub fn subset<Q: TrainingSide>(&self, rows: &[usize]) -> Labeled<Q> {
        Labeled {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            _split: PhantomData,
        }
    }
}

/// Activated output codes `H` (RLSU levels or trits) with labels.
#[derive(Debug)]
pub struct Activated<P> {
    codes: FeatureMatrix<i32>,
    labels: Vec<u8>,
    spec: ActivationSpec,
    _split: PhantomData<P>,
}

impl<P: Partition> Activated<P> {
    pub fn codes(&self) -> &FeatureMatrix<i32> {
        &self.codes
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn spec(&self) -> &ActivationSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Keeps only the given columns (e.g. the cognizant neurons).
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        Self {
            codes: self.codes.select_columns(columns),
            labels: self.labels.clone(),
            spec: self.spec,
            _split: PhantomData,
        }
    }
}
