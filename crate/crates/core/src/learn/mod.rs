//! Learners: gradient-boosted trees and feedforward networks, plus the named
//! model presets used by the selection policies.
//!
//! Both learners take a row-major feature [`Matrix`] and a label slice. For
//! classification the labels are class ids stored as `f64`; for regression
//! they are the raw targets. Predictions come back as a matrix with one row
//! per sample: class probabilities for classifiers, a single column for
//! regressors.

mod gbdt;
mod mlp;
mod presets;

pub use gbdt::{
    gbdt_feature_gain, gbdt_predict, gbdt_train, GbdtConfig, GbdtModel, Node, Objective, Tree,
};
pub use mlp::{
    mlp_predict, mlp_train, Activation, DenseLayer, EpochStats, LayerSpec, Loss, MlpConfig,
    MlpModel, Optimizer, Standardizer,
};
pub use presets::{all_presets, preset, Model, ModelConfig, Preset, PresetTarget, APSP_CLASSES, LP_CLASSES};

use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("{rows} feature rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("expected {expected} feature columns, found {found}")]
    FeatureCount { expected: usize, found: usize },
    #[error("label {value} at row {row} is not a class id below {classes}")]
    InvalidLabel { row: usize, value: f64, classes: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("loss became {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("schema mismatch: model expects `{expected}`, features are `{found}`")]
    SchemaMismatch { expected: String, found: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

pub(crate) fn check_inputs(x: &Matrix, y: &[f64], min_rows: usize) -> Result<(), LearnError> {
    if x.rows() != y.len() {
        return Err(LearnError::LabelCount { rows: x.rows(), labels: y.len() });
    }
    if x.rows() < min_rows {
        return Err(LearnError::TooFewSamples { needed: min_rows, found: x.rows() });
    }
    check_finite(x)?;
    if let Some(row) = y.iter().position(|v| !v.is_finite()) {
        return Err(LearnError::NonFiniteInput { row, col: x.cols() });
    }
    Ok(())
}

pub(crate) fn check_finite(x: &Matrix) -> Result<(), LearnError> {
    match x.as_slice().iter().position(|v| !v.is_finite()) {
        Some(pos) => Err(LearnError::NonFiniteInput { row: pos / x.cols().max(1), col: pos % x.cols().max(1) }),
        None => Ok(()),
    }
}

/// Validates class ids and returns them as indices.
pub(crate) fn class_ids(y: &[f64], classes: usize) -> Result<Vec<usize>, LearnError> {
    y.iter()
        .enumerate()
        .map(|(row, &value)| {
            if value >= 0.0 && value.fract() == 0.0 && (value as usize) < classes {
                Ok(value as usize)
            } else {
                Err(LearnError::InvalidLabel { row, value, classes })
            }
        })
        .collect()
}

pub(crate) fn check_schema(expected: Option<&str>, found: Option<&str>) -> Result<(), LearnError> {
    match (expected, found) {
        (Some(e), Some(f)) if e != f => {
            Err(LearnError::SchemaMismatch { expected: e.to_string(), found: f.to_string() })
        }
        _ => Ok(()),
    }
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}
