//! Rule oracle, slice predictor, load forecaster, training and gradient checks.

mod forecaster;
mod gradcheck;
mod oracle;
mod predictor;
mod train;

pub use forecaster::{
    train_forecaster, ForecastConfig, ForecastWindow, ForecasterModel, ForecasterTraining,
    LoadForecaster,
};
pub use gradcheck::{
    grad_check_forecaster, grad_check_predictor, max_relative_error, DEFAULT_EPSILON,
};
pub use oracle::{oracle_label, RuleOracle};
pub use predictor::{
    Architecture, ConvSpec, LayerRole, LayerShape, Prediction, PredictorCheckpoint, SlicePredictor,
    CHECKPOINT_FORMAT, CHECKPOINT_VERSION, HIDDEN_LAYERS, OUTPUT_CLASSES,
};
pub use train::{
    inject_label_noise, stratified_split, train_predictor, TrainConfig, TrainedPredictor,
};

use crate::slicing::SliceKind;

/// A feature vector with its slice label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub label: SliceKind,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    Shape { expected: usize, found: usize },
    #[error("loss or parameter became non-finite")]
    NonFinite,
    #[error("class {0} is absent from the training split")]
    Stratification(SliceKind),
    #[error("master is not a predictor class")]
    MasterLabel,
    #[error("training data is empty")]
    EmptyData,
    #[error("need at least {needed} samples, got {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint encoding: {0}")]
    Json(#[from] serde_json::Error),
}

impl PartialEq for ModelError {
    fn eq(&self, other: &Self) -> bool {
        use ModelError::*;
        match (self, other) {
            (
                Shape {
                    expected: a,
                    found: b,
                },
                Shape {
                    expected: c,
                    found: d,
                },
            ) => a == c && b == d,
            (NonFinite, NonFinite) | (MasterLabel, MasterLabel) | (EmptyData, EmptyData) => true,
            (Stratification(a), Stratification(b)) => a == b,
            (
                InsufficientData {
                    needed: a,
                    found: b,
                },
                InsufficientData {
                    needed: c,
                    found: d,
                },
            ) => a == c && b == d,
            (Config(a), Config(b)) | (Checkpoint(a), Checkpoint(b)) => a == b,
            _ => false,
        }
    }
}
