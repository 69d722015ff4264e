//! Classification metrics and time-series export.

mod confusion;
mod export;
mod report;

pub use confusion::{confusion, ConfusionMatrix};
pub use export::{export_series, write_series, SeriesKind};
pub use report::{metrics, ClassMetrics, MetricsReport};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no pairs to evaluate")]
    EmptyInput,
    #[error("master is not a predicted class")]
    MasterLabel,
    #[error("no samples left to export")]
    EmptySeries,
    #[error("cannot write series: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot write series: {0}")]
    Csv(#[from] csv::Error),
}
