//! Confusion-matrix metrics, loss-configuration sweeps, k-means analysis of
//! misclassifications, raster exports and the oracle-versus-network timing benchmark.

mod bench;
mod cases;
mod export;
mod kmeans;
mod metrics;
mod report;

pub use bench::{bench_assessment, BenchReport};
pub use cases::{
    evaluate, radar_csv, reference_cases, run_cases, CaseResult, CaseSpec, Evaluation,
};
pub use export::{export_conv1_weights, image_to_ppm, write_ppm};
pub use kmeans::{kmeans, KMeans, DEFAULT_MAX_ITERS};
pub use metrics::{
    balanced_phi, confidence_interval, confusion, metrics, ConfusionMatrix, Intervals,
    MetricReport, Z_99,
};
pub use report::{
    misclassification_report, operating_features, standardize, Concentration, MisclassReport,
};

use crate::encoder::EncodeError;
use crate::nn::NnError;
use crate::stability::StabilityError;
use crate::train::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
}
