//! Correlation-aided neural networks.
//!
//! A logistic multilayer perceptron trained on a blend of the usual squared
//! data error and a correlation error that pulls the covariance between each
//! input feature and each output towards externally supplied target
//! correlations ("feature importance").
//!
//! - [`dataset`]: CSV ingestion, one-hot / min-max encoding, seeded splits
//! - [`stats`]: covariance, Pearson correlation, chi-squared ranking and
//!   the O(1)-update [`stats::MeanTable`]
//! - [`network`]: the feed-forward net and plain backpropagation
//! - [`cann`]: the blended objective and its memoized stochastic trainer
//! - [`eval`]: repeated paired trials and learning curves
//! - [`synthetic`]: seeded toy datasets

pub mod cann;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod network;
pub mod stats;
pub mod synthetic;

pub use cann::{
    cann_output_deltas, composite_gradient, composite_objective, correlation_error, train_cann,
    train_cann_with, CannState, CannTrainer, ImportanceSpec, OutputDeltas,
};
pub use dataset::{encode, load_csv, split, Dataset, RawTable, Schema, Split};
pub use error::{Error, Result};
pub use eval::{
    learning_curve, run_feature_selected_trials, run_trials, ImportanceSource, LearningCurve,
    Method, TrialReport,
};
pub use network::{train_plain, train_plain_with, ForwardTrace, Network, TrainConfig};
pub use stats::{compute_importance, pearson, sample_cov, CorrelationReport, MeanTable};
