//! Evaluation of query performance predictors over multiple rankers.

pub mod config;
pub mod correlation;
pub mod error;
pub mod framework;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod predictors;
pub mod report;
pub mod significance;
pub mod stats;
pub mod trec_io;

pub use config::{load_config, parse_config, EvalConfig};
pub use correlation::{kendall_tau_b, kendall_tau_b_bruteforce, Tau, TauVariant};
pub use error::{Error, Result, Stage};
pub use framework::{EvalResult, Evaluation, Evaluator, Measure, MeasureKind};
pub use matrix::Grid;
pub use metrics::{EffectivenessMatrix, MetricSpec};
pub use pipeline::run_pipeline;
pub use predictors::{PredictionMatrix, PredictorSpec};
pub use report::{Format, ReportBundle};
