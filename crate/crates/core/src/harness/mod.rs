//! Experiment runners, metrics, real-data evaluation and plot output.

pub mod experiment;
pub mod metrics;
pub mod plot;
pub mod realdata;

pub use experiment::{emit_plots, run_experiment, write_outputs, ReplicationOutcome, RunOptions};
pub use metrics::{misclassification_rate, Method, MetricRecord};
pub use realdata::{load_multilayer, run_realdata, RealDataRecord, RealDataset};
