//! Synthetic instances, separation metrics and parameter sweeps.

pub mod dataset;
pub mod metrics;
pub mod sweep;
pub mod synth;

pub use metrics::{compute_metrics, nmse_db, MetricReport, METRIC_CAP_DB};
pub use sweep::{evaluate_instance, sweep, SweepGrid, SweepRow, SweepTable};
pub use synth::{generate_instance, MatrixKind, SyntheticSpec};
