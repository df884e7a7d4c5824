//! Distribution and fidelity metrics, and the seeded benchmark that tabulates them.

mod bench;
mod metrics;

pub use bench::{benchmark_run, BenchOutcome, InterpPath, MetricReport, REPORT_COLUMNS};
pub use metrics::{
    mean_relative_error, median_bandwidth, mmd, mmd_biased, pairing_mse, relative_errors,
    sliced_w2, w2_squared_1d, MetricConfig,
};
