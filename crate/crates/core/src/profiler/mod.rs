//! Parameter/FLOP accounting and single-threaded latency measurement.

mod cost;
mod instrumented;
mod latency;

pub use cost::{count_flops, count_params, cost_report, receptive_field, temporal_receptive_field, CostReport, CostRow};
pub use instrumented::{instrumented_forward, OpCounter};
pub use latency::{benchmark_latency, LatencyReport, DEFAULT_RUNS, DEFAULT_WARMUP};
