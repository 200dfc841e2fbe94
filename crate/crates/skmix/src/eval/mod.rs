//! Evaluation and experiment harnesses: matched clustering accuracy, the density-bias
//! Monte Carlo, the mixed-scale synthetic generator, and per-iteration timing.

pub mod accuracy;
pub mod bias;
pub mod synth;
pub mod timing;

pub use accuracy::{cluster_accuracy, AccuracyReport};
pub use bias::{bias_experiment, write_bias_csv, BiasConfig, BiasPoint};
pub use synth::{make_synthetic, make_synthetic_with, write_synth_csv, SynthDataset, SynthSpec};
pub use timing::{
    linear_fit, summarize_timings, timing_benchmark, write_timing_csv, TimingConfig, TimingRow,
    TimingSummary,
};
