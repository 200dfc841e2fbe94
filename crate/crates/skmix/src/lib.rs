//! skmix: one-pass Gaussian mixture fitting on sketched data.
//!
//! The pipeline: precondition raw vectors with a seeded sign flip plus an orthonormal
//! DCT (`precondition`), keep only Q of P coordinates per point, resampled per point
//! (`sketch`), then fit a K-component Gaussian mixture directly on those sketches while
//! still estimating full P-dimensional means and (diagonal or spherical) covariances
//! (`gmm`, seeded by `init`). `baseline` holds dense EM and Lloyd k-means for
//! comparison, `eval` the accuracy/bias/timing harnesses, and `cli` the `skmix` binary's
//! subcommands. Data never needs a second pass: each point is read once, sketched, and
//! dropped.

pub mod baseline;
pub mod cli;
pub mod error;
pub mod eval;
pub mod gmm;
pub mod ingest;
pub mod init;
pub mod model;
pub mod precondition;
pub mod sketch;

pub use error::{Error, Result};
pub use eval::{cluster_accuracy, AccuracyReport, SynthSpec};
pub use gmm::{
    fit, fit_restarts, CovarianceKind, CovarianceModel, FitConfig, FitReport, MixtureParams,
    Responsibilities,
};
pub use model::ModelFile;
pub use precondition::{PreconditionOp, TransformKind};
pub use sketch::{RowSketch, SketchSpec, SketchedDataset};
