//! Fitted-model files: a JSON document carrying everything needed to score new
//! sketches later — mixture parameters, the basis they are expressed in, and the
//! preconditioner seed that reproduces the transform.
//!
//! Field order is fixed by struct declaration order and serialization is
//! deterministic, so refitting with the same seed yields byte-identical files.
//! Covariances are always stored in the preconditioned basis: a diagonal model is
//! only diagonal there (see [`MixtureParams::original_basis_means`]). Means may be
//! stored in either basis; `basis` says which.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{CovarianceKind, CovarianceModel, FitConfig, FitReport, MixtureParams};
use crate::precondition::PreconditionOp;
use crate::sketch::SketchedDataset;

/// Which basis a block of stored vectors lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Preconditioned,
    Original,
}

/// Covariance payload: one variance per component (spherical) or K rows of P
/// per-feature variances (diagonal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelCovariances {
    Spherical(Vec<f64>),
    Diagonal(Vec<Vec<f64>>),
}

/// The model document, one-to-one with the JSON layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    pub covariance_kind: CovarianceKind,
    /// Basis of `means`.
    pub basis: Basis,
    /// Basis of `covariances`; always preconditioned.
    pub covariance_basis: Basis,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: ModelCovariances,
    pub precondition_seed: u64,
    pub fit_config: FitConfig,
    pub loglik_trace: Vec<f64>,
}

impl ModelFile {
    /// Package a fit for storage. `cfg` is echoed into the file verbatim; `basis`
    /// selects how means are written, with original-basis means obtained by exactly
    /// inverting the dataset's preconditioner.
    pub fn from_fit(
        report: &FitReport,
        ds: &SketchedDataset,
        cfg: &FitConfig,
        basis: Basis,
    ) -> Result<Self> {
        let params = &report.params;
        let covariances = match &params.covariance {
            CovarianceModel::Spherical { variances } => {
                ModelCovariances::Spherical(variances.clone())
            }
            CovarianceModel::Diagonal { variances } => {
                ModelCovariances::Diagonal(variances.clone())
            }
            CovarianceModel::Full { .. } => {
                return Err(Error::invalid("model files hold spherical or diagonal covariances"));
            }
        };
        let means = match basis {
            Basis::Preconditioned => params.means.clone(),
            Basis::Original => params.original_basis_means(&ds.precondition),
        };
        let model = ModelFile {
            k: params.k(),
            p: ds.spec.p,
            q: ds.spec.q,
            covariance_kind: params.covariance.kind(),
            basis,
            covariance_basis: Basis::Preconditioned,
            weights: params.weights.clone(),
            means,
            covariances,
            precondition_seed: ds.spec.seed,
            fit_config: *cfg,
            loglik_trace: report.loglik_trace.clone(),
        };
        model.validate()?;
        Ok(model)
    }

    /// Structural checks: shapes agree with K/P, the covariance payload matches
    /// `covariance_kind`, and covariances are in the preconditioned basis.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.p == 0 || self.q == 0 || self.q > self.p {
            return Err(Error::invalid("model needs K >= 1 and 1 <= Q <= P"));
        }
        if self.weights.len() != self.k {
            return Err(Error::invalid("weights length must equal K"));
        }
        if self.means.len() != self.k || self.means.iter().any(|m| m.len() != self.p) {
            return Err(Error::invalid("means must be K x P"));
        }
        if self.covariance_basis != Basis::Preconditioned {
            return Err(Error::invalid("covariances must be stored in the preconditioned basis"));
        }
        match (&self.covariances, self.covariance_kind) {
            (ModelCovariances::Spherical(v), CovarianceKind::Spherical) => {
                if v.len() != self.k {
                    return Err(Error::invalid("spherical covariances must hold K variances"));
                }
            }
            (ModelCovariances::Diagonal(v), CovarianceKind::Diagonal) => {
                if v.len() != self.k || v.iter().any(|row| row.len() != self.p) {
                    return Err(Error::invalid("diagonal covariances must be K x P"));
                }
            }
            _ => {
                return Err(Error::invalid("covariance payload does not match covariance_kind"));
            }
        }
        Ok(())
    }

    /// Mixture parameters in the preconditioned basis, ready for scoring sketches.
    /// Original-basis means are re-preconditioned through the stored seed.
    pub fn preconditioned_params(&self) -> Result<MixtureParams> {
        self.validate()?;
        let means = match self.basis {
            Basis::Preconditioned => self.means.clone(),
            Basis::Original => {
                let op = PreconditionOp::new(self.p, self.precondition_seed)?;
                self.means.iter().map(|m| op.apply(m)).collect()
            }
        };
        let covariance = match &self.covariances {
            ModelCovariances::Spherical(v) => CovarianceModel::Spherical { variances: v.clone() },
            ModelCovariances::Diagonal(v) => CovarianceModel::Diagonal { variances: v.clone() },
        };
        let params = MixtureParams { weights: self.weights.clone(), means, covariance };
        params.validate()?;
        Ok(params)
    }

    /// Reject scoring a sketch the model was not built for: P, Q, and the
    /// preconditioner seed must all match, or densities are computed in the wrong
    /// basis.
    pub fn check_compatible(&self, ds: &SketchedDataset) -> Result<()> {
        if ds.spec.p != self.p || ds.spec.q != self.q {
            return Err(Error::invalid(format!(
                "sketch has P={}, Q={} but the model was fit with P={}, Q={}",
                ds.spec.p, ds.spec.q, self.p, self.q
            )));
        }
        if ds.spec.seed != self.precondition_seed {
            return Err(Error::invalid(format!(
                "sketch preconditioner seed {} does not match the model's {}",
                ds.spec.seed, self.precondition_seed
            )));
        }
        Ok(())
    }

    /// Deterministic pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serialization is infallible");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::format(0, format!("model json: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}
