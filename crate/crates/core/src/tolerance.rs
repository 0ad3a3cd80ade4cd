use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical thresholds shared by every analysis.
///
/// `cluster_tol` is relative: eigenvalues `a`, `b` are merged when
/// `|a - b| < cluster_tol * max(1, |a|, |b|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    pub cluster_tol: f64,
    pub residual_tol: f64,
    pub sim_tol: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            cluster_tol: 1e-8,
            residual_tol: 1e-9,
            sim_tol: 1e-6,
        }
    }
}

impl TolerancePolicy {
    pub fn new(cluster_tol: f64, residual_tol: f64, sim_tol: f64) -> Result<Self> {
        let pol = Self {
            cluster_tol,
            residual_tol,
            sim_tol,
        };
        pol.validate()?;
        Ok(pol)
    }

    pub fn with_cluster_tol(mut self, tol: f64) -> Self {
        self.cluster_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cluster_tol", self.cluster_tol),
            ("residual_tol", self.residual_tol),
            ("sim_tol", self.sim_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.cluster_tol < 100.0 * f64::EPSILON {
            return Err(Error::InvalidInput(format!(
                "cluster_tol {} is below 100 machine epsilons",
                self.cluster_tol
            )));
        }
        Ok(())
    }

    /// Whether two eigenvalue-like quantities fall in the same cluster.
    pub fn same_cluster(&self, gap: f64, a: f64, b: f64) -> bool {
        gap < self.cluster_tol * 1f64.max(a.abs()).max(b.abs())
    }
}
