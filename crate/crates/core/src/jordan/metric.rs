use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_spectrum, Mat, SpectralData};
use crate::tolerance::TolerancePolicy;

/// Gram matrix of an inner product in which `e` acts isometrically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantMetric {
    pub gram: Mat,
}

impl InvariantMetric {
    pub fn identity(n: usize) -> Self {
        Self {
            gram: Mat::identity(n, n),
        }
    }

    pub fn norm(&self, x: &nalgebra::DVector<f64>) -> f64 {
        x.dot(&(&self.gram * x)).max(0.0).sqrt()
    }

    /// Upper factor `L` with `M = L^T L`, so `x -> L x` is an isometry onto
    /// the standard inner product.
    pub fn factor(&self) -> Mat {
        let chol = nalgebra::Cholesky::new(self.gram.clone()).expect("metric is positive definite");
        chol.l().transpose()
    }

    /// `max |e^T M e - M| / |M|`.
    pub fn isometry_defect(&self, e: &Mat) -> f64 {
        (e.transpose() * &self.gram * e - &self.gram).norm() / self.gram.norm()
    }
}

/// Inner product averaged over the compact closure of `{e^t}`.
///
/// On a real eigenvalue `±1` the term is `P^T P`; on a unit-circle pair it is
/// `(P^T P + J^T J) / 2`, invariant under every rotation `cos θ P + sin θ J`.
pub fn invariant_metric(e: &Mat, pol: &TolerancePolicy) -> Result<InvariantMetric> {
    let spec = complex_spectrum(e, pol)?;
    let scale = 1f64.max(e.norm());
    for c in &spec.clusters {
        let l = c.lambda();
        if (l.norm() - 1.0).abs() > pol.cluster_tol * 1f64.max(l.norm()) {
            return Err(Error::NotElliptic(format!(
                "eigenvalue {:.6e}{:+.6e}i has modulus {:.6e}",
                l.re,
                l.im,
                l.norm()
            )));
        }
        let action = c.apply_function(l);
        if (e * &c.projection - &action).norm()
            > pol.residual_tol * 1e3 * scale * c.projection.norm()
        {
            return Err(Error::NotElliptic("matrix is not semisimple".into()));
        }
    }
    Ok(adapted_metric(&spec))
}

/// The same average built from any spectral data: spectral subspaces are
/// mutually orthogonal, each real cluster acts as a scalar and each
/// conjugate pair as a rotation times a scalar (for semisimple input).
pub fn adapted_metric(spec: &SpectralData) -> InvariantMetric {
    let n = spec.n;
    let mut gram = Mat::zeros(n, n);
    for c in &spec.clusters {
        match &c.rotation {
            None => gram += c.projection.transpose() * &c.projection,
            Some(j) => gram += (c.projection.transpose() * &c.projection + j.transpose() * j) * 0.5,
        }
    }
    let gram = (&gram + gram.transpose()) * 0.5;
    InvariantMetric { gram }
}
