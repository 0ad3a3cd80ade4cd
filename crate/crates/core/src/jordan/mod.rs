//! Additive and multiplicative Jordan decompositions with certified
//! residuals, linear flows built on them, invariant inner products for the
//! elliptic part, and exterior-power representations.

mod flow;
mod metric;
mod wedge;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_square, check_traceless, commutator, complex_spectrum, log_unipotent,
    nilpotency_index_scaled, Mat, SpectralData,
};
use crate::tolerance::TolerancePolicy;

pub use flow::{FlowFactors, LinearFlow, RateCluster, TimeKind};
pub use metric::{adapted_metric, invariant_metric, InvariantMetric};
pub use wedge::{index_sets, wedge_infinitesimal, wedge_of_columns, wedge_representation};

/// Residuals attached to a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `|source - recombined|_F / max(1, |source|_F)`.
    pub reconstruction: f64,
    /// Largest pairwise commutator norm, relative to `max(1, |source|^2)`.
    pub commutator: f64,
    /// Nilpotency index of the nilpotent part (of `u - I` for groups).
    pub nilpotency_index: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdditiveJordan {
    pub source: Mat,
    pub e: Mat,
    pub h: Mat,
    pub n: Mat,
    pub spectrum: SpectralData,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplicativeJordan {
    pub source: Mat,
    pub e: Mat,
    pub h: Mat,
    pub u: Mat,
    pub log_h: Mat,
    pub log_u: Mat,
    pub spectrum: SpectralData,
    pub certificate: Certificate,
}

/// Semisimple plus nilpotent splitting `A = S + N` with
/// `S = Σ λ P_λ` from the clustered spectrum.
pub fn sn_decompose(a: &Mat, pol: &TolerancePolicy) -> Result<(Mat, Mat)> {
    let spec = complex_spectrum(a, pol)?;
    let s = spec.spectral_function(|l| l);
    let n = a - &s;
    Ok((s, n))
}

pub fn additive_jordan(x: &Mat, pol: &TolerancePolicy) -> Result<AdditiveJordan> {
    pol.validate()?;
    check_traceless(x, pol.residual_tol)?;
    additive_jordan_unchecked(x, pol)
}

/// Additive decomposition without the trace condition.
pub fn additive_jordan_unchecked(x: &Mat, pol: &TolerancePolicy) -> Result<AdditiveJordan> {
    check_square(x)?;
    let spectrum = complex_spectrum(x, pol)?;
    let s = spectrum.spectral_function(|l| l);
    let h = spectrum.spectral_function(|l| l.re.into());
    let e = &s - &h;
    let n = x - &s;
    let scale = 1f64.max(x.norm());
    let nilpotency_index = nilpotency_index_scaled(&n, scale, pol)
        .map_err(|_| Error::IllConditioned("nilpotent part fails the nilpotency test".into()))?;
    let certificate = Certificate {
        reconstruction: (x - (&e + &h + &n)).norm() / scale,
        commutator: [commutator(&e, &h), commutator(&e, &n), commutator(&h, &n)]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
            / (scale * scale),
        nilpotency_index,
    };
    Ok(AdditiveJordan {
        source: x.clone(),
        e,
        h,
        n,
        spectrum,
        certificate,
    })
}

pub fn multiplicative_jordan(g: &Mat, pol: &TolerancePolicy) -> Result<MultiplicativeJordan> {
    pol.validate()?;
    let dim = check_square(g)?;
    let spectrum = complex_spectrum(g, pol)?;
    let scale = 1f64.max(g.norm());
    if spectrum
        .clusters
        .iter()
        .any(|c| c.lambda().norm() <= pol.residual_tol * scale)
    {
        return Err(Error::Singular);
    }
    let s_inv = spectrum.spectral_function(|l| l.inv());
    let h = spectrum.spectral_function(|l| l.norm().into());
    let e = spectrum.spectral_function(|l| l / l.norm());
    let log_h = spectrum.spectral_function(|l| l.norm().ln().into());
    let u = &s_inv * g;
    let log_u = log_unipotent(&u, pol)
        .map_err(|_| Error::IllConditioned("unipotent part fails the nilpotency test".into()))?;
    let nilpotency_index =
        nilpotency_index_scaled(&(&u - Mat::identity(dim, dim)), 1f64.max(u.norm()), pol)?;
    let certificate = Certificate {
        reconstruction: (g - &e * &h * &u).norm() / scale,
        commutator: [commutator(&e, &h), commutator(&e, &u), commutator(&h, &u)]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
            / (scale * scale),
        nilpotency_index,
    };
    Ok(MultiplicativeJordan {
        source: g.clone(),
        e,
        h,
        u,
        log_h,
        log_u,
        spectrum,
        certificate,
    })
}
