//! Dense real linear algebra used by every analysis: spectra with clustered
//! projections, the matrix exponential and logarithm, and subspace helpers.

mod expm;
mod logm;
mod spectrum;
mod subspace;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::tolerance::TolerancePolicy;

pub use expm::matrix_exp;
pub use logm::{log_unipotent, principal_log};
pub(crate) use spectrum::complex_schur;
pub use spectrum::{complex_spectrum, EigenCluster, SpectralData};
pub use subspace::{
    leading_range, orthonormal_basis, orthonormal_range, principal_sin, projector, rank_decision,
    singular_values, thin_svd, RankDecision,
};

/// Real dense matrix, the carrier of every matrix symbol in the crate.
pub type Mat = DMatrix<f64>;
pub(crate) type CMat = DMatrix<Complex<f64>>;

pub const MAX_DIM: usize = 12;

/// Checks that `a` is square, finite and of supported size.
pub fn check_square(a: &Mat) -> Result<usize> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidInput(format!(
            "matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !(2..=MAX_DIM).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(n)
}

/// Checks membership in sl(n): `|trace| <= tol * n * max(1, |A|)`.
pub fn check_traceless(a: &Mat, tol: f64) -> Result<()> {
    let n = check_square(a)?;
    let tr = a.trace();
    if tr.abs() > tol * n as f64 * 1f64.max(a.norm()) {
        return Err(Error::InvalidInput(format!(
            "matrix is not traceless (trace {tr:.3e})"
        )));
    }
    Ok(())
}

/// Checks membership in SL(n): `|det - 1| <= tol`.
pub fn check_unit_det(a: &Mat, tol: f64) -> Result<()> {
    check_square(a)?;
    let det = a.determinant();
    if (det - 1.0).abs() > tol {
        return Err(Error::InvalidInput(format!(
            "determinant is {det:.12} rather than 1"
        )));
    }
    Ok(())
}

pub fn commutator(a: &Mat, b: &Mat) -> Mat {
    a * b - b * a
}

/// `|a - b|_F / max(1, |b|_F)`.
pub fn rel_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / 1f64.max(b.norm())
}

pub fn spectral_radius(a: &Mat, pol: &TolerancePolicy) -> Result<f64> {
    let spec = complex_spectrum(a, pol)?;
    Ok(spec
        .eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max))
}

/// Smallest `k <= n - 1` with `|A^(k+1)| <= residual_tol * scale^(k+1)`.
///
/// With `scale = |A|_F` the test is relative; callers checking a computed
/// nilpotent part pass the norm of the matrix it was split from.
pub fn nilpotency_index_scaled(a: &Mat, scale: f64, pol: &TolerancePolicy) -> Result<usize> {
    let n = check_square(a)?;
    let mut power = a.clone();
    for k in 0..n {
        if power.norm() <= pol.residual_tol * scale.powi(k as i32 + 1) {
            return Ok(k);
        }
        power = &power * a;
    }
    Err(Error::NotNilpotent)
}

pub fn nilpotency_index(a: &Mat, pol: &TolerancePolicy) -> Result<usize> {
    nilpotency_index_scaled(a, a.norm(), pol)
}

pub(crate) fn to_complex(a: &Mat) -> CMat {
    a.map(|v| Complex::new(v, 0.0))
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}
