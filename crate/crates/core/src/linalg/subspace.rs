use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::Mat;
use crate::error::{Error, Result};

/// Singular values within this factor above the cut are reported ambiguous.
const AMBIGUITY_BAND: f64 = 1e3;

/// Outcome of a numerical rank test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankDecision {
    pub rank: usize,
    /// `log10` distance of the singular value closest to the cut.
    pub margin: f64,
}

/// Gram-Schmidt (Householder QR) of the columns of `a`; column spans of
/// leading blocks are preserved.
pub fn orthonormal_basis(a: &Mat) -> Mat {
    let k = a.ncols();
    let qr = a.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    // fix signs so the diagonal of R is non-negative
    for j in 0..k.min(r.nrows()) {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q.columns(0, k).into_owned()
}

/// Thin SVD `(U, sigma)` with singular values in non-increasing order.
///
/// Computed with faer: nalgebra's bidiagonal SVD returns inaccurate factors
/// on some nearly triangular inputs.
pub fn thin_svd(a: &Mat) -> (Mat, DVector<f64>) {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return (Mat::zeros(m, 0), DVector::zeros(0));
    }
    let fa = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    match fa.thin_svd() {
        Ok(svd) => {
            let (u, s) = (svd.U(), svd.S());
            (
                Mat::from_fn(m, k, |i, j| u[(i, j)]),
                DVector::from_fn(k, |i, _| s[i]),
            )
        }
        Err(_) => {
            let svd = a.clone().svd(true, false);
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
            let u = svd.u.expect("requested U");
            (
                Mat::from_fn(m, k, |i, j| u[(i, order[j])]),
                DVector::from_fn(k, |i, _| svd.singular_values[order[i]]),
            )
        }
    }
}

/// Singular values in non-increasing order.
pub fn singular_values(a: &Mat) -> DVector<f64> {
    thin_svd(a).1
}

/// Orthonormal basis of the column range, dropping singular values below
/// `rel_tol * sigma_max`.
pub fn orthonormal_range(a: &Mat, rel_tol: f64) -> Mat {
    let (u, s) = thin_svd(a);
    let smax = s.iter().copied().fold(0.0, f64::max);
    let keep = s
        .iter()
        .filter(|&&x| smax > 0.0 && x > rel_tol * smax)
        .count();
    u.columns(0, keep).into_owned()
}

/// The `k` leading left singular vectors of `a`.
pub fn leading_range(a: &Mat, k: usize) -> Mat {
    let (u, _) = thin_svd(a);
    u.columns(0, k.min(u.ncols())).into_owned()
}

/// Orthogonal projector onto the span of orthonormal columns `q`.
pub fn projector(q: &Mat) -> Mat {
    q * q.transpose()
}

/// Sine of the largest principal angle from span(a) into span(b), both given
/// by orthonormal columns: `|(I - b b^T) a|_2`.
pub fn principal_sin(a: &Mat, b: &Mat) -> f64 {
    let resid = a - b * (b.transpose() * a);
    if resid.ncols() == 0 {
        return 0.0;
    }
    singular_values(&resid).iter().copied().fold(0.0, f64::max)
}

/// Rank with cut `rel_tol * sigma_max`; a singular value inside the band
/// `(cut, cut * 1e3]` makes the decision ambiguous.
pub fn rank_decision(a: &Mat, rel_tol: f64) -> Result<RankDecision> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(RankDecision {
            rank: 0,
            margin: f64::INFINITY,
        });
    }
    let sv = singular_values(a);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(RankDecision {
            rank: 0,
            margin: f64::INFINITY,
        });
    }
    let cut = rel_tol * smax;
    let mut rank = 0;
    let mut margin = f64::INFINITY;
    for &s in sv.iter() {
        if s > cut {
            rank += 1;
        }
        if s > cut && s <= cut * AMBIGUITY_BAND {
            return Err(Error::RankAmbiguous {
                ratio: s / smax,
                threshold: rel_tol,
            });
        }
        let d = if s > 0.0 {
            (s / cut).log10().abs()
        } else {
            f64::INFINITY
        };
        margin = margin.min(d);
    }
    Ok(RankDecision { rank, margin })
}
