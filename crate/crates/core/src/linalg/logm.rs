use nalgebra::Complex;

use super::{check_square, complex_schur, nilpotency_index_scaled, CMat, Mat};
use crate::error::{Error, Result};
use crate::tolerance::TolerancePolicy;

type C64 = Complex<f64>;

/// Square roots are taken until `|T - I|_1 <= SQRT_TARGET`.
const SQRT_TARGET: f64 = 0.25;
const MAX_SQRTS: usize = 64;
const QUADRATURE_NODES: usize = 10;

/// Terminating series `log(I + T) = T - T^2/2 + ... ± T^(n-1)/(n-1)` for
/// unipotent `u = I + T`.
pub fn log_unipotent(u: &Mat, pol: &TolerancePolicy) -> Result<Mat> {
    let n = check_square(u)?;
    let t = u - Mat::identity(n, n);
    nilpotency_index_scaled(&t, 1f64.max(u.norm()), pol)?;
    let mut out = Mat::zeros(n, n);
    let mut power = t.clone();
    for k in 1..n {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        out += &power * (sign / k as f64);
        power = &power * &t;
    }
    Ok(out)
}

/// Principal real logarithm.
///
/// Inverse scaling and squaring on the complex Schur form, followed by a
/// Gauss-Legendre partial-fraction approximant of `log(I + X)`.
pub fn principal_log(a: &Mat, pol: &TolerancePolicy) -> Result<Mat> {
    let n = check_square(a)?;
    let shifted = a - Mat::identity(n, n);
    if nilpotency_index_scaled(&shifted, 1f64.max(a.norm()), pol).is_ok() {
        return log_unipotent(a, pol);
    }
    let (u, mut t) = complex_schur(a)?;
    for i in 0..n {
        let l = t[(i, i)];
        if l.re <= 0.0 && l.im.abs() <= pol.cluster_tol * 1f64.max(l.norm()) {
            return Err(Error::BranchObstruction { re: l.re, im: l.im });
        }
    }
    let id = CMat::identity(n, n);
    let mut sqrts = 0;
    while norm1(&(&t - &id)) > SQRT_TARGET {
        if sqrts == MAX_SQRTS {
            return Err(Error::NonConvergence);
        }
        t = sqrt_upper_triangular(&t);
        sqrts += 1;
    }
    let x = &t - &id;
    let mut l = CMat::zeros(n, n);
    for (node, weight) in gauss_legendre_unit(QUADRATURE_NODES) {
        let denom = &id + &x * C64::new(node, 0.0);
        let term = denom.solve_upper_triangular(&x).ok_or(Error::Singular)?;
        l += term * C64::new(weight, 0.0);
    }
    l *= C64::new(2f64.powi(sqrts as i32), 0.0);
    let full = &u * l * u.adjoint();
    Ok(full.map(|z| z.re))
}

fn norm1(a: &CMat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Principal square root of an upper triangular matrix whose diagonal
/// avoids the closed negative real axis.
fn sqrt_upper_triangular(t: &CMat) -> CMat {
    let n = t.nrows();
    let mut r = CMat::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = t[(i, i)].sqrt();
    }
    for j in 1..n {
        for i in (0..j).rev() {
            let mut s = t[(i, j)];
            for k in i + 1..j {
                s -= r[(i, k)] * r[(k, j)];
            }
            r[(i, j)] = s / (r[(i, i)] + r[(j, j)]);
        }
    }
    r
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre_unit(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 + x) / 2.0, w / 2.0));
    }
    out
}

/// `(P_m(x), P_m'(x))` by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
