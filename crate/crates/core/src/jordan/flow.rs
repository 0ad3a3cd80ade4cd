use serde::{Deserialize, Serialize};

use super::{additive_jordan, multiplicative_jordan, AdditiveJordan, MultiplicativeJordan};
use crate::error::{Error, Result};
use crate::linalg::{leading_range, matrix_exp, Mat, SpectralData};
use crate::tolerance::TolerancePolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeKind {
    Continuous,
    Discrete,
}

/// A real eigenspace of the hyperbolic generator: the sum of the spectral
/// subspaces whose rate (`Re λ`, or `ln|λ|` in discrete time) agrees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateCluster {
    pub rate: f64,
    pub dim: usize,
    /// Spectral (oblique) projection onto the subspace.
    pub projection: Mat,
    /// Orthonormal basis of the subspace.
    pub basis: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowFactors {
    pub g: Mat,
    pub e: Mat,
    pub h: Mat,
    pub u: Mat,
}

/// The flow `g^t` of `X` (continuous time) or the iterates of `g` (discrete
/// time), carried with its Jordan factors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFlow {
    pub time: TimeKind,
    pub source: Mat,
    /// `E` or `e`.
    pub elliptic: Mat,
    /// `H` or `h`.
    pub hyperbolic: Mat,
    /// `N` or `u`.
    pub unipotent: Mat,
    /// `H` or `log h`; diagonalizable with the rates as eigenvalues.
    pub h_gen: Mat,
    /// `N` or `log u`.
    pub n_gen: Mat,
    /// Sorted by decreasing rate.
    pub rates: Vec<RateCluster>,
    pub spectrum: SpectralData,
    pub policy: TolerancePolicy,
}

impl LinearFlow {
    pub fn continuous(x: &Mat, pol: &TolerancePolicy) -> Result<Self> {
        Ok(Self::from_additive(&additive_jordan(x, pol)?, pol))
    }

    pub fn discrete(g: &Mat, pol: &TolerancePolicy) -> Result<Self> {
        Ok(Self::from_multiplicative(
            &multiplicative_jordan(g, pol)?,
            pol,
        ))
    }

    pub fn from_additive(dec: &AdditiveJordan, pol: &TolerancePolicy) -> Self {
        let rates = group_rates(&dec.spectrum, pol, |l| l.re, |l| l.re);
        Self {
            time: TimeKind::Continuous,
            source: dec.source.clone(),
            elliptic: dec.e.clone(),
            hyperbolic: dec.h.clone(),
            unipotent: dec.n.clone(),
            h_gen: dec.h.clone(),
            n_gen: dec.n.clone(),
            rates,
            spectrum: dec.spectrum.clone(),
            policy: *pol,
        }
    }

    pub fn from_multiplicative(dec: &MultiplicativeJordan, pol: &TolerancePolicy) -> Self {
        let rates = group_rates(&dec.spectrum, pol, |l| l.norm(), |l| l.norm().ln());
        Self {
            time: TimeKind::Discrete,
            source: dec.source.clone(),
            elliptic: dec.e.clone(),
            hyperbolic: dec.h.clone(),
            unipotent: dec.u.clone(),
            h_gen: dec.log_h.clone(),
            n_gen: dec.log_u.clone(),
            rates,
            spectrum: dec.spectrum.clone(),
            policy: *pol,
        }
    }

    pub fn dim(&self) -> usize {
        self.source.nrows()
    }

    pub fn rate_values(&self) -> Vec<f64> {
        self.rates.iter().map(|r| r.rate).collect()
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.rates.iter().map(|r| r.dim).collect()
    }

    /// All rate clusters are one-dimensional.
    pub fn is_h_regular(&self) -> bool {
        self.rates.iter().all(|r| r.dim == 1)
    }

    /// `|N| <= residual_tol * max(1, |X|)` (with `log u` in discrete time).
    pub fn is_conformal(&self) -> bool {
        self.n_gen.norm() <= self.policy.residual_tol * 1f64.max(self.source.norm())
    }

    /// `g^t` alone.
    pub fn propagator(&self, t: f64) -> Result<Mat> {
        match self.time {
            TimeKind::Continuous => matrix_exp(&(&self.source * t)),
            TimeKind::Discrete => integer_power(&self.source, integer_time(t)?),
        }
    }

    /// `g^t = e^t h^t u^t` with each factor.
    pub fn flow_at(&self, t: f64) -> Result<FlowFactors> {
        match self.time {
            TimeKind::Continuous => Ok(FlowFactors {
                g: matrix_exp(&(&self.source * t))?,
                e: matrix_exp(&(&self.elliptic * t))?,
                h: matrix_exp(&(&self.h_gen * t))?,
                u: matrix_exp(&(&self.n_gen * t))?,
            }),
            TimeKind::Discrete => {
                let k = integer_time(t)?;
                Ok(FlowFactors {
                    g: integer_power(&self.source, k)?,
                    e: integer_power(&self.elliptic, k)?,
                    h: matrix_exp(&(&self.h_gen * t))?,
                    u: matrix_exp(&(&self.n_gen * t))?,
                })
            }
        }
    }
}

fn integer_time(t: f64) -> Result<i64> {
    if !t.is_finite() || t.fract() != 0.0 || t.abs() > i32::MAX as f64 {
        return Err(Error::NonIntegerTime(t));
    }
    Ok(t as i64)
}

/// `a^k` by repeated squaring; negative `k` inverts first.
pub(crate) fn integer_power(a: &Mat, k: i64) -> Result<Mat> {
    let n = a.nrows();
    let mut base = if k < 0 {
        a.clone().try_inverse().ok_or(Error::Singular)?
    } else {
        a.clone()
    };
    let mut e = k.unsigned_abs();
    let mut acc = Mat::identity(n, n);
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    if acc.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow { norm: a.norm() });
    }
    Ok(acc)
}

/// Merges spectral clusters whose `key` values agree under the relative
/// rule and reports `rate` of the merged mean.
fn group_rates(
    spec: &SpectralData,
    pol: &TolerancePolicy,
    key: impl Fn(nalgebra::Complex<f64>) -> f64,
    rate: impl Fn(nalgebra::Complex<f64>) -> f64,
) -> Vec<RateCluster> {
    let mut items: Vec<(f64, usize)> = spec
        .clusters
        .iter()
        .enumerate()
        .map(|(i, c)| (key(c.lambda()), i))
        .collect();
    items.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut groups: Vec<Vec<(f64, usize)>> = Vec::new();
    for item in items {
        match groups.last_mut() {
            Some(g)
                if pol.same_cluster(g.last().unwrap().0 - item.0, g.last().unwrap().0, item.0) =>
            {
                g.push(item)
            }
            _ => groups.push(vec![item]),
        }
    }
    let n = spec.n;
    groups
        .into_iter()
        .map(|g| {
            let mut projection = Mat::zeros(n, n);
            let mut dim = 0;
            let mut weighted = 0.0;
            for &(_, i) in &g {
                let c = &spec.clusters[i];
                projection += &c.projection;
                dim += c.dim();
                weighted += rate(c.lambda()) * c.dim() as f64;
            }
            let basis = leading_range(&projection, dim);
            RateCluster {
                rate: weighted / dim as f64,
                dim,
                projection,
                basis,
            }
        })
        .collect()
}
