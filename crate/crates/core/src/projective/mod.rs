//! Dynamics induced on the projective space: Morse components from the
//! hyperbolic part, stable and unstable sets, unipotent limits, recurrence,
//! and exact-exponential trajectories.

mod chain;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jordan::{InvariantMetric, LinearFlow, TimeKind};
use crate::linalg::{check_square, nilpotency_index, Mat};
use crate::tolerance::TolerancePolicy;

pub use chain::{
    chain_oracle, chain_recurrent_prediction, projective_grid, ChainGraph, ChainOracleResult,
    MAX_GRID_POINTS,
};

/// Coordinates below this are treated as zero when fixing the sign.
const SIGN_EPS: f64 = 1e-12;

/// A line in `R^n`, stored as a unit vector whose first non-negligible
/// coordinate is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectivePoint {
    rep: DVector<f64>,
}

impl ProjectivePoint {
    pub fn new(v: DVector<f64>) -> Result<Self> {
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput(
                "projective point needs a nonzero vector".into(),
            ));
        }
        let mut rep = v / norm;
        if let Some(first) = rep.iter().find(|x| x.abs() > SIGN_EPS) {
            if *first < 0.0 {
                rep.neg_mut();
            }
        }
        Ok(Self { rep })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(v))
    }

    /// `[e_i]`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        Self { rep: v }
    }

    pub fn rep(&self) -> &DVector<f64> {
        &self.rep
    }

    pub fn dim(&self) -> usize {
        self.rep.len()
    }

    /// `[g x]`.
    pub fn act(&self, g: &Mat) -> Result<Self> {
        Self::new(g * &self.rep)
    }
}

/// Chordal distance `min(|x - y|, |x + y|)` of unit representatives.
pub fn projective_distance(p: &ProjectivePoint, q: &ProjectivePoint) -> f64 {
    let (x, y) = (p.rep(), q.rep());
    (x - y).norm().min((x + y).norm())
}

/// Chordal distance in the inner product of `metric`.
pub fn projective_distance_in(
    p: &ProjectivePoint,
    q: &ProjectivePoint,
    metric: &InvariantMetric,
) -> f64 {
    let x = p.rep() / metric.norm(p.rep());
    let y = q.rep() / metric.norm(q.rep());
    metric.norm(&(&x - &y)).min(metric.norm(&(&x + &y)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectiveComponent {
    pub rate: f64,
    pub dim: usize,
    /// Orthonormal basis of the rate eigenspace.
    pub basis: Mat,
}

/// Components ordered by decreasing rate: the attractor first, the repeller
/// last.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectiveMorseDecomposition {
    pub time: TimeKind,
    pub components: Vec<ProjectiveComponent>,
    pub attractor_index: usize,
    pub repeller_index: usize,
}

pub fn morse_components_projective(flow: &LinearFlow) -> ProjectiveMorseDecomposition {
    let components: Vec<ProjectiveComponent> = flow
        .rates
        .iter()
        .map(|r| ProjectiveComponent {
            rate: r.rate,
            dim: r.dim,
            basis: r.basis.clone(),
        })
        .collect();
    let k = components.len();
    ProjectiveMorseDecomposition {
        time: flow.time,
        components,
        attractor_index: 0,
        repeller_index: k - 1,
    }
}

/// Norms of the spectral components `P_i v`, in decreasing-rate order.
pub fn projection_profile(p: &ProjectivePoint, flow: &LinearFlow) -> Vec<f64> {
    flow.rates
        .iter()
        .map(|r| (&r.projection * p.rep()).norm())
        .collect()
}

/// First component (in decreasing-rate order) with a nonzero spectral
/// projection: the component containing the forward limit.
pub fn stable_set_index(p: &ProjectivePoint, flow: &LinearFlow) -> usize {
    let tol = flow.policy.residual_tol;
    projection_profile(p, flow)
        .iter()
        .position(|&x| x > tol)
        .unwrap_or(0)
}

/// Last component with a nonzero spectral projection: the component
/// containing the backward limit.
pub fn unstable_set_index(p: &ProjectivePoint, flow: &LinearFlow) -> usize {
    let tol = flow.policy.residual_tol;
    let profile = projection_profile(p, flow);
    profile
        .iter()
        .rposition(|&x| x > tol)
        .unwrap_or(profile.len() - 1)
}

/// `[N^k x]` for the largest `k` with `N^k x` nonzero; the two-sided limit
/// of `exp(tN)[x]`.
pub fn unipotent_limit(
    p: &ProjectivePoint,
    n: &Mat,
    pol: &TolerancePolicy,
) -> Result<ProjectivePoint> {
    let dim = check_square(n)?;
    if dim != p.dim() {
        return Err(Error::InvalidInput(
            "point and matrix dimensions differ".into(),
        ));
    }
    nilpotency_index(n, pol)?;
    let scale = n.norm();
    let mut v = p.rep().clone();
    for k in 1..dim {
        let next = n * &v;
        if next.norm() <= pol.residual_tol * scale.powi(k as i32) {
            break;
        }
        v = next;
    }
    ProjectivePoint::new(v)
}

/// `[v]` lies in a single rate eigenspace.
pub fn chain_recurrent_membership(p: &ProjectivePoint, flow: &LinearFlow) -> bool {
    let tol = flow.policy.residual_tol;
    projection_profile(p, flow)
        .iter()
        .filter(|&&x| x > tol)
        .count()
        == 1
}

/// `[v]` lies in a single rate eigenspace and is fixed by the unipotent
/// part (`N v = 0`, or `log(u) v = 0` in discrete time).
pub fn recurrent_membership(p: &ProjectivePoint, flow: &LinearFlow) -> bool {
    let tol = flow.policy.residual_tol;
    chain_recurrent_membership(p, flow)
        && (&flow.n_gen * p.rep()).norm() <= tol * 1f64.max(flow.n_gen.norm())
}

/// Chordal distance from `[v]` to the projectivized span of orthonormal
/// columns `basis`: `2 sin(θ/2)` for the angle θ between `v` and the span.
pub fn distance_to_subspace(p: &ProjectivePoint, basis: &Mat) -> f64 {
    let v = p.rep();
    let inside = basis * (basis.transpose() * v);
    let theta = (v - &inside).norm().atan2(inside.norm());
    2.0 * (theta / 2.0).sin()
}

/// Trajectory `[g^t v]` on `times`, stepping by exact propagators between
/// consecutive times and renormalizing after every step.
pub fn simulate_projective(
    flow: &LinearFlow,
    p0: &ProjectivePoint,
    times: &[f64],
) -> Result<Vec<ProjectivePoint>> {
    let mut out = Vec::with_capacity(times.len());
    let mut cache: Option<(f64, Mat)> = None;
    let mut current = p0.clone();
    let mut t_prev = 0.0;
    for &t in times {
        let dt = t - t_prev;
        if dt != 0.0 {
            let step = match &cache {
                Some((h, m)) if *h == dt => m.clone(),
                _ => {
                    let m = flow.propagator(dt)?;
                    cache = Some((dt, m.clone()));
                    m
                }
            };
            current = current.act(&step)?;
        }
        out.push(current.clone());
        t_prev = t;
    }
    Ok(out)
}

/// Uniform time grid `0, h, 2h, ..., t_end` (`t_end` may be negative).
pub fn time_grid(t_end: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|k| t_end * k as f64 / steps as f64)
        .collect()
}
