//! Flag manifolds of `R^n` as nested subspaces, the induced flows, their
//! Morse components, Bruhat cells and the structural-stability verdict.

mod morse;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jordan::{adapted_metric, wedge_of_columns, LinearFlow, TimeKind};
use crate::linalg::{
    matrix_exp, orthonormal_basis, principal_sin, rank_decision, singular_values, Mat, MAX_DIM,
};
use crate::projective::ProjectivePoint;
use crate::sampling::orthonormal_frame;

pub use morse::{
    attractor_assignment, bruhat_assignment, bruhat_cell, bruhat_cells, component_dimensions,
    component_distance, component_flag, enumerate_morse_components, nearest_component,
    repeller_assignment, unstable_cell, BruhatCell, FlagMorseComponent,
};

/// Signature `d_1 < ... < d_k < n` of a flag manifold.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlagType {
    n: usize,
    dims: Vec<usize>,
}

impl FlagType {
    pub fn new(n: usize, dims: Vec<usize>) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        if dims.is_empty() {
            return Err(Error::InvalidInput(
                "the trivial flag (no proper subspaces) is not allowed".into(),
            ));
        }
        if dims[0] == 0 || *dims.last().unwrap() >= n || dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "flag dimensions {dims:?} must increase strictly within 1..{n}"
            )));
        }
        Ok(Self { n, dims })
    }

    /// `(1, 2, ..., n - 1)`.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(n, (1..n).collect())
    }

    /// Lines: the projective space.
    pub fn projective(n: usize) -> Result<Self> {
        Self::new(n, vec![1])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Increment sizes `d_i - d_(i-1)`, followed by the residual `n - d_k`.
    pub fn increments(&self) -> Vec<usize> {
        let mut prev = 0;
        let mut out: Vec<usize> = self
            .dims
            .iter()
            .map(|&d| {
                let inc = d - prev;
                prev = d;
                inc
            })
            .collect();
        out.push(self.n - prev);
        out
    }

    /// `sum_(i < i') delta_i delta_i'`.
    pub fn manifold_dim(&self) -> usize {
        let inc = self.increments();
        let mut total = 0;
        for i in 0..inc.len() {
            for j in i + 1..inc.len() {
                total += inc[i] * inc[j];
            }
        }
        total
    }
}

/// A point of a flag manifold: `V_i` is the span of the first `d_i`
/// columns of an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    basis: Mat,
    flag_type: FlagType,
}

impl Flag {
    /// Orthonormalizes `columns` block by block (nested spans are kept) and
    /// puts each increment in canonical form.
    pub fn new(columns: &Mat, flag_type: &FlagType) -> Result<Self> {
        let top = *flag_type.dims.last().unwrap();
        if columns.nrows() != flag_type.n || columns.ncols() < top {
            return Err(Error::InvalidInput(format!(
                "flag of type {:?} in R^{} needs an {}x{} basis, got {}x{}",
                flag_type.dims,
                flag_type.n,
                flag_type.n,
                top,
                columns.nrows(),
                columns.ncols()
            )));
        }
        if columns.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "flag basis has non-finite entries".into(),
            ));
        }
        let cols = columns.columns(0, top).into_owned();
        let sv = singular_values(&cols);
        if sv[top - 1] <= 1e-12 * sv[0] {
            return Err(Error::InvalidInput(
                "flag basis columns are linearly dependent".into(),
            ));
        }
        let q = orthonormal_basis(&cols);
        Ok(Self {
            basis: canonical_blocks(&q, &flag_type.dims),
            flag_type: flag_type.clone(),
        })
    }

    /// The coordinate flag `span(e_1) ⊂ span(e_1, e_2) ⊂ ...` of the type.
    pub fn standard(flag_type: &FlagType) -> Self {
        let top = *flag_type.dims.last().unwrap();
        Self {
            basis: Mat::identity(flag_type.n, top),
            flag_type: flag_type.clone(),
        }
    }

    /// Haar-random flag.
    pub fn random(flag_type: &FlagType, rng: &mut impl Rng) -> Self {
        let top = *flag_type.dims.last().unwrap();
        Self::new(&orthonormal_frame(flag_type.n, top, rng), flag_type)
            .expect("random frame has full rank")
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn flag_type(&self) -> &FlagType {
        &self.flag_type
    }

    /// Orthonormal basis of `V_i`, `i` counted from 0.
    pub fn subspace(&self, i: usize) -> Mat {
        self.basis.columns(0, self.flag_type.dims[i]).into_owned()
    }

    /// `g V_1 ⊂ g V_2 ⊂ ...`.
    pub fn act(&self, g: &Mat) -> Result<Self> {
        Self::new(&(g * &self.basis), &self.flag_type)
    }

    /// Plücker point of `V_i`.
    pub fn plucker(&self, i: usize) -> Result<ProjectivePoint> {
        plucker_embed(&self.subspace(i))
    }
}

/// Each increment block is replaced by a pivoted orthonormal basis of the
/// block projector, which depends only on the subspaces.
fn canonical_blocks(q: &Mat, dims: &[usize]) -> Mat {
    let n = q.nrows();
    let mut out = Mat::zeros(n, q.ncols());
    let mut prev = 0;
    for &d in dims {
        let block = q.columns(prev, d - prev);
        let proj = &block * block.transpose();
        let mut chosen: Vec<DVector<f64>> = Vec::new();
        let mut residual = proj.clone();
        for c in prev..d {
            let (best, _) =
                (0..n)
                    .map(|j| (j, residual.column(j).norm()))
                    .fold(
                        (0, -1.0),
                        |acc, x| if x.1 > acc.1 + 1e-12 { x } else { acc },
                    );
            let mut v = residual.column(best).into_owned();
            v /= v.norm();
            for w in &chosen {
                let dot = w.dot(&v);
                v -= w * dot;
            }
            v /= v.norm();
            residual -= &v * (v.transpose() * &residual);
            out.set_column(c, &v);
            chosen.push(v);
        }
        prev = d;
    }
    out
}

/// Largest principal-angle sine between corresponding subspaces.
pub fn flag_distance(a: &Flag, b: &Flag) -> f64 {
    (0..a.flag_type.dims.len())
        .map(|i| principal_sin(&a.subspace(i), &b.subspace(i)))
        .fold(0.0, f64::max)
}

/// Plücker coordinates of the span of the columns of `basis`, as a point of
/// the projective space of the exterior power.
pub fn plucker_embed(basis: &Mat) -> Result<ProjectivePoint> {
    ProjectivePoint::new(wedge_of_columns(basis)?)
}

const SPREAD_PER_STEP: f64 = 8.0;

/// Trajectory of a flag on `times`, stepping by exact propagators and
/// re-orthonormalizing in nested block order after every step.
pub fn simulate_flag(flow: &LinearFlow, f0: &Flag, times: &[f64]) -> Result<Vec<Flag>> {
    let mut out = Vec::with_capacity(times.len());
    let mut cache: Vec<(f64, Mat)> = Vec::new();
    let mut current = f0.clone();
    let mut t_prev = 0.0;
    // substeps keep the condition number of each propagator near e^SPREAD_PER_STEP
    let spread = match (flow.rates.first(), flow.rates.last()) {
        (Some(a), Some(b)) => a.rate - b.rate,
        _ => 0.0,
    };
    for &t in times {
        for h in substeps(t - t_prev, spread, flow.time) {
            let step = match cache.iter().find(|(c, _)| *c == h) {
                Some((_, m)) => m.clone(),
                None => {
                    let m = flow.propagator(h)?;
                    cache.push((h, m.clone()));
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

/// Splits `dt` into steps of spread at most `SPREAD_PER_STEP`; integer
/// steps in discrete time.
fn substeps(dt: f64, spread: f64, time: TimeKind) -> Vec<f64> {
    if dt == 0.0 {
        return Vec::new();
    }
    let subs = ((spread * dt.abs() / SPREAD_PER_STEP).ceil() as usize).max(1);
    match time {
        TimeKind::Continuous => vec![dt / subs as f64; subs],
        TimeKind::Discrete => {
            let chunk = (dt.abs() / subs as f64).floor().max(1.0);
            let full = (dt.abs() / chunk).floor() as usize;
            let mut out = vec![chunk.copysign(dt); full];
            let rest = dt.abs() - chunk * full as f64;
            if rest > 0.0 {
                out.push(rest.copysign(dt));
            }
            out
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowClassification {
    pub h_regular: bool,
    pub conformal: bool,
    pub structurally_stable: bool,
    pub components: Vec<FlagMorseComponent>,
    pub attractor_index: usize,
    pub repeller_index: usize,
    /// Rates with multiplicity, decreasing.
    pub eigen_rates: Vec<f64>,
    /// `log10` of the smallest ratio between an adjacent rate gap and its
    /// merge threshold; positive when every gap clears the threshold.
    pub rate_margin: f64,
    /// `log10(threshold / |N|)`; positive for conformal flows.
    pub conformal_margin: f64,
}

pub fn classify_flow(flow: &LinearFlow, flag_type: &FlagType) -> Result<FlowClassification> {
    if flag_type.n != flow.dim() {
        return Err(Error::InvalidInput(
            "flag type and flow dimensions differ".into(),
        ));
    }
    let pol = &flow.policy;
    let rates = flow.rate_values();
    let mults = flow.multiplicities();
    let components = enumerate_morse_components(&rates, &mults, flag_type);
    let attractor = attractor_assignment(&mults, &flag_type.increments());
    let repeller = repeller_assignment(&mults, &flag_type.increments());
    let attractor_index = components
        .iter()
        .position(|c| c.assignment == attractor)
        .unwrap();
    let repeller_index = components
        .iter()
        .position(|c| c.assignment == repeller)
        .unwrap();

    // per-eigenvalue gaps, so a merged cluster shows how deep inside the
    // threshold it sits
    let mut eigen_keys: Vec<f64> = flow
        .spectrum
        .clusters
        .iter()
        .flat_map(|c| {
            let l = c.lambda();
            let key = match flow.time {
                TimeKind::Continuous => l.re,
                TimeKind::Discrete => l.norm(),
            };
            std::iter::repeat(key).take(c.dim())
        })
        .collect();
    eigen_keys.sort_by(|a, b| b.total_cmp(a));
    let rate_margin = eigen_keys
        .windows(2)
        .map(|w| {
            let thr = pol.cluster_tol * 1f64.max(w[0].abs()).max(w[1].abs());
            ((w[0] - w[1]).max(f64::MIN_POSITIVE) / thr).log10()
        })
        .fold(f64::INFINITY, f64::min);
    let eigen_rates = rates
        .iter()
        .zip(&mults)
        .flat_map(|(&r, &m)| std::iter::repeat(r).take(m))
        .collect();

    let h_regular = flow.is_h_regular();
    let conformal = flow.is_conformal();
    let threshold = pol.residual_tol * 1f64.max(flow.source.norm());
    let conformal_margin = (threshold / flow.n_gen.norm().max(f64::MIN_POSITIVE)).log10();
    assert!(
        h_regular || components.iter().any(|c| c.dim > 0),
        "a non-regular flow must have a positive-dimensional component"
    );
    Ok(FlowClassification {
        h_regular,
        conformal,
        structurally_stable: h_regular,
        components,
        attractor_index,
        repeller_index,
        eigen_rates,
        rate_margin,
        conformal_margin,
    })
}

/// Every `V_i` is invariant under `h` and `u` (taken at time one).
pub fn flag_recurrent_membership(f: &Flag, flow: &LinearFlow) -> Result<bool> {
    let h = matrix_exp(&flow.h_gen)?;
    let u = matrix_exp(&flow.n_gen)?;
    let tol = flow.policy.residual_tol;
    for i in 0..f.flag_type.dims.len() {
        let b = f.subspace(i);
        for m in [&h, &u] {
            let image = m * &b;
            let mut joint = Mat::zeros(b.nrows(), 2 * b.ncols());
            joint.columns_mut(0, b.ncols()).copy_from(&b);
            joint.columns_mut(b.ncols(), b.ncols()).copy_from(&image);
            if rank_decision(&joint, tol)?.rank != b.ncols() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Height function `f(V) = -sum_i tr(H P_(V_i))`, computed in the adapted
/// inner product where `H` is symmetric and the elliptic part is skew, so
/// that the value does not increase along the flow.
#[derive(Debug, Clone)]
pub struct HeightFunction {
    factor: Mat,
    h: Mat,
}

impl HeightFunction {
    pub fn new(flow: &LinearFlow) -> Self {
        let metric = adapted_metric(&flow.spectrum);
        let l = metric.factor();
        let li = l
            .clone()
            .try_inverse()
            .expect("metric factor is invertible");
        let h = &l * &flow.h_gen * &li;
        Self {
            factor: l,
            h: (&h + h.transpose()) * 0.5,
        }
    }

    pub fn value(&self, f: &Flag) -> f64 {
        (0..f.flag_type.dims.len())
            .map(|i| {
                let q = orthonormal_basis(&(&self.factor * f.subspace(i)));
                -(q.transpose() * &self.h * &q).trace()
            })
            .sum()
    }
}

pub fn height_lyapunov(f: &Flag, flow: &LinearFlow) -> f64 {
    HeightFunction::new(flow).value(f)
}
