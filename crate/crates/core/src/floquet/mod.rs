//! Periodic linear systems `g' = X(t) g`: fundamental solutions, the
//! monodromy, real Floquet generators `g(T)^m = exp(mTX)`, the periodic
//! factor `a(t) = g(t) exp(-tX)` and the induced skew-product flow.

mod skew;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jordan::{additive_jordan, multiplicative_jordan, AdditiveJordan, LinearFlow};
use crate::linalg::{
    check_square, check_traceless, check_unit_det, matrix_exp, principal_log, rel_diff, Mat,
};
use crate::tolerance::TolerancePolicy;

pub use skew::{
    floquet_lyapunov, floquet_morse_components, simulate_skew, skew_component_distance,
    skew_recurrent_membership, skew_step, SkewMorseComponent,
};

pub const MAX_HARMONIC: usize = 16;
pub const MIN_STEPS: usize = 64;
/// Largest power of two tried for `m`.
pub const MAX_M: u32 = 64;
/// Integration error budget per unit time, relative to `max(1, |g(T)|)`.
pub const INTEG_TOL: f64 = 1e-8;
/// `h |X(t)|_F` beyond this leaves the stability region of classical RK4.
const STABILITY_LIMIT: f64 = 2.5;
const DET_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub k: usize,
    /// Cosine coefficient.
    pub a: Mat,
    /// Sine coefficient.
    pub b: Mat,
}

/// `X(t) = A_0 + sum_k (A_k cos(2 pi k t / T) + B_k sin(2 pi k t / T))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicCoefficient {
    period: f64,
    a0: Mat,
    harmonics: Vec<Harmonic>,
}

impl PeriodicCoefficient {
    pub fn new(
        period: f64,
        a0: Mat,
        harmonics: Vec<Harmonic>,
        pol: &TolerancePolicy,
    ) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidInput(format!(
                "period must be positive, got {period}"
            )));
        }
        let n = check_square(&a0)?;
        check_traceless(&a0, pol.residual_tol)?;
        let mut seen = [false; MAX_HARMONIC + 1];
        for h in &harmonics {
            if !(1..=MAX_HARMONIC).contains(&h.k) {
                return Err(Error::InvalidInput(format!(
                    "harmonic index {} outside 1..={MAX_HARMONIC}",
                    h.k
                )));
            }
            if std::mem::replace(&mut seen[h.k], true) {
                return Err(Error::InvalidInput(format!("harmonic {} given twice", h.k)));
            }
            for m in [&h.a, &h.b] {
                if m.shape() != (n, n) {
                    return Err(Error::InvalidInput(format!(
                        "harmonic {} has shape {:?}, expected {n}x{n}",
                        h.k,
                        m.shape()
                    )));
                }
                check_traceless(m, pol.residual_tol)?;
            }
        }
        Ok(Self {
            period,
            a0,
            harmonics,
        })
    }

    /// Constant coefficient `X` viewed as `T`-periodic.
    pub fn constant(period: f64, x: Mat, pol: &TolerancePolicy) -> Result<Self> {
        Self::new(period, x, Vec::new(), pol)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.a0.nrows()
    }

    pub fn a0(&self) -> &Mat {
        &self.a0
    }

    pub fn harmonics(&self) -> &[Harmonic] {
        &self.harmonics
    }

    pub fn eval(&self, t: f64) -> Mat {
        let w = 2.0 * PI * t / self.period;
        let mut x = self.a0.clone();
        for h in &self.harmonics {
            let (s, c) = (w * h.k as f64).sin_cos();
            x += &h.a * c + &h.b * s;
        }
        x
    }

    /// The same function regarded as `k T`-periodic.
    pub fn repeated(&self, k: usize) -> Result<Self> {
        if k == 0 || self.harmonics.iter().any(|h| h.k * k > MAX_HARMONIC) {
            return Err(Error::InvalidInput(format!(
                "cannot repeat {k} times within the harmonic limit"
            )));
        }
        Ok(Self {
            period: self.period * k as f64,
            a0: self.a0.clone(),
            harmonics: self
                .harmonics
                .iter()
                .map(|h| Harmonic {
                    k: h.k * k,
                    ..h.clone()
                })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub steps: usize,
    /// Richardson estimate of the error in `g(T)`, relative to `max(1, |g(T)|)`.
    pub error_estimate: f64,
    /// Largest `|det g - 1|` seen before renormalizing a step.
    pub det_drift: f64,
    /// Largest `h |X(t)|_F` over the grid.
    pub max_step_norm: f64,
}

/// Samples of `g` on a uniform grid of `[0, T]` with dense output by cubic
/// Hermite interpolation, extended to all of `R` by `g(t + kT) = g(t) g(T)^k`.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    coefficient: PeriodicCoefficient,
    samples: Vec<Mat>,
    slopes: Vec<Mat>,
    stats: IntegrationStats,
}

impl FundamentalSolution {
    pub fn coefficient(&self) -> &PeriodicCoefficient {
        &self.coefficient
    }

    pub fn period(&self) -> f64 {
        self.coefficient.period
    }

    pub fn stats(&self) -> &IntegrationStats {
        &self.stats
    }

    pub fn monodromy(&self) -> &Mat {
        self.samples.last().expect("at least one step")
    }

    pub fn samples(&self) -> &[Mat] {
        &self.samples
    }

    /// `g(t)` for `t` in `[0, T]`.
    fn within_period(&self, t: f64) -> Mat {
        let steps = self.stats.steps;
        let h = self.period() / steps as f64;
        let x = (t / h).clamp(0.0, steps as f64);
        let i = (x.floor() as usize).min(steps - 1);
        let th = x - i as f64;
        let (th2, th3) = (th * th, th * th * th);
        &self.samples[i] * (2.0 * th3 - 3.0 * th2 + 1.0)
            + &self.slopes[i] * (h * (th3 - 2.0 * th2 + th))
            + &self.samples[i + 1] * (-2.0 * th3 + 3.0 * th2)
            + &self.slopes[i + 1] * (h * (th3 - th2))
    }

    /// `g(t)` for any real `t`.
    pub fn at(&self, t: f64) -> Result<Mat> {
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("time {t} is not finite")));
        }
        let period = self.period();
        let k = (t / period).floor();
        let base = self.within_period(t - k * period);
        if k == 0.0 {
            return Ok(base);
        }
        let power = if k > 0.0 {
            self.monodromy().pow(k as u32)
        } else {
            let inv = self
                .monodromy()
                .clone()
                .try_inverse()
                .ok_or(Error::Singular)?;
            inv.pow((-k) as u32)
        };
        let g = base * power;
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::Overflow {
                norm: f64::INFINITY,
            })
        }
    }
}

/// Classical RK4 on `steps` uniform steps over one period, with the default
/// error budget `INTEG_TOL * max(1, T)`.
pub fn integrate_fundamental(
    coef: &PeriodicCoefficient,
    steps: usize,
) -> Result<FundamentalSolution> {
    integrate_fundamental_with_budget(coef, steps, INTEG_TOL * coef.period.max(1.0))
}

pub fn integrate_fundamental_with_budget(
    coef: &PeriodicCoefficient,
    steps: usize,
    budget: f64,
) -> Result<FundamentalSolution> {
    if steps < MIN_STEPS {
        return Err(Error::InvalidInput(format!(
            "at least {MIN_STEPS} steps are required, got {steps}"
        )));
    }
    let (samples, det_drift, max_step_norm) = rk4(coef, steps)?;
    if max_step_norm > STABILITY_LIMIT {
        return Err(Error::StiffnessSuspected(format!(
            "step times coefficient norm reaches {max_step_norm:.3}; increase the step count"
        )));
    }
    let (coarse, _, _) = rk4(coef, steps / 2)?;
    let fine_end = samples.last().unwrap();
    let ratio = steps as f64 / (steps / 2) as f64;
    let error_estimate = (fine_end - coarse.last().unwrap()).norm()
        / (ratio.powi(4) - 1.0)
        / 1f64.max(fine_end.norm());
    if error_estimate > budget {
        return Err(Error::StiffnessSuspected(format!(
            "error estimate {error_estimate:.3e} exceeds the budget {budget:.3e}; increase the step count"
        )));
    }
    let h = coef.period / steps as f64;
    let slopes = samples
        .iter()
        .enumerate()
        .map(|(i, g)| coef.eval(i as f64 * h) * g)
        .collect();
    Ok(FundamentalSolution {
        coefficient: coef.clone(),
        samples,
        slopes,
        stats: IntegrationStats {
            steps,
            error_estimate,
            det_drift,
            max_step_norm,
        },
    })
}

/// Samples `g(i h)`, the determinant drift and `max h |X|`.
fn rk4(coef: &PeriodicCoefficient, steps: usize) -> Result<(Vec<Mat>, f64, f64)> {
    let n = coef.dim();
    let h = coef.period / steps as f64;
    let mut g = Mat::identity(n, n);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(g.clone());
    let mut drift: f64 = 0.0;
    let mut max_norm: f64 = 0.0;
    let mut x_left = coef.eval(0.0);
    for i in 0..steps {
        let t = i as f64 * h;
        let x_mid = coef.eval(t + 0.5 * h);
        let x_right = coef.eval(t + h);
        max_norm = max_norm.max(h * x_left.norm()).max(h * x_mid.norm());
        let k1 = &x_left * &g;
        let k2 = &x_mid * (&g + &k1 * (0.5 * h));
        let k3 = &x_mid * (&g + &k2 * (0.5 * h));
        let k4 = &x_right * (&g + &k3 * h);
        g += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let det = g.determinant();
        if !(det.is_finite() && det > 0.0) {
            return Err(Error::StiffnessSuspected(format!(
                "determinant left the positive axis ({det:.3e}) at t = {t}"
            )));
        }
        drift = drift.max((det - 1.0).abs());
        g *= det.powf(-1.0 / n as f64);
        out.push(g.clone());
        x_left = x_right;
    }
    Ok((out, drift, max_norm))
}

/// Smallest `m` in `1, 2, 4, ..., MAX_M` for which the elliptic part `e` of
/// `mono = e h u` has `e^m` with a principal real logarithm `E'`, and the
/// generator `X = (E' + m log h + m log u) / (m T)`, so that
/// `mono^m = exp(m T X)`.
pub fn floquet_generator(mono: &Mat, period: f64, pol: &TolerancePolicy) -> Result<(u32, Mat)> {
    let n = check_square(mono)?;
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidInput(format!(
            "period must be positive, got {period}"
        )));
    }
    check_unit_det(mono, DET_TOL)?;
    let dec = multiplicative_jordan(mono, pol)?;
    let hyperbolic_and_nilpotent = &dec.log_h + &dec.log_u;
    let mut m = 1u32;
    while m <= MAX_M {
        let em = dec.e.pow(m);
        match principal_log(&em, pol) {
            Ok(log_e) => {
                let mut x = (log_e + &hyperbolic_and_nilpotent * m as f64) / (m as f64 * period);
                let shift = x.trace() / n as f64;
                for i in 0..n {
                    x[(i, i)] -= shift;
                }
                let lhs = mono.pow(m);
                if rel_diff(&matrix_exp(&(&x * (m as f64 * period)))?, &lhs) <= pol.sim_tol {
                    return Ok((m, x));
                }
            }
            Err(Error::BranchObstruction { .. }) => {}
            Err(e) => return Err(e),
        }
        m *= 2;
    }
    Err(Error::NoRealLog { max_m: MAX_M })
}

/// Floquet data of a fundamental solution: `g(t) = a(t) exp(tX)` with `a`
/// periodic of period `mT`.
#[derive(Debug, Clone)]
pub struct FloquetData {
    pub fundamental: FundamentalSolution,
    pub monodromy: Mat,
    pub m: u32,
    pub generator: Mat,
    pub jordan: AdditiveJordan,
    /// The autonomous flow `exp(tX)`.
    pub flow: LinearFlow,
    /// `|g(T)^m - exp(mTX)|_F / max(1, |g(T)^m|_F)`.
    pub log_residual: f64,
}

impl FloquetData {
    pub fn new(fundamental: &FundamentalSolution, pol: &TolerancePolicy) -> Result<Self> {
        let period = fundamental.period();
        let monodromy = fundamental.monodromy().clone();
        let (m, generator) = floquet_generator(&monodromy, period, pol)?;
        let jordan = additive_jordan(&generator, pol)?;
        let flow = LinearFlow::from_additive(&jordan, pol);
        let log_residual = rel_diff(
            &matrix_exp(&(&generator * (m as f64 * period)))?,
            &monodromy.pow(m),
        );
        Ok(Self {
            fundamental: fundamental.clone(),
            monodromy,
            m,
            generator,
            jordan,
            flow,
            log_residual,
        })
    }

    /// `mT`, the period of `a`.
    pub fn factor_period(&self) -> f64 {
        self.m as f64 * self.fundamental.period()
    }

    /// Reduces `t` into `[0, mT)`.
    pub fn reduce(&self, t: f64) -> f64 {
        let p = self.factor_period();
        let r = t.rem_euclid(p);
        if r >= p {
            0.0
        } else {
            r
        }
    }
}

/// `a(t) = g(t) exp(-tX)`, evaluated at `t mod mT`.
pub fn periodic_factor(fd: &FloquetData, t: f64) -> Result<Mat> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("time {t} is not finite")));
    }
    let r = fd.reduce(t);
    Ok(fd.fundamental.at(r)? * matrix_exp(&(&fd.generator * -r))?)
}

/// `sup |g(t) - a(t) exp(tX)|_F` over `samples` equally spaced times in
/// `[0, t_end]`.
pub fn reconstruction_residual(fd: &FloquetData, t_end: f64, samples: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let t = t_end * i as f64 / (samples.max(2) - 1) as f64;
        let g = fd.fundamental.at(t)?;
        let rebuilt = periodic_factor(fd, t)? * matrix_exp(&(&fd.generator * t))?;
        worst = worst.max((g - rebuilt).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn x1() -> Mat {
        Mat::from_row_slice(3, 3, &[1., -2., 0., 2., 1., 0., 0., 0., -2.])
    }

    fn rotation_by_pi(period: f64) -> Mat {
        let w = PI / period;
        Mat::from_row_slice(3, 3, &[0., -w, 0., w, 0., 0., 0., 0., 0.])
    }

    fn wobbly() -> PeriodicCoefficient {
        let a0 = Mat::from_row_slice(3, 3, &[0.3, -0.8, 0.1, 0.8, 0.2, 0.0, 0.1, -0.2, -0.5]);
        let a1 = Mat::from_row_slice(3, 3, &[0.2, 0.4, 0.0, 0.0, -0.1, 0.3, -0.3, 0.0, -0.1]);
        let b1 = Mat::from_row_slice(3, 3, &[0.0, 0.1, -0.2, 0.5, 0.1, 0.0, 0.0, 0.2, -0.1]);
        let b2 = Mat::from_row_slice(3, 3, &[-0.1, 0.0, 0.2, 0.0, 0.0, 0.1, 0.3, 0.0, 0.1]);
        PeriodicCoefficient::new(
            1.0,
            a0,
            vec![
                Harmonic { k: 1, a: a1, b: b1 },
                Harmonic {
                    k: 2,
                    a: Mat::zeros(3, 3),
                    b: b2,
                },
            ],
            &pol(),
        )
        .unwrap()
    }

    #[test]
    fn coefficient_validation() {
        let z = Mat::zeros(2, 2);
        assert!(PeriodicCoefficient::constant(0.0, z.clone(), &pol()).is_err());
        assert!(PeriodicCoefficient::constant(1.0, Mat::identity(2, 2), &pol()).is_err());
        let h = |k| Harmonic {
            k,
            a: z.clone(),
            b: z.clone(),
        };
        assert!(PeriodicCoefficient::new(1.0, z.clone(), vec![h(17)], &pol()).is_err());
        assert!(PeriodicCoefficient::new(1.0, z.clone(), vec![h(2), h(2)], &pol()).is_err());
        assert!(PeriodicCoefficient::new(1.0, z.clone(), vec![h(16)], &pol()).is_ok());
    }

    #[test]
    fn constant_coefficient_gives_the_exponential() {
        let c = PeriodicCoefficient::constant(1.0, x1() * 0.5, &pol()).unwrap();
        let fund = integrate_fundamental(&c, 1024).unwrap();
        let exact = matrix_exp(&(x1() * 0.5)).unwrap();
        assert!((fund.monodromy() - &exact).norm() < 1e-8);
        let mid = matrix_exp(&(x1() * 0.5 * 0.37)).unwrap();
        assert!((fund.at(0.37).unwrap() - mid).norm() < 1e-8);
        let late = matrix_exp(&(x1() * 0.5 * 2.37)).unwrap();
        assert!(rel_diff(&fund.at(2.37).unwrap(), &late) < 1e-8);
    }

    #[test]
    fn scalar_modulation_integrates_the_scalar() {
        // X(t) = (1 + 0.7 cos + 0.4 sin) X0 commutes with itself
        let x0 = x1() * 0.3;
        let c = PeriodicCoefficient::new(
            2.0,
            x0.clone(),
            vec![Harmonic {
                k: 1,
                a: &x0 * 0.7,
                b: &x0 * 0.4,
            }],
            &pol(),
        )
        .unwrap();
        let fund = integrate_fundamental(&c, 1024).unwrap();
        assert!(rel_diff(fund.monodromy(), &matrix_exp(&(&x0 * 2.0)).unwrap()) < 1e-8);
        // the sine term integrates to 0.4 T / pi over half a period
        let half = matrix_exp(&(&x0 * (1.0 + 0.8 / PI))).unwrap();
        assert!(rel_diff(&fund.at(1.0).unwrap(), &half) < 1e-8);
    }

    #[test]
    fn cocycle_against_direct_integration() {
        let c = wobbly();
        let fund = integrate_fundamental(&c, 1024).unwrap();
        let twice = integrate_fundamental(&c.repeated(2).unwrap(), 2048).unwrap();
        for i in 0..=50 {
            let t = i as f64 / 50.0;
            let direct = twice.at(t + 1.0).unwrap();
            let extended = fund.at(t).unwrap() * fund.monodromy();
            assert!((direct - extended).norm() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let c = wobbly();
        let end = |s| {
            integrate_fundamental_with_budget(&c, s, f64::INFINITY)
                .unwrap()
                .monodromy()
                .clone()
        };
        let (g1, g2, g3) = (end(64), end(128), end(256));
        let factor = (&g1 - &g2).norm() / (&g2 - &g3).norm();
        assert!(factor >= 8.0, "factor {factor}");
    }

    #[test]
    fn determinant_is_kept_at_one() {
        let fund = integrate_fundamental(&wobbly(), 512).unwrap();
        for g in fund.samples() {
            assert!((g.determinant() - 1.0).abs() < 1e-13);
        }
        assert!(fund.stats().det_drift < 1e-9);
    }

    #[test]
    fn too_few_steps_and_stiffness() {
        assert!(integrate_fundamental(&wobbly(), 32).is_err());
        let stiff = PeriodicCoefficient::constant(1.0, x1() * 100.0, &pol()).unwrap();
        assert!(matches!(
            integrate_fundamental(&stiff, 64),
            Err(Error::StiffnessSuspected(_))
        ));
    }

    #[test]
    fn generator_examples() {
        let (m, x) = floquet_generator(&matrix_exp(&x1()).unwrap(), 1.0, &pol()).unwrap();
        assert_eq!(m, 1);
        assert!((x - x1()).norm() < 1e-10);

        let (m, x) = floquet_generator(&Mat::identity(3, 3), 1.0, &pol()).unwrap();
        assert_eq!(m, 1);
        assert!(x.norm() < 1e-14);

        let rot = matrix_exp(&rotation_by_pi(1.0)).unwrap();
        let (m, x) = floquet_generator(&rot, 1.0, &pol()).unwrap();
        assert_eq!(m, 2);
        assert!(x.iter().all(|v| v.is_finite()));
        assert!(rel_diff(&matrix_exp(&(&x * 2.0)).unwrap(), &(&rot * &rot)) < 1e-12);

        // -I in SL(2) is a real exponential only after squaring
        let (m, _) = floquet_generator(&(-Mat::identity(2, 2)), 1.0, &pol()).unwrap();
        assert_eq!(m, 2);
    }

    #[test]
    fn generator_rejects_non_unimodular() {
        assert!(floquet_generator(&(Mat::identity(2, 2) * 2.0), 1.0, &pol()).is_err());
    }

    #[test]
    fn constant_coefficient_has_trivial_factor() {
        let c = PeriodicCoefficient::constant(1.0, x1() * 0.5, &pol()).unwrap();
        let fd = FloquetData::new(&integrate_fundamental(&c, 1024).unwrap(), &pol()).unwrap();
        assert_eq!(fd.m, 1);
        for i in 0..40 {
            let a = periodic_factor(&fd, 0.1 * i as f64 - 1.0).unwrap();
            assert!((a - Mat::identity(3, 3)).norm() < 1e-7);
        }
    }

    #[test]
    fn reconstruction_and_periodicity() {
        let fd =
            FloquetData::new(&integrate_fundamental(&wobbly(), 1024).unwrap(), &pol()).unwrap();
        assert!(fd.log_residual < 1e-10);
        assert!((periodic_factor(&fd, 0.0).unwrap() - Mat::identity(3, 3)).norm() < 1e-12);
        let p = fd.factor_period();
        assert!(reconstruction_residual(&fd, 3.0 * p, 64).unwrap() <= 1e-6);
        for i in 0..20 {
            let t = 0.05 * i as f64 * p;
            let d = periodic_factor(&fd, t).unwrap() - periodic_factor(&fd, t + p).unwrap();
            assert!(d.norm() < 1e-9);
        }
    }

    #[test]
    fn rotation_by_pi_doubles_the_period_of_the_factor() {
        let c = PeriodicCoefficient::constant(1.0, rotation_by_pi(1.0), &pol()).unwrap();
        let fd = FloquetData::new(&integrate_fundamental(&c, 1024).unwrap(), &pol()).unwrap();
        assert_eq!(fd.m, 2);
        assert!(reconstruction_residual(&fd, 3.0 * fd.factor_period(), 64).unwrap() <= 1e-6);
        // X = 0, so a(t) = g(t) and a(T) is the rotation itself
        assert!(fd.generator.norm() < 1e-8);
        let flip = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -1.0, 1.0]));
        assert!((periodic_factor(&fd, 1.0).unwrap() - flip).norm() < 1e-8);
        assert!((periodic_factor(&fd, 2.0).unwrap() - Mat::identity(3, 3)).norm() < 1e-8);
    }
}
