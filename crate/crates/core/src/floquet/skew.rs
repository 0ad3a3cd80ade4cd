use serde::{Deserialize, Serialize};

use super::{periodic_factor, FloquetData};
use crate::error::{Error, Result};
use crate::flag::{
    component_distance, enumerate_morse_components, flag_recurrent_membership, simulate_flag, Flag,
    FlagMorseComponent, FlagType, HeightFunction,
};

/// A Morse component `{(s, a(s) x) : x in fix(H, w)}` of the skew-product
/// flow, stored through its fiber at `s = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkewMorseComponent {
    pub index: usize,
    pub component: FlagMorseComponent,
}

pub fn floquet_morse_components(fd: &FloquetData, flag_type: &FlagType) -> Vec<SkewMorseComponent> {
    enumerate_morse_components(&fd.flow.rate_values(), &fd.flow.multiplicities(), flag_type)
        .into_iter()
        .enumerate()
        .map(|(index, component)| SkewMorseComponent { index, component })
        .collect()
}

/// `a(s)^(-1) y`: the fiber coordinate seen by the autonomous flow.
fn untransport(fd: &FloquetData, s: f64, y: &Flag) -> Result<Flag> {
    let a = periodic_factor(fd, s)?;
    y.act(&a.try_inverse().ok_or(Error::Singular)?)
}

/// `phi^t(s, x) = (s + t, rho_s(t) x)` with `rho_s(t) = a(s + t) g^t a(s)^(-1)`;
/// the base point is reduced modulo `mT`.
pub fn skew_step(fd: &FloquetData, s: f64, x: &Flag, t: f64) -> Result<(f64, Flag)> {
    let mut path = simulate_skew(fd, s, x, &[t])?;
    Ok(path.pop().expect("one time requested"))
}

/// Skew-product orbit of `(s, x)` at the given times.
pub fn simulate_skew(
    fd: &FloquetData,
    s: f64,
    x: &Flag,
    times: &[f64],
) -> Result<Vec<(f64, Flag)>> {
    let y = untransport(fd, s, x)?;
    simulate_flag(&fd.flow, &y, times)?
        .into_iter()
        .zip(times)
        .map(|(z, &t)| Ok((fd.reduce(s + t), z.act(&periodic_factor(fd, s + t)?)?)))
        .collect()
}

/// Distance from `(s, y)` to the component, measured on `a(s)^(-1) y`.
pub fn skew_component_distance(
    fd: &FloquetData,
    component: &SkewMorseComponent,
    s: f64,
    y: &Flag,
) -> Result<f64> {
    Ok(component_distance(
        &untransport(fd, s, y)?,
        &component.component,
        &fd.flow,
    ))
}

/// `(s, y)` is recurrent iff `a(s)^(-1) y` is fixed by `h^t` and `u^t`.
pub fn skew_recurrent_membership(fd: &FloquetData, s: f64, y: &Flag) -> Result<bool> {
    flag_recurrent_membership(&untransport(fd, s, y)?, &fd.flow)
}

/// `F(s, a(s) x) = f(x)` with `f` the height function of the autonomous
/// flow; requires a conformal generator.
pub fn floquet_lyapunov(fd: &FloquetData, s: f64, f: &Flag) -> Result<f64> {
    if !fd.flow.is_conformal() {
        return Err(Error::InvalidInput(
            "the Lyapunov function needs a generator without nilpotent part".into(),
        ));
    }
    Ok(HeightFunction::new(&fd.flow).value(&untransport(fd, s, f)?))
}
