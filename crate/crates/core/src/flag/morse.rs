use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Flag, FlagType};
use crate::error::{Error, Result};
use crate::jordan::LinearFlow;
use crate::linalg::{leading_range, orthonormal_basis, principal_sin, rank_decision, Mat};

/// A Morse component of the flow on a flag manifold.
///
/// `assignment[i][j]` is the number of dimensions of rate cluster `j`
/// (clusters in decreasing-rate order) placed in increment `i`; the last
/// row is the residual block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagMorseComponent {
    pub assignment: Vec<Vec<usize>>,
    pub dim: usize,
    pub unstable_dim: usize,
    pub stable_dim: usize,
}

/// All nonnegative integer matrices with row sums `increments` and column
/// sums `mults`, in decreasing lexicographic order: the greedy assignment
/// (attractor) first, the reverse one (repeller) last.
pub fn enumerate_morse_components(
    rates: &[f64],
    mults: &[usize],
    flag_type: &FlagType,
) -> Vec<FlagMorseComponent> {
    let rows = flag_type.increments();
    let mut out = Vec::new();
    let mut current = vec![vec![0; mults.len()]; rows.len()];
    fill(
        &rows,
        0,
        0,
        rows[0],
        &mut mults.to_vec(),
        &mut current,
        &mut out,
    );
    out.into_iter()
        .map(|assignment| {
            let (dim, unstable_dim, stable_dim) = component_dimensions(&assignment, rates);
            FlagMorseComponent {
                assignment,
                dim,
                unstable_dim,
                stable_dim,
            }
        })
        .collect()
}

fn fill(
    rows: &[usize],
    i: usize,
    j: usize,
    left: usize,
    caps: &mut Vec<usize>,
    current: &mut Vec<Vec<usize>>,
    out: &mut Vec<Vec<Vec<usize>>>,
) {
    let m = caps.len();
    if i + 1 == rows.len() {
        // the residual row takes whatever is left
        current[i].copy_from_slice(caps);
        out.push(current.clone());
        current[i].iter_mut().for_each(|c| *c = 0);
        return;
    }
    if j == m {
        if left == 0 {
            fill(rows, i + 1, 0, rows[i + 1], caps, current, out);
        }
        return;
    }
    let room: usize = caps[j + 1..].iter().sum();
    let hi = left.min(caps[j]);
    let lo = left.saturating_sub(room);
    for c in (lo..=hi).rev() {
        current[i][j] = c;
        caps[j] -= c;
        fill(rows, i, j + 1, left - c, caps, current, out);
        caps[j] += c;
    }
    current[i][j] = 0;
}

/// `(dim, n_w, stable)`: over ordered pairs of slots `a` in increment `i`
/// and `b` in a later increment, `rate(b) - rate(a)` is zero, positive or
/// negative.
pub fn component_dimensions(assignment: &[Vec<usize>], rates: &[f64]) -> (usize, usize, usize) {
    let (mut zero, mut pos, mut neg) = (0, 0, 0);
    for (i, row) in assignment.iter().enumerate() {
        for later in &assignment[i + 1..] {
            for (ja, &ca) in row.iter().enumerate() {
                for (jb, &cb) in later.iter().enumerate() {
                    let pairs = ca * cb;
                    match rates[jb].partial_cmp(&rates[ja]).unwrap() {
                        std::cmp::Ordering::Equal => zero += pairs,
                        std::cmp::Ordering::Greater => pos += pairs,
                        std::cmp::Ordering::Less => neg += pairs,
                    }
                }
            }
        }
    }
    (zero, pos, neg)
}

fn corner_rule(
    mults: &[usize],
    increments: &[usize],
    order: impl Iterator<Item = usize> + Clone,
) -> Vec<Vec<usize>> {
    let mut caps = mults.to_vec();
    increments
        .iter()
        .map(|&inc| {
            let mut row = vec![0; mults.len()];
            let mut left = inc;
            for j in order.clone() {
                let c = left.min(caps[j]);
                row[j] = c;
                caps[j] -= c;
                left -= c;
            }
            row
        })
        .collect()
}

/// Largest rates in the earliest increments.
pub fn attractor_assignment(mults: &[usize], increments: &[usize]) -> Vec<Vec<usize>> {
    corner_rule(mults, increments, 0..mults.len())
}

/// Smallest rates in the earliest increments.
pub fn repeller_assignment(mults: &[usize], increments: &[usize]) -> Vec<Vec<usize>> {
    corner_rule(mults, increments, (0..mults.len()).rev())
}

/// Bruhat-cell classification of a flag together with the smallest rank
/// margin among the intersection rank decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruhatCell {
    pub index: usize,
    pub assignment: Vec<Vec<usize>>,
    pub margin: f64,
}

/// Assignment of the component whose stable set contains `f`.
///
/// With `G_q` the sum of the eigenspaces of the `q` smallest rates,
/// `r(i, q) = dim(V_i ∩ G_q)` and the increment `i` receives
/// `r(i,q) - r(i-1,q) - r(i,q-1) + r(i-1,q-1)` dimensions of the `q`-th
/// smallest cluster. `reverse` uses the largest rates instead, which gives
/// the unstable-set (backward limit) component.
pub fn bruhat_assignment(
    f: &Flag,
    flow: &LinearFlow,
    reverse: bool,
) -> Result<(Vec<Vec<usize>>, f64)> {
    let ft = f.flag_type();
    let n = ft.n();
    let m = flow.rates.len();
    let order: Vec<usize> = if reverse {
        (0..m).collect()
    } else {
        (0..m).rev().collect()
    };
    let mut filtration: Vec<Mat> = vec![Mat::zeros(n, 0)];
    let mut acc: Vec<f64> = Vec::new();
    let mut cols = 0;
    for &j in &order {
        acc.extend(flow.rates[j].basis.iter());
        cols += flow.rates[j].dim;
        filtration.push(orthonormal_basis(&Mat::from_column_slice(n, cols, &acc)));
    }
    let mut dims: Vec<usize> = vec![0];
    dims.extend_from_slice(ft.dims());
    dims.push(n);
    let tol = flow.policy.residual_tol;
    let mut margin = f64::INFINITY;
    // r[i][q] for i in 0..=k+1, q in 0..=m
    let mut r = vec![vec![0usize; m + 1]; dims.len()];
    for (i, &d) in dims.iter().enumerate() {
        for (q, g) in filtration.iter().enumerate() {
            if d == 0 || g.ncols() == 0 {
                continue;
            }
            if d == n {
                r[i][q] = g.ncols();
                continue;
            }
            let mut joint = Mat::zeros(n, d + g.ncols());
            joint.columns_mut(0, d).copy_from(&f.basis().columns(0, d));
            joint.columns_mut(d, g.ncols()).copy_from(g);
            let decision = rank_decision(&joint, tol)?;
            margin = margin.min(decision.margin);
            r[i][q] = d + g.ncols() - decision.rank;
        }
    }
    let mut assignment = vec![vec![0usize; m]; dims.len() - 1];
    for i in 1..dims.len() {
        for q in 1..=m {
            let c =
                r[i][q] as i64 - r[i - 1][q] as i64 - r[i][q - 1] as i64 + r[i - 1][q - 1] as i64;
            if c < 0 {
                return Err(Error::IllConditioned(
                    "inconsistent intersection ranks in the Bruhat classification".into(),
                ));
            }
            assignment[i - 1][order[q - 1]] = c as usize;
        }
    }
    Ok((assignment, margin))
}

fn locate(
    f: &Flag,
    flow: &LinearFlow,
    components: &[FlagMorseComponent],
    reverse: bool,
) -> Result<BruhatCell> {
    let (assignment, margin) = bruhat_assignment(f, flow, reverse)?;
    let index = components
        .iter()
        .position(|c| c.assignment == assignment)
        .ok_or_else(|| {
            Error::IllConditioned(format!("assignment {assignment:?} is not a component"))
        })?;
    Ok(BruhatCell {
        index,
        assignment,
        margin,
    })
}

/// Component containing the forward limit of `f`.
pub fn bruhat_cell(
    f: &Flag,
    flow: &LinearFlow,
    components: &[FlagMorseComponent],
) -> Result<BruhatCell> {
    locate(f, flow, components, false)
}

/// Component containing the backward limit of `f`.
pub fn unstable_cell(
    f: &Flag,
    flow: &LinearFlow,
    components: &[FlagMorseComponent],
) -> Result<BruhatCell> {
    locate(f, flow, components, true)
}

/// Forward cells of many flags, in input order.
pub fn bruhat_cells(
    flags: &[Flag],
    flow: &LinearFlow,
    components: &[FlagMorseComponent],
) -> Vec<Result<BruhatCell>> {
    flags
        .par_iter()
        .map(|f| bruhat_cell(f, flow, components))
        .collect()
}

/// How far `f` is from the fixed set of `component`: each `V_i` is compared
/// with the sum of the dominant parts of its spectral projections, with the
/// dimensions the component prescribes.
pub fn component_distance(f: &Flag, component: &FlagMorseComponent, flow: &LinearFlow) -> f64 {
    let ft = f.flag_type();
    let n = ft.n();
    let m = flow.rates.len();
    let mut prefix = vec![0usize; m];
    let mut worst: f64 = 0.0;
    for (i, &d) in ft.dims().iter().enumerate() {
        for (j, p) in prefix.iter_mut().enumerate() {
            *p += component.assignment[i][j];
        }
        let b = f.basis().columns(0, d).into_owned();
        let mut acc: Vec<f64> = Vec::with_capacity(n * d);
        for (j, &s) in prefix.iter().enumerate() {
            if s > 0 {
                // dominant directions taken inside the eigenspace, so a
                // vanishing projection cannot borrow directions from outside
                let q = &flow.rates[j].basis;
                let coords = q.transpose() * (&flow.rates[j].projection * &b);
                acc.extend((q * leading_range(&coords, s)).iter());
            }
        }
        let target = orthonormal_basis(&Mat::from_column_slice(n, d, &acc));
        worst = worst.max(principal_sin(&b, &target));
    }
    worst
}

/// Index and distance of the component closest to `f`.
pub fn nearest_component(
    f: &Flag,
    components: &[FlagMorseComponent],
    flow: &LinearFlow,
) -> (usize, f64) {
    components
        .iter()
        .enumerate()
        .map(|(k, c)| (k, component_distance(f, c, flow)))
        .fold(
            (0, f64::INFINITY),
            |best, x| if x.1 < best.1 { x } else { best },
        )
}

/// A flag in the fixed set of `component`, built from the rate-cluster
/// bases.
pub fn component_flag(
    component: &FlagMorseComponent,
    flow: &LinearFlow,
    flag_type: &FlagType,
) -> Result<Flag> {
    let n = flag_type.n();
    let mut used = vec![0usize; flow.rates.len()];
    let mut acc: Vec<f64> = Vec::with_capacity(n * n);
    for row in &component.assignment {
        for (j, &c) in row.iter().enumerate() {
            let basis = &flow.rates[j].basis;
            acc.extend(basis.columns(used[j], c).iter());
            used[j] += c;
        }
    }
    Flag::new(&Mat::from_column_slice(n, n, &acc), flag_type)
}
