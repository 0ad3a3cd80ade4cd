//! Clustered spectra with generalized eigenprojections.
//!
//! The real Schur form is converted to a complex triangular one, each cluster
//! is moved to the leading block by unitary swaps, and its projection is read
//! off the solution of the decoupling Sylvester equation.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use super::{check_square, to_complex, CMat, Mat};
use crate::error::{Error, Result};
use crate::tolerance::TolerancePolicy;

type C64 = Complex<f64>;

/// Projections with norm beyond this (relative to `1/eps`) are unusable.
const MAX_PROJECTION_COND: f64 = 1e-3 / f64::EPSILON;

/// One cluster of eigenvalues.
///
/// For a real cluster `projection` maps onto the generalized eigenspace.
/// For a conjugate pair `{λ, λ̄}` it maps onto the real invariant subspace
/// of dimension `2 * multiplicity`, and `rotation` is the real operator
/// `J = -2 Im(P_λ)` with `J² = -P`, so that the semisimple action on the
/// pair is `Re(λ) P + Im(λ) J`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenCluster {
    /// Cluster mean; the representative with non-negative imaginary part.
    pub eigenvalue: (f64, f64),
    /// Algebraic multiplicity of `eigenvalue` alone.
    pub multiplicity: usize,
    pub projection: Mat,
    pub rotation: Option<Mat>,
    /// Largest distance of a computed member from the cluster mean.
    pub spread: f64,
}

impl EigenCluster {
    pub fn lambda(&self) -> C64 {
        Complex::new(self.eigenvalue.0, self.eigenvalue.1)
    }

    pub fn is_real(&self) -> bool {
        self.rotation.is_none()
    }

    /// Real dimension of the invariant subspace.
    pub fn dim(&self) -> usize {
        if self.is_real() {
            self.multiplicity
        } else {
            2 * self.multiplicity
        }
    }

    /// Real matrix `Σ f(λ) P_λ` over the cluster (and its conjugate).
    pub fn apply_function(&self, value: C64) -> Mat {
        match &self.rotation {
            None => &self.projection * value.re,
            Some(j) => &self.projection * value.re + j * value.im,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralData {
    pub n: usize,
    pub clusters: Vec<EigenCluster>,
    pub cluster_tol: f64,
    /// Smallest inter-cluster gap divided by its merge threshold (>= 1).
    pub separation_margin: f64,
    /// Largest Frobenius norm among the projections.
    pub projection_condition: f64,
}

impl SpectralData {
    /// All eigenvalues with multiplicity, conjugates included.
    pub fn eigenvalues(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.n);
        for c in &self.clusters {
            for _ in 0..c.multiplicity {
                out.push(c.lambda());
                if !c.is_real() {
                    out.push(c.lambda().conj());
                }
            }
        }
        out
    }

    /// Real matrix `Σ_λ f(λ) P_λ`, `f` applied to the representative with
    /// `Im >= 0` and conjugated for its partner.
    pub fn spectral_function(&self, f: impl Fn(C64) -> C64) -> Mat {
        let mut out = Mat::zeros(self.n, self.n);
        for c in &self.clusters {
            out += c.apply_function(f(c.lambda()));
        }
        out
    }
}

/// Clustered complex spectrum of a real matrix together with real
/// generalized eigenprojections.
pub fn complex_spectrum(a: &Mat, pol: &TolerancePolicy) -> Result<SpectralData> {
    let n = check_square(a)?;
    let (u, t) = complex_schur(a)?;
    let eigs: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    if eigs.iter().any(|l| !(l.re.is_finite() && l.im.is_finite())) {
        return Err(Error::NonConvergence);
    }

    let groups = cluster_eigenvalues(&eigs, pol);
    let mut clusters = Vec::new();
    let mut separation_margin = f64::INFINITY;
    let mut means: Vec<C64> = groups.iter().map(|g| mean(&eigs, g)).collect();
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            let gap = (means[i] - means[j]).norm();
            let thr = pol.cluster_tol * 1f64.max(means[i].norm()).max(means[j].norm());
            separation_margin = separation_margin.min(gap / thr);
        }
    }

    let mut used = vec![false; groups.len()];
    for (gi, group) in groups.iter().enumerate() {
        if used[gi] {
            continue;
        }
        used[gi] = true;
        let mu = means[gi];
        let spread = group
            .iter()
            .map(|&k| (eigs[k] - mu).norm())
            .fold(0.0, f64::max);
        let p = cluster_projection(&u, &t, group);
        if pol.same_cluster(2.0 * mu.im.abs(), mu.norm(), mu.norm())
            || is_self_conjugate(&eigs, group, pol)
        {
            means[gi] = Complex::new(mu.re, 0.0);
            clusters.push(EigenCluster {
                eigenvalue: (mu.re, 0.0),
                multiplicity: group.len(),
                projection: p.map(|z| z.re),
                rotation: None,
                spread,
            });
            continue;
        }
        // conjugate partner
        let partner = (0..groups.len()).find(|&gj| {
            !used[gj]
                && groups[gj].len() == group.len()
                && pol.same_cluster((means[gj] - mu.conj()).norm(), mu.norm(), means[gj].norm())
        });
        let Some(gj) = partner else {
            return Err(Error::IllConditioned(format!(
                "eigenvalue cluster at {:.6e}{:+.6e}i has no conjugate partner",
                mu.re, mu.im
            )));
        };
        used[gj] = true;
        let (rep, rep_p, spread) = if mu.im > 0.0 {
            (mu, p, spread)
        } else {
            let g2 = &groups[gj];
            let m2 = means[gj];
            let s2 = g2
                .iter()
                .map(|&k| (eigs[k] - m2).norm())
                .fold(0.0, f64::max);
            (m2, cluster_projection(&u, &t, g2), s2)
        };
        clusters.push(EigenCluster {
            eigenvalue: (rep.re, rep.im),
            multiplicity: group.len(),
            projection: rep_p.map(|z| 2.0 * z.re),
            rotation: Some(rep_p.map(|z| -2.0 * z.im)),
            spread,
        });
    }

    clusters.sort_by(|x, y| {
        y.eigenvalue
            .0
            .total_cmp(&x.eigenvalue.0)
            .then(y.eigenvalue.1.total_cmp(&x.eigenvalue.1))
    });
    let projection_condition = clusters
        .iter()
        .map(|c| c.projection.norm())
        .fold(0.0, f64::max);
    if !projection_condition.is_finite() || projection_condition > MAX_PROJECTION_COND {
        return Err(Error::IllConditioned(format!(
            "spectral projections have norm {projection_condition:.3e}"
        )));
    }
    // a posteriori: projections of nearly coincident clusters stop commuting
    // with the source at roughly eps * |P|^2
    let scale = 1f64.max(a.norm());
    for c in &clusters {
        let mut defect = (a * &c.projection - &c.projection * a).norm();
        if let Some(j) = &c.rotation {
            defect = defect.max((a * j - j * a).norm());
        }
        let bound = pol.residual_tol * scale * 1f64.max(c.projection.norm());
        if defect > bound {
            return Err(Error::IllConditioned(format!(
                "projection for cluster at {:.6e}{:+.6e}i fails to commute (defect {defect:.3e}, bound {bound:.3e})",
                c.eigenvalue.0, c.eigenvalue.1
            )));
        }
    }
    if groups.len() == 1 {
        separation_margin = f64::INFINITY;
    }
    Ok(SpectralData {
        n,
        clusters,
        cluster_tol: pol.cluster_tol,
        separation_margin,
        projection_condition,
    })
}

/// Unitary `U` and upper triangular `T` with `A = U T U^H`.
pub(crate) fn complex_schur(a: &Mat) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 200 * n)
        .ok_or(Error::NonConvergence)?;
    let (q, t) = schur.unpack();
    Ok(real_to_complex_schur(&to_complex(&q), &to_complex(&t)))
}

fn mean(eigs: &[C64], group: &[usize]) -> C64 {
    group.iter().map(|&k| eigs[k]).sum::<C64>() / group.len() as f64
}

fn is_self_conjugate(eigs: &[C64], group: &[usize], pol: &TolerancePolicy) -> bool {
    // every member's conjugate is within tolerance of some member
    group.iter().all(|&k| {
        let c = eigs[k].conj();
        group
            .iter()
            .any(|&l| pol.same_cluster((eigs[l] - c).norm(), c.norm(), eigs[l].norm()))
    }) && group.iter().any(|&k| eigs[k].im <= 0.0)
        && group.iter().any(|&k| eigs[k].im >= 0.0)
}

/// Single-linkage grouping under the relative merge rule.
fn cluster_eigenvalues(eigs: &[C64], pol: &TolerancePolicy) -> Vec<Vec<usize>> {
    let n = eigs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if pol.same_cluster((eigs[i] - eigs[j]).norm(), eigs[i].norm(), eigs[j].norm()) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_of[r] == usize::MAX {
            root_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_of[r]].push(i);
    }
    groups
}

/// Converts a real Schur pair `(Q, T)` into a complex Schur pair with upper
/// triangular `T`.
fn real_to_complex_schur(q: &CMat, t: &CMat) -> (CMat, CMat) {
    let n = t.nrows();
    let mut u = q.clone();
    let mut t = t.clone();
    for m in (1..n).rev() {
        let sub = t[(m, m - 1)];
        if sub.norm() == 0.0 {
            continue;
        }
        let (a, b, c, d) = (t[(m - 1, m - 1)], t[(m - 1, m)], t[(m, m - 1)], t[(m, m)]);
        let half = (a - d) * 0.5;
        let disc = (half * half + b * c).sqrt();
        let mu = (a + d) * 0.5 + disc - d;
        let r = (mu.norm_sqr() + sub.norm_sqr()).sqrt();
        let (cs, sn) = (mu / r, sub / r);
        // G = [[conj(cs), sn], [-sn, cs]]
        let g = [[cs.conj(), sn], [-sn, cs]];
        for col in (m - 1)..n {
            let (x, y) = (t[(m - 1, col)], t[(m, col)]);
            t[(m - 1, col)] = g[0][0] * x + g[0][1] * y;
            t[(m, col)] = g[1][0] * x + g[1][1] * y;
        }
        // right-multiply by G^H
        for row in 0..=m {
            let (x, y) = (t[(row, m - 1)], t[(row, m)]);
            t[(row, m - 1)] = x * g[0][0].conj() + y * g[0][1].conj();
            t[(row, m)] = x * g[1][0].conj() + y * g[1][1].conj();
        }
        for row in 0..n {
            let (x, y) = (u[(row, m - 1)], u[(row, m)]);
            u[(row, m - 1)] = x * g[0][0].conj() + y * g[0][1].conj();
            u[(row, m)] = x * g[1][0].conj() + y * g[1][1].conj();
        }
        t[(m, m - 1)] = Complex::new(0.0, 0.0);
    }
    (u, t)
}

/// Swaps the adjacent diagonal entries `k`, `k+1` of triangular `t` by a
/// unitary similarity, updating the Schur vectors `u`.
fn swap_adjacent(u: &mut CMat, t: &mut CMat, k: usize) {
    let n = t.nrows();
    let (a, b, d) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k + 1)]);
    // eigenvector of the 2x2 block for eigenvalue d
    let (x1, x2) = (b, d - a);
    let r = (x1.norm_sqr() + x2.norm_sqr()).sqrt();
    if r == 0.0 {
        return;
    }
    let (x1, x2) = (x1 / r, x2 / r);
    // Z = [[x1, -conj(x2)], [x2, conj(x1)]]
    let z = [[x1, -x2.conj()], [x2, x1.conj()]];
    for row in 0..n {
        let (p, q) = (t[(row, k)], t[(row, k + 1)]);
        t[(row, k)] = p * z[0][0] + q * z[1][0];
        t[(row, k + 1)] = p * z[0][1] + q * z[1][1];
        let (p, q) = (u[(row, k)], u[(row, k + 1)]);
        u[(row, k)] = p * z[0][0] + q * z[1][0];
        u[(row, k + 1)] = p * z[0][1] + q * z[1][1];
    }
    for col in 0..n {
        let (p, q) = (t[(k, col)], t[(k + 1, col)]);
        t[(k, col)] = z[0][0].conj() * p + z[1][0].conj() * q;
        t[(k + 1, col)] = z[0][1].conj() * p + z[1][1].conj() * q;
    }
    t[(k + 1, k)] = Complex::new(0.0, 0.0);
}

/// Complex spectral projection onto the eigenvalues at diagonal positions
/// `members` of the triangular factor.
fn cluster_projection(u: &CMat, t: &CMat, members: &[usize]) -> CMat {
    let n = t.nrows();
    let p = members.len();
    let mut u = u.clone();
    let mut t = t.clone();
    // order: true if the diagonal position currently belongs to the cluster
    let mut inside: Vec<bool> = (0..n).map(|i| members.contains(&i)).collect();
    // bubble cluster members to the front
    for target in 0..p {
        let pos = (target..n).find(|&i| inside[i]).expect("member present");
        for k in (target..pos).rev() {
            swap_adjacent(&mut u, &mut t, k);
            inside.swap(k, k + 1);
        }
    }
    if p == n {
        return DMatrix::identity(n, n);
    }
    let q = n - p;
    let t11 = t.view((0, 0), (p, p)).into_owned();
    let t12 = t.view((0, p), (p, q)).into_owned();
    let t22 = t.view((p, p), (q, q)).into_owned();
    // T11 R - R T22 = -T12, column by column
    let mut r = CMat::zeros(p, q);
    for j in 0..q {
        let mut rhs: Vec<C64> = (0..p).map(|i| -t12[(i, j)]).collect();
        for l in 0..j {
            let coef = t22[(l, j)];
            for i in 0..p {
                rhs[i] += r[(i, l)] * coef;
            }
        }
        let shift = t22[(j, j)];
        for i in (0..p).rev() {
            let mut acc = rhs[i];
            for l in i + 1..p {
                acc -= t11[(i, l)] * r[(l, j)];
            }
            r[(i, j)] = acc / (t11[(i, i)] - shift);
        }
    }
    let mut ptri = CMat::zeros(n, n);
    for i in 0..p {
        ptri[(i, i)] = Complex::new(1.0, 0.0);
        for j in 0..q {
            ptri[(i, p + j)] = -r[(i, j)];
        }
    }
    &u * ptri * u.adjoint()
}
