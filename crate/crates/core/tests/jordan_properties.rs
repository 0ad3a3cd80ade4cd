use linflow::jordan::{
    additive_jordan, invariant_metric, multiplicative_jordan, wedge_representation, LinearFlow,
};
use linflow::linalg::{
    complex_spectrum, matrix_exp, principal_log, rel_diff, spectral_radius, Mat,
};
use linflow::TolerancePolicy;
use nalgebra::DVector;
use proptest::prelude::*;

fn square(n: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| Mat::from_row_slice(n, n, &v))
}

/// Well-conditioned change of basis `I + 0.4 R`.
fn conjugator(n: usize) -> impl Strategy<Value = Mat> {
    square(n).prop_map(move |r| Mat::identity(n, n) + r * 0.4)
}

/// Jordan-structured traceless matrix: eigenvalues from a small menu,
/// possibly repeated, possibly defective, possibly complex.
fn structured(n: usize) -> impl Strategy<Value = Mat> {
    (
        prop::collection::vec(0usize..5, n),
        prop::collection::vec(any::<bool>(), n),
        conjugator(n),
    )
        .prop_map(move |(picks, chain, c)| {
            let menu = [-1.0, 0.5, 2.0, -0.25, 0.5];
            let mut j = Mat::zeros(n, n);
            let mut i = 0;
            while i < n {
                if i + 1 < n && picks[i] == 4 {
                    // rotation block re ± 1.5 i
                    let re = menu[picks[i + 1] % 4];
                    j[(i, i)] = re;
                    j[(i + 1, i + 1)] = re;
                    j[(i, i + 1)] = -1.5;
                    j[(i + 1, i)] = 1.5;
                    i += 2;
                } else {
                    j[(i, i)] = menu[picks[i] % 4];
                    if i > 0 && chain[i] && j[(i - 1, i - 1)] == j[(i, i)] && j[(i, i - 1)] == 0.0 {
                        j[(i - 1, i)] = 1.0;
                    }
                    i += 1;
                }
            }
            let t = j.trace() / n as f64;
            for k in 0..n {
                j[(k, k)] -= t;
            }
            let ci = c.clone().try_inverse().unwrap();
            &c * j * ci
        })
}

fn dim_and<S: Strategy>(f: impl Fn(usize) -> S) -> impl Strategy<Value = S::Value> {
    (2usize..=4).prop_flat_map(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_resolution(a in dim_and(square)) {
        let pol = TolerancePolicy::default();
        let spec = complex_spectrum(&a, &pol).unwrap();
        let n = a.nrows();
        let mut sum = Mat::zeros(n, n);
        let scale = spec.projection_condition.max(1.0);
        for c in &spec.clusters {
            sum += &c.projection;
            let comm = (&a * &c.projection - &c.projection * &a).norm();
            prop_assert!(comm <= pol.residual_tol * scale * scale * a.norm().max(1.0));
            let idem = (&c.projection * &c.projection - &c.projection).norm();
            prop_assert!(idem <= pol.residual_tol * scale * scale);
        }
        prop_assert!((sum - Mat::identity(n, n)).norm() <= pol.residual_tol * scale);
        let mult: usize = spec.clusters.iter().map(|c| c.dim()).sum();
        prop_assert_eq!(mult, n);
    }

    #[test]
    fn exp_log_round_trip(a in dim_and(square)) {
        let pol = TolerancePolicy::default();
        let l = principal_log(&matrix_exp(&a).unwrap(), &pol).unwrap();
        prop_assert!((l - &a).norm() <= 1e-7);
    }

    #[test]
    fn spectral_radius_of_powers(
        d in prop::collection::vec(0.3f64..2.0, 3),
        c in conjugator(3),
    ) {
        let pol = TolerancePolicy::default();
        let g = &c * Mat::from_diagonal(&DVector::from_vec(d)) * c.clone().try_inverse().unwrap();
        let r = spectral_radius(&g, &pol).unwrap();
        let mut p = Mat::identity(3, 3);
        for t in 1..=3 {
            p = &p * &g;
            let rt = spectral_radius(&p, &pol).unwrap();
            prop_assert!((rt - r.powi(t)).abs() <= 1e-7 * r.powi(t).max(1.0));
        }
    }

    #[test]
    fn conjugation_covariance(
        (x, c) in dim_and(|n| (structured(n), conjugator(n))),
    ) {
        // defective inputs split their eigenvalues at the (eps * cond)^(1/k) scale
        let pol = TolerancePolicy::default().with_cluster_tol(1e-3);
        let ci = c.clone().try_inverse().unwrap();
        let d = additive_jordan(&x, &pol).unwrap();
        let dc = additive_jordan(&(&c * &x * &ci), &pol).unwrap();
        for (a, b) in [(&d.e, &dc.e), (&d.h, &dc.h), (&d.n, &dc.n)] {
            prop_assert!((&c * a * &ci - b).norm() <= 1e-7 * x.norm().max(1.0));
        }
    }

    #[test]
    fn structured_certificates(x in dim_and(structured)) {
        let pol = TolerancePolicy::default().with_cluster_tol(1e-3);
        let d = additive_jordan(&x, &pol).unwrap();
        prop_assert!(d.certificate.reconstruction <= pol.residual_tol);
        prop_assert!(d.certificate.commutator <= 1e-7);
        for c in &d.spectrum.clusters {
            // elliptic part has a purely imaginary spectrum on each cluster
            let he = &d.h * &c.projection - &c.projection * c.lambda().re;
            prop_assert!(he.norm() <= 1e-7 * c.projection.norm().max(1.0));
        }
    }

    #[test]
    fn wedge_compatibility(
        (x, p) in (3usize..=4).prop_flat_map(|n| (structured(n), 1..n)),
    ) {
        let pol = TolerancePolicy::default().with_cluster_tol(1e-3);
        let g = matrix_exp(&x).unwrap();
        let d = multiplicative_jordan(&g, &pol).unwrap();
        let dr = multiplicative_jordan(&wedge_representation(&g, p).unwrap(), &pol).unwrap();
        let pairs = [(&d.e, &dr.e), (&d.h, &dr.h), (&d.u, &dr.u)];
        for (a, b) in pairs {
            let ra = wedge_representation(a, p).unwrap();
            prop_assert!(rel_diff(b, &ra) <= 1e-7, "diff {}", rel_diff(b, &ra));
        }
    }

    #[test]
    fn flow_homomorphism(
        x in dim_and(structured),
        s in -2.0f64..2.0,
        t in -2.0f64..2.0,
    ) {
        let pol = TolerancePolicy::default().with_cluster_tol(1e-3);
        let f = LinearFlow::continuous(&x, &pol).unwrap();
        let (fs, ft, fst) = (f.flow_at(s).unwrap(), f.flow_at(t).unwrap(), f.flow_at(s + t).unwrap());
        prop_assert!(rel_diff(&fst.g, &(&fs.g * &ft.g)) <= 1e-8);
        prop_assert!(rel_diff(&fst.e, &(&fs.e * &ft.e)) <= 1e-8);
        prop_assert!(rel_diff(&fst.h, &(&fs.h * &ft.h)) <= 1e-8);
        prop_assert!(rel_diff(&fst.u, &(&fs.u * &ft.u)) <= 1e-8);
        prop_assert!(rel_diff(&fst.g, &(&fst.e * &fst.h * &fst.u)) <= 1e-8);
    }

    #[test]
    fn discrete_flow_homomorphism(
        x in dim_and(structured),
        s in -3i32..3,
        t in -3i32..3,
    ) {
        let pol = TolerancePolicy::default().with_cluster_tol(1e-3);
        let g = matrix_exp(&(x * 0.5)).unwrap();
        let f = LinearFlow::discrete(&g, &pol).unwrap();
        let (s, t) = (s as f64, t as f64);
        let (fs, ft, fst) = (f.flow_at(s).unwrap(), f.flow_at(t).unwrap(), f.flow_at(s + t).unwrap());
        for (a, b, c) in [(&fs.e, &ft.e, &fst.e), (&fs.h, &ft.h, &fst.h), (&fs.u, &ft.u, &fst.u)] {
            prop_assert!(rel_diff(c, &(a * b)) <= 1e-8);
        }
    }

    #[test]
    fn elliptic_isometry(
        x in dim_and(structured),
        v in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let pol = TolerancePolicy::default().with_cluster_tol(1e-3);
        let d = additive_jordan(&x, &pol).unwrap();
        let e = matrix_exp(&d.e).unwrap();
        let m = invariant_metric(&e, &pol).unwrap();
        let n = x.nrows();
        let v = DVector::from_vec(v[..n].to_vec());
        let base = m.norm(&v);
        for t in 1..=10 {
            for sign in [-1.0, 1.0] {
                let et = matrix_exp(&(&d.e * (sign * t as f64))).unwrap();
                prop_assert!((m.norm(&(&et * &v)) - base).abs() <= 1e-8 * base.max(1.0));
            }
        }
    }
}
