//! Library results against independently computed reference values.

use std::f64::consts::{E, FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riemopt::certificates::{reference_optimum, ReferenceOptions};
use riemopt::geometry::{check_comparison_nonneg, check_comparison_nonpos};
use riemopt::manifolds::{spd_distance, spd_exp, Spd};
use riemopt::objectives::{
    fermat_weber_objective, karcher_objective, squared_distance_objective, AnchorSet, Objective,
};
use riemopt::{make_manifold, Geometry, ManifoldKind};

fn sinh_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    for k in 1..30 {
        term *= x * x / ((2 * k) as f64 * (2 * k + 1) as f64);
        sum += term;
    }
    sum
}

fn cosh_series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..30 {
        term *= x * x / ((2 * k - 1) as f64 * (2 * k) as f64);
        sum += term;
    }
    sum
}

#[test]
fn hyperboloid_exp_matches_series() {
    let h = make_manifold(ManifoldKind::Hyperboloid, 2).unwrap();
    let o = h.point(vec![0.0, 0.0, 1.0]).unwrap();
    for t in [1e-3, 0.5, 1.0, 2.5] {
        let q = h.exp(&o, &h.tangent(&o, vec![t, 0.0, 0.0]).unwrap()).unwrap();
        let want = [sinh_series(t), 0.0, cosh_series(t)];
        for (a, b) in q.as_slice().iter().zip(want) {
            assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()), "t={t}: {a} vs {b}");
        }
        assert!((h.distance(&o, &q).unwrap() - t).abs() < 1e-14);
    }
    let q1 = h.exp(&o, &h.tangent(&o, vec![1.0, 0.0, 0.0]).unwrap()).unwrap();
    assert!((q1.as_slice()[0] - 1.1752011936438014).abs() < 1e-15);
    assert!((q1.as_slice()[2] - 1.5430806348152437).abs() < 1e-15);
}

#[test]
fn sphere_comparison_matches_spherical_law_of_cosines() {
    let s = make_manifold(ManifoldKind::Sphere, 2).unwrap();
    let p = s.point(vec![0.0, 0.0, 1.0]).unwrap();
    let u = s.tangent(&p, vec![FRAC_PI_4, 0.0, 0.0]).unwrap();
    let w = s.tangent(&p, vec![0.0, FRAC_PI_4, 0.0]).unwrap();
    let audit = check_comparison_nonneg(&s, &p, &u, &w, 1e-9).unwrap();
    // cos c = cos a cos b + sin a sin b cos γ with a = b = π/4, γ = π/2.
    let (a, b, gamma) = (FRAC_PI_4, FRAC_PI_4, FRAC_PI_2);
    let c = (a.cos() * b.cos() + a.sin() * b.sin() * gamma.cos()).acos();
    assert!((c - PI / 3.0).abs() < 1e-15);
    assert!((audit.lhs - c).abs() < 1e-14);
    assert!((audit.rhs - PI * 2f64.sqrt() / 4.0).abs() < 1e-15);
    assert!(audit.holds);
    assert!(check_comparison_nonpos(&s, &p, &u, &w, 1e-9).is_err());
}

#[test]
fn hyperboloid_comparison_matches_hyperbolic_law_of_cosines() {
    let h = make_manifold(ManifoldKind::Hyperboloid, 2).unwrap();
    let p = h.point(vec![0.0, 0.0, 1.0]).unwrap();
    let u = h.tangent(&p, vec![1.0, 0.0, 0.0]).unwrap();
    let w = h.tangent(&p, vec![0.0, 1.0, 0.0]).unwrap();
    let audit = check_comparison_nonpos(&h, &p, &u, &w, 1e-9).unwrap();
    // cosh c = cosh a cosh b - sinh a sinh b cos γ with a = b = 1, γ = π/2.
    let c = (cosh_series(1.0) * cosh_series(1.0)).acosh();
    assert!((audit.lhs - c).abs() < 1e-13);
    assert!((audit.rhs - 2f64.sqrt()).abs() < 1e-15);
    assert!(audit.lhs > audit.rhs && audit.holds);
    assert!(check_comparison_nonneg(&h, &p, &u, &w, 1e-9).is_err());
}

#[test]
fn flat_comparison_is_equality() {
    let m = make_manifold(ManifoldKind::Euclidean, 3).unwrap();
    let p = m.point(vec![1.0, 2.0, 3.0]).unwrap();
    let u = m.tangent(&p, vec![0.3, -1.0, 2.0]).unwrap();
    let w = m.tangent(&p, vec![-4.0, 0.5, 0.0]).unwrap();
    let a = check_comparison_nonneg(&m, &p, &u, &w, 1e-9).unwrap();
    let b = check_comparison_nonpos(&m, &p, &u, &w, 1e-9).unwrap();
    assert!((a.lhs - a.rhs).abs() < 1e-14 && a.holds && b.holds);
    let same = check_comparison_nonneg(&m, &p, &u, &u, 1e-9).unwrap();
    assert_eq!((same.lhs, same.rhs), (0.0, 0.0));
}

fn mat2(a: f64, b: f64, d: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a, b, b, d])
}

/// Roots of λ² - tr(P⁻¹Q) λ + det Q / det P.
fn generalized_eigs_2x2(p: &DMatrix<f64>, q: &DMatrix<f64>) -> [f64; 2] {
    let det_p = p[(0, 0)] * p[(1, 1)] - p[(0, 1)] * p[(1, 0)];
    let det_q = q[(0, 0)] * q[(1, 1)] - q[(0, 1)] * q[(1, 0)];
    let pinv = DMatrix::from_row_slice(2, 2, &[p[(1, 1)], -p[(0, 1)], -p[(1, 0)], p[(0, 0)]]) / det_p;
    let tr = (pinv * q).trace();
    let det = det_q / det_p;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    [tr / 2.0 + disc, tr / 2.0 - disc]
}

#[test]
fn spd_distance_matches_characteristic_polynomial() {
    let spd = Spd::new(2).unwrap();
    let flat = |m: &DMatrix<f64>| spd.point(spd.from_matrix(m).as_slice().to_vec()).unwrap();
    let id = flat(&DMatrix::identity(2, 2));
    let q = flat(&mat2(E, 0.0, E * E));
    assert!((spd_distance(&spd, &id, &q).unwrap() - 5f64.sqrt()).abs() < 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let mut rand_spd = || {
            let (a, b, c): (f64, f64, f64) = (
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            );
            let l = DMatrix::from_row_slice(2, 2, &[a.exp(), 0.0, b, c.exp()]);
            &l * l.transpose()
        };
        let (pm, qm) = (rand_spd(), rand_spd());
        let want = generalized_eigs_2x2(&pm, &qm)
            .iter()
            .map(|l| l.ln().powi(2))
            .sum::<f64>()
            .sqrt();
        let (p, q) = (flat(&pm), flat(&qm));
        let got = spd_distance(&spd, &p, &q).unwrap();
        assert!((got - want).abs() < 1e-10 * (1.0 + want), "{got} vs {want}");
        assert!((spd_distance(&spd, &q, &p).unwrap() - got).abs() < 1e-12 * (1.0 + got));
    }
}

/// Classic RK4 for `y' = rhs(y)` on pairs of matrices.
fn rk4<F>(mut y: (DMatrix<f64>, DMatrix<f64>), steps: usize, rhs: F) -> (DMatrix<f64>, DMatrix<f64>)
where
    F: Fn(&(DMatrix<f64>, DMatrix<f64>)) -> (DMatrix<f64>, DMatrix<f64>),
{
    let h = 1.0 / steps as f64;
    let axpy = |y: &(DMatrix<f64>, DMatrix<f64>), k: &(DMatrix<f64>, DMatrix<f64>), s: f64| {
        (&y.0 + &k.0 * s, &y.1 + &k.1 * s)
    };
    for _ in 0..steps {
        let k1 = rhs(&y);
        let k2 = rhs(&axpy(&y, &k1, h / 2.0));
        let k3 = rhs(&axpy(&y, &k2, h / 2.0));
        let k4 = rhs(&axpy(&y, &k3, h));
        y.0 += (&k1.0 + &k2.0 * 2.0 + &k3.0 * 2.0 + &k4.0) * (h / 6.0);
        y.1 += (&k1.1 + &k2.1 * 2.0 + &k3.1 * 2.0 + &k4.1) * (h / 6.0);
    }
    y
}

/// Geodesic equation of the affine-invariant metric: γ'' = γ' γ⁻¹ γ'.
fn spd_geodesic_ode(p: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    rk4((p.clone(), v.clone()), 2000, |(g, dg)| {
        let inv = g.clone().try_inverse().unwrap();
        (dg.clone(), dg * inv * dg)
    })
    .0
}

#[test]
fn spd_exp_matches_geodesic_ode() {
    let spd = Spd::new(2).unwrap();
    let pm = mat2(4.0, 0.0, 1.0);
    let p = spd.point(spd.from_matrix(&pm).as_slice().to_vec()).unwrap();
    for vm in [&pm * 0.1, mat2(0.3, 0.5, -0.2), mat2(-1.0, 0.8, 0.6)] {
        let v = spd.tangent(&p, spd.from_matrix(&vm).as_slice().to_vec()).unwrap();
        let got = spd.to_matrix(spd_exp(&spd, &p, &v).unwrap().coords());
        let want = spd_geodesic_ode(&pm, &vm);
        assert!((&got - &want).amax() < 1e-6, "{got} vs {want}");
    }
    let v = spd.tangent(&p, spd.from_matrix(&(&pm * 0.1)).as_slice().to_vec()).unwrap();
    let got = spd.to_matrix(spd_exp(&spd, &p, &v).unwrap().coords());
    assert!((&got - &pm * 0.1f64.exp()).amax() < 1e-14);
}

#[test]
fn spd_transport_matches_transport_ode() {
    // Along γ(t) with velocity γ', parallel fields solve V' = ½(γ' γ⁻¹ V + V γ⁻¹ γ').
    let spd = Spd::new(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let p = spd.random_point(&mut rng);
        let u = spd.random_tangent_with_norm(&p, 1.0, &mut rng);
        let v = spd.random_tangent(&p, &mut rng);
        let q = spd.exp(&p, &u).unwrap();
        let moved = spd.parallel_transport(&p, &q, &v).unwrap();

        let (pm, um) = (spd.to_matrix(p.coords()), spd.to_matrix(u.comps()));
        // State: (γ, γ') integrated jointly with V by stacking [γ'; V].
        let steps = 2000;
        let h = 1.0 / steps as f64;
        let (mut g, mut dg, mut vv) = (pm.clone(), um.clone(), spd.to_matrix(v.comps()));
        let f = |g: &DMatrix<f64>, dg: &DMatrix<f64>, vv: &DMatrix<f64>| {
            let inv = g.clone().try_inverse().unwrap();
            (
                dg.clone(),
                dg * &inv * dg,
                (dg * &inv * vv + vv * &inv * dg) * 0.5,
            )
        };
        for _ in 0..steps {
            let k1 = f(&g, &dg, &vv);
            let k2 = f(&(&g + &k1.0 * (h / 2.0)), &(&dg + &k1.1 * (h / 2.0)), &(&vv + &k1.2 * (h / 2.0)));
            let k3 = f(&(&g + &k2.0 * (h / 2.0)), &(&dg + &k2.1 * (h / 2.0)), &(&vv + &k2.2 * (h / 2.0)));
            let k4 = f(&(&g + &k3.0 * h), &(&dg + &k3.1 * h), &(&vv + &k3.2 * h));
            g += (&k1.0 + &k2.0 * 2.0 + &k3.0 * 2.0 + &k4.0) * (h / 6.0);
            dg += (&k1.1 + &k2.1 * 2.0 + &k3.1 * 2.0 + &k4.1) * (h / 6.0);
            vv += (&k1.2 + &k2.2 * 2.0 + &k3.2 * 2.0 + &k4.2) * (h / 6.0);
        }
        let scale = 1.0 + vv.amax();
        assert!((spd.to_matrix(moved.comps()) - vv).amax() < 1e-8 * scale);
        assert!((spd.to_matrix(q.coords()) - g).amax() < 1e-8 * (1.0 + pm.amax()));
    }
}

#[test]
fn sphere_transport_matches_transport_ode() {
    // On the embedded sphere a parallel field along γ solves V' = -<V, γ'> γ.
    let s = make_manifold(ManifoldKind::Sphere, 2).unwrap();
    let north = s.point(vec![0.0, 0.0, 1.0]).unwrap();
    let east = s.point(vec![1.0, 0.0, 0.0]).unwrap();
    let v = s.tangent(&north, vec![0.0, 1.0, 0.0]).unwrap();
    let moved = s.parallel_transport(&north, &east, &v).unwrap();
    assert!((moved.comps() - DVector::from_vec(vec![0.0, 1.0, 0.0])).amax() < 1e-15);

    let s4 = make_manifold(ManifoldKind::Sphere, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let p = s4.random_point(&mut rng);
        let u = s4.random_tangent_with_norm(&p, rng.random_range(0.1..3.0), &mut rng);
        let v = s4.random_tangent(&p, &mut rng);
        let q = s4.exp(&p, &u).unwrap();
        let want = s4.parallel_transport(&p, &q, &v).unwrap();

        let theta = s4.norm(&u);
        let dir = u.comps() / theta;
        let gamma = |t: f64| p.coords() * (t * theta).cos() + &dir * (t * theta).sin();
        let dgamma = |t: f64| (-p.coords() * (t * theta).sin() + &dir * (t * theta).cos()) * theta;
        let rhs = |t: f64, x: &DVector<f64>| -gamma(t) * x.dot(&dgamma(t));
        let steps = 2000;
        let h = 1.0 / steps as f64;
        let mut x = v.comps().clone();
        for i in 0..steps {
            let t = i as f64 * h;
            let k1 = rhs(t, &x);
            let k2 = rhs(t + h / 2.0, &(&x + &k1 * (h / 2.0)));
            let k3 = rhs(t + h / 2.0, &(&x + &k2 * (h / 2.0)));
            let k4 = rhs(t + h, &(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        assert!((want.comps() - &x).amax() < 1e-9, "{} vs {}", want.comps(), x);
    }
}

#[test]
fn sphere_distance_matches_arccos_route() {
    let s = make_manifold(ManifoldKind::Sphere, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let p = s.random_point(&mut rng);
        let q = s.random_point(&mut rng);
        let c = p.coords().dot(q.coords());
        if c.abs() > 1.0 - 1e-6 {
            continue;
        }
        let d = s.distance(&p, &q).unwrap();
        assert!((d - c.acos()).abs() < 1e-10);
        if d < PI - 1e-3 {
            assert!((s.norm(&s.log(&p, &q).unwrap()) - d).abs() < 1e-10);
        }
    }
}

#[test]
fn spd_congruence_invariance() {
    let spd = Spd::new(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let p = spd.random_point(&mut rng);
        let q = spd.random_point(&mut rng);
        // Lower-triangular A with diagonal in [1, 10] and small off-diagonal:
        // condition number well under 10³.
        let a = DMatrix::from_fn(4, 4, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Equal => rng.random_range(1.0..10.0),
            std::cmp::Ordering::Greater => rng.random_range(-0.5..0.5),
            _ => 0.0,
        });
        let congr = |x: &riemopt::Point| {
            let c = &a * spd.to_matrix(x.coords()) * a.transpose();
            let c = (&c + c.transpose()) * 0.5;
            spd.point(spd.from_matrix(&c).as_slice().to_vec()).unwrap()
        };
        let d0 = spd.distance(&p, &q).unwrap();
        let d1 = spd.distance(&congr(&p), &congr(&q)).unwrap();
        assert!((d0 - d1).abs() <= 1e-8, "{d0} vs {d1}");
    }
}

#[test]
fn hyperbolic_squared_distance_value_and_gradient() {
    let h = make_manifold(ManifoldKind::Hyperboloid, 2).unwrap();
    let q = h.point(vec![0.0, 0.0, 1.0]).unwrap();
    let p = h.point(vec![sinh_series(1.0), 0.0, cosh_series(1.0)]).unwrap();
    let f = squared_distance_objective(&h, q, 2.0).unwrap();
    assert!((f.value(&p).unwrap() - 0.5).abs() < 1e-14);
    assert!((h.norm(&f.subgradient(&p).unwrap()) - 1.0).abs() < 1e-14);
}

#[test]
fn spd_two_anchor_karcher_mean_is_the_midpoint() {
    let spd = make_manifold(ManifoldKind::Spd, 2).unwrap();
    let id = spd.point(vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let a = spd.point(vec![4.0, 0.0, 0.0, 1.0]).unwrap();
    // exp_I(½ log_I A) = A^{1/2}
    let mid = spd.exp(&id, &spd.log(&id, &a).unwrap().scale(0.5)).unwrap();
    let want = [2.0, 0.0, 0.0, 1.0];
    for (x, y) in mid.as_slice().iter().zip(want) {
        assert!((x - y).abs() < 1e-14);
    }
    let f = karcher_objective(&spd, AnchorSet::unit(vec![id, a]).unwrap(), 2.0).unwrap();
    let ln2 = 2f64.ln();
    assert!((f.value(&mid).unwrap() - ln2 * ln2).abs() < 1e-14);
    assert!(spd.norm(&f.subgradient(&mid).unwrap()) < 1e-14);
    let opt = reference_optimum(&f, &ReferenceOptions::default()).unwrap();
    assert!(spd.distance(&opt.point, &mid).unwrap() < 1e-10);
    assert!((opt.f_star - ln2 * ln2).abs() < 1e-12);
}

/// Brute-force minimization on a square grid, refined around the best node.
fn grid_minimize(f: impl Fn(f64, f64) -> f64, mut cx: f64, mut cy: f64, mut half: f64) -> (f64, f64, f64) {
    let mut best = (f(cx, cy), cx, cy);
    for _ in 0..12 {
        let n = 200;
        for i in 0..=n {
            for j in 0..=n {
                let x = cx - half + 2.0 * half * i as f64 / n as f64;
                let y = cy - half + 2.0 * half * j as f64 / n as f64;
                let v = f(x, y);
                if v < best.0 {
                    best = (v, x, y);
                }
            }
        }
        cx = best.1;
        cy = best.2;
        half *= 0.05;
    }
    best
}

#[test]
fn euclidean_fermat_weber_against_grid_oracle() {
    let pts = [(0.0, 0.0), (2.0, 0.0), (1.0, 3.0)];
    let obj = |x: f64, y: f64| pts.iter().map(|(a, b)| ((x - a).powi(2) + (y - b).powi(2)).sqrt()).sum::<f64>();
    let (f_grid, x_grid, y_grid) = grid_minimize(obj, 1.0, 1.5, 1.5);
    // The 120° condition puts the median at (1, 1/√3) with value 3 + √3.
    assert!((f_grid - 4.732050807568877).abs() < 1e-12);
    assert!((x_grid - 1.0).abs() < 1e-6 && (y_grid - 0.5773502691896258).abs() < 1e-6);

    let m = make_manifold(ManifoldKind::Euclidean, 2).unwrap();
    let anchors = AnchorSet::unit(pts.iter().map(|&(a, b)| m.point(vec![a, b]).unwrap()).collect()).unwrap();
    let f = fermat_weber_objective(&m, anchors, f64::INFINITY).unwrap();
    let opt = reference_optimum(&f, &ReferenceOptions::default()).unwrap();
    assert!(opt.residual <= 1e-8);
    assert!((opt.f_star - f_grid).abs() < 1e-10);
    assert!((opt.point.as_slice()[1] - y_grid).abs() < 1e-6);
}

#[test]
fn hyperbolic_fermat_weber_against_chart_grid_oracle() {
    let h = make_manifold(ManifoldKind::Hyperboloid, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let anchors: Vec<_> = (0..3)
        .map(|_| {
            let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            h.project(vec![x, y, 0.0]).unwrap()
        })
        .collect();
    // Independent distance: acosh(-<p, q>_L) on the chart (x, y) ↦ (x, y, √(1+x²+y²)).
    let coords: Vec<(f64, f64, f64)> = anchors
        .iter()
        .map(|a| (a.as_slice()[0], a.as_slice()[1], a.as_slice()[2]))
        .collect();
    let obj = |x: f64, y: f64| {
        let t = (1.0 + x * x + y * y).sqrt();
        coords
            .iter()
            .map(|(a, b, c)| (t * c - x * a - y * b).max(1.0).acosh())
            .sum::<f64>()
    };
    let (f_grid, _, _) = grid_minimize(obj, 0.0, 0.0, 1.5);

    let f = fermat_weber_objective(&h, AnchorSet::unit(anchors).unwrap(), f64::INFINITY).unwrap();
    let opt = reference_optimum(&f, &ReferenceOptions::default()).unwrap();
    assert!(opt.residual <= 1e-8, "{}", opt.residual);
    assert!((opt.f_star - f_grid).abs() < 1e-7, "{} vs {f_grid}", opt.f_star);
}

#[test]
fn spherical_fermat_weber_reference_is_stationary() {
    let s = make_manifold(ManifoldKind::Sphere, 2).unwrap();
    let anchors = AnchorSet::unit(vec![
        s.project(vec![0.3, 0.0, 1.0]).unwrap(),
        s.project(vec![-0.2, 0.25, 1.0]).unwrap(),
        s.project(vec![0.0, -0.35, 1.0]).unwrap(),
    ])
    .unwrap();
    let f = fermat_weber_objective(&s, anchors, 1.0).unwrap();
    let opt = reference_optimum(&f, &ReferenceOptions::default()).unwrap();
    assert!(opt.residual <= 1e-8, "{}", opt.residual);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let p = f.domain().sample(&s, 1.0, &mut rng).unwrap();
        assert!(f.value(&p).unwrap() >= opt.f_star - opt.residual - 1e-12);
    }
}
