use mlglm::hopf::{
    hopf_evaluate, registry, verify_weak_solution, DomainOmega, FieldGrid, HopfField, HopfOptions,
    HopfSolver, Profile, SeparableInitialData, WeakSolutionTolerances,
};
use mlglm::Error;
use proptest::prelude::*;

fn solver(data: SeparableInitialData) -> HopfSolver {
    HopfSolver::new(data, &HopfOptions::default()).unwrap()
}

/// `sup_{z2} z2 x2 - psi2*(z2) + psi1(x1 + 2 t z2 / alpha)`, valid when
/// `R_CAP` exceeds the Lipschitz constant of `psi1`, by a dense grid on
/// `z2` followed by parabolic interpolation of the best cell.
fn reduced_oracle(
    data: &SeparableInitialData,
    conj2: impl Fn(f64) -> f64,
    t: f64,
    x: [f64; 2],
) -> f64 {
    let g = |z2: f64| z2 * x[1] - conj2(z2) + data.psi1.eval(x[0] + 2.0 * t * z2 / data.alpha);
    let cells = 20_000;
    let h = data.z2_max() / cells as f64;
    let values: Vec<f64> = (0..=cells).map(|i| g(i as f64 * h)).collect();
    let (best, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if best == 0 || best == cells {
        return values[best];
    }
    let (a, b, c) = (values[best - 1], values[best], values[best + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return b;
    }
    b - (c - a).powi(2) / (8.0 * denom)
}

fn hyperbolic_conj(m: f64, w: f64) -> impl Fn(f64) -> f64 {
    // y is unbounded above once z reaches the asymptotic slope m
    move |z: f64| if z < m { w * (m - (m * m - z * z).sqrt()) } else { f64::INFINITY }
}

fn softplus_conj(m: f64, s: f64) -> impl Fn(f64) -> f64 {
    let sp = |x: f64| if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    move |z: f64| {
        let q = z / m;
        if q >= 1.0 {
            return f64::INFINITY;
        }
        let y = s + (q / (1.0 - q)).ln();
        if y.is_nan() || y <= 0.0 {
            return 0.0;
        }
        z * y - m * (sp(y - s) - sp(-s))
    }
}

#[test]
fn initial_condition_matches_registry_data() {
    for (name, data) in registry() {
        let s = solver(data.clone());
        for i in 0..=32 {
            for j in 0..=32 {
                let x = [data.rho * i as f64 / 32.0, s.h2_max() * j as f64 / 32.0];
                let f = hopf_evaluate(0.0, x, &s).unwrap();
                assert!((f - data.eval(x)).abs() < 1e-6, "{name} at {x:?}: {f}");
            }
        }
    }
}

#[test]
fn reduced_formula_agrees() {
    let data = registry();
    type Conjugate = Box<dyn Fn(f64) -> f64>;
    let cases: Vec<(SeparableInitialData, Conjugate)> = vec![
        (data[0].1.clone(), Box::new(hyperbolic_conj(0.4, 1.0))),
        (data[1].1.clone(), Box::new(softplus_conj(0.6, 1.0))),
    ];
    for (d, conj) in cases {
        let s = solver(d.clone());
        for &(t, a, b) in &[(0.2, 0.3, 0.5), (0.5, 0.9, 1.0), (0.8, 0.1, 2.5), (1.0, 0.0, 3.0)] {
            let x = [a * d.rho * (1.0 - t), b * d.alpha * d.rho];
            let f = hopf_evaluate(t, x, &s).unwrap();
            let o = reduced_oracle(&d, &conj, t, x);
            assert!((f - o).abs() < 1e-6, "t = {t}, x = {x:?}: {f} vs {o}");
        }
    }
}

/// Dense brute-force nested optimization with `z` on a grid containing
/// the slopes of linear data and `y` on uniform grids.
fn brute_force(data: &SeparableInitialData, r_cap: f64, y_max: f64, t: f64, x: [f64; 2]) -> f64 {
    let (nz, ny) = (400, 400);
    let y1: Vec<f64> = (0..=ny).map(|i| data.rho * i as f64 / ny as f64).collect();
    let y2: Vec<f64> = (0..=ny).map(|i| y_max * i as f64 / ny as f64).collect();
    let psi1: Vec<f64> = y1.iter().map(|&y| data.psi1.eval(y)).collect();
    let psi2: Vec<f64> = y2.iter().map(|&y| data.psi2.eval(y)).collect();
    let inf = |z: f64, ys: &[f64], ps: &[f64], xi: f64| {
        ys.iter().zip(ps).map(|(y, p)| z * (xi - y) + p).fold(f64::INFINITY, f64::min)
    };
    let mut best = f64::NEG_INFINITY;
    for i in 0..=nz {
        let z1 = r_cap * i as f64 / nz as f64;
        let a = inf(z1, &y1, &psi1, x[0]);
        for j in 0..=nz {
            let z2 = data.z2_max() * j as f64 / nz as f64;
            let v = a + inf(z2, &y2, &psi2, x[1]) + t * 2.0 / data.alpha * z1 * z2;
            best = best.max(v);
        }
    }
    best
}

#[test]
fn linear_data_is_transported() {
    // c1 = 0.3 and c2 = 0.15 lie on the brute-force z grids
    let (c1, c2, alpha, rho) = (0.3, 0.15, 1.0, 1.0);
    let data = SeparableInitialData::new(Profile::Linear { c: c1 }, Profile::Linear { c: c2 }, alpha, rho).unwrap();
    let opts = HopfOptions { r_cap: Some(0.6), y_max: Some(8.0), ..Default::default() };
    let s = HopfSolver::new(data.clone(), &opts).unwrap();
    for &(t, x1, x2) in &[(0.0, 0.5, 1.0), (0.3, 0.2, 0.7), (0.6, 0.4, 2.0), (0.9, 0.05, 3.5)] {
        let exact = c1 * x1 + c2 * x2 + t * 2.0 / alpha * c1 * c2;
        let v = hopf_evaluate(t, [x1, x2], &s).unwrap();
        assert!((v - exact).abs() < 1e-6, "({t}, {x1}, {x2}): {v} vs {exact}");
        let b = brute_force(&data, 0.6, 8.0, t, [x1, x2]);
        assert!((b - exact).abs() < 1e-6, "brute force ({t}, {x1}, {x2}): {b} vs {exact}");
    }
}

#[test]
fn steep_psi2_is_rejected() {
    let err = SeparableInitialData::new(
        Profile::Linear { c: 0.1 },
        Profile::Linear { c: 0.6 },
        1.0,
        1.0,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Invalid { .. }), "{err}");
    // decreasing and concave profiles fail the shape check
    assert!(SeparableInitialData::new(Profile::Linear { c: -0.1 }, Profile::Linear { c: 0.1 }, 1.0, 1.0).is_err());
    assert!(SeparableInitialData::new(
        Profile::Quadratic { a: 0.5, b: -0.2 },
        Profile::Linear { c: 0.1 },
        1.0,
        1.0
    )
    .is_err());
}

#[test]
fn points_outside_the_domain_are_rejected() {
    let (_, data) = registry().remove(0);
    let s = solver(data);
    assert!(hopf_evaluate(0.5, [0.6, 0.0], &s).is_err());
    assert!(hopf_evaluate(-0.1, [0.0, 0.0], &s).is_err());
    assert!(hopf_evaluate(0.5, [0.2, -1e-3], &s).is_err());
    assert!(hopf_evaluate(1.0, [0.0, 0.0], &s).is_ok());
}

#[test]
fn small_caps_are_reported() {
    let (_, data) = registry().remove(0);
    let opts = HopfOptions { y_max: Some(4.05), ..Default::default() };
    let s = HopfSolver::new(data, &opts).unwrap();
    match hopf_evaluate(1.0, [0.0, 4.0], &s) {
        Err(Error::Truncation(_)) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn constants_shift_the_solution() {
    for (_, data) in registry() {
        let base = solver(data.clone());
        let moved = solver(data.shifted(0.37));
        let grid = FieldGrid::cubic(6);
        let a = HopfField::compute(&base, grid).unwrap();
        let b = HopfField::compute(&moved, grid).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((y - x - 0.37).abs() < 1e-12, "{x} {y}");
        }
    }
}

#[test]
fn field_is_monotone_and_partially_convex() {
    for (name, data) in registry() {
        let s = solver(data);
        let field = HopfField::compute(&s, FieldGrid::cubic(10)).unwrap();
        let report = verify_weak_solution(&field, &WeakSolutionTolerances::default());
        assert!(report.d1_min >= -1e-8, "{name}: {report:?}");
        assert!(report.d2_min >= -1e-8, "{name}: {report:?}");
        assert!(report.derivative_ranges_ok, "{name}: {report:?}");
        assert!(report.partial_convexity_ok, "{name}: {report:?}");
        assert!(report.residual_points > 0);
    }
}

#[test]
fn domain_membership() {
    let d = DomainOmega::new(2.0).unwrap();
    assert!(d.contains(0.5, [1.0, 3.0]));
    assert!(!d.contains(0.5, [1.01, 3.0]));
    assert!(!d.contains(0.5, [0.5, -1.0]));
    assert!(DomainOmega::new(0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hopf_values_are_monotone(t in 0.0f64..0.95, a in 0.0f64..0.9, b in 0.0f64..3.0, d in 0.01f64..0.1) {
        let (_, data) = registry().remove(1);
        let s = solver(data.clone());
        let x = [a * data.rho * (1.0 - t), b];
        let f = hopf_evaluate(t, x, &s).unwrap();
        let f1 = hopf_evaluate(t, [x[0] + d * data.rho * (1.0 - t) * 0.1, x[1]], &s).unwrap();
        let f2 = hopf_evaluate(t, [x[0], x[1] + d], &s).unwrap();
        prop_assert!(f1 - f >= -1e-8);
        prop_assert!(f2 - f >= -1e-8);
        prop_assert!(f2 - f <= data.z2_max() * d + 1e-8);
    }
}
