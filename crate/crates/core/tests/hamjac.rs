use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfcw::dynamics::{Coordinates, Trajectory};
use rfcw::hamjac::*;
use rfcw::model::{g1, tricritical_field, MacroState, ModelParams, ScalingCase};
use rfcw::par::Execution;
use rfcw::verify::{hamiltonian_convergence_errors, random_quadratic_hamiltonian};
use rfcw::Error;

/// sup_v (p·v − L(x,v)) by golden-section search on a bracket.
fn sup_1d(l: &Lagrangian, x: f64, p: f64) -> f64 {
    let g = |v: f64| p * v - l.eval(&[x], &[v]);
    let (mut a, mut b) = (-1e3, 1e3);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if g(c) > g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    g(0.5 * (a + b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn legendre_duality_1d(seed in any::<u64>(), x in -1.5f64..1.5, p in -2.0f64..2.0) {
        let h = random_quadratic_hamiltonian(&mut ChaCha8Rng::seed_from_u64(seed), false);
        let l = legendre(&h).unwrap();
        let want = h.eval(&[x], &[p]);
        prop_assert!((sup_1d(&l, x, p) - want).abs() < 1e-7 * want.abs().max(1.0));
        prop_assert!(legendre_gap(&h, &l, &[x], &[p]) < 1e-10 * want.abs().max(1.0));
    }

    #[test]
    fn legendre_duality_2d(seed in any::<u64>(), x in prop::array::uniform2(-1.5f64..1.5), p in prop::array::uniform2(-2.0f64..2.0)) {
        let h = random_quadratic_hamiltonian(&mut ChaCha8Rng::seed_from_u64(seed), true);
        let l = legendre(&h).unwrap();
        let v = h.optimal_velocity(&x, &p);
        let at = |v: &[f64]| p[0] * v[0] + p[1] * v[1] - l.eval(&x, v);
        let best = at(&v);
        prop_assert!((best - h.eval(&x, &p)).abs() < 1e-10 * best.abs().max(1.0));
        // v* is a maximum: nearby velocities do no better
        for (dx, dy) in [(1e-3, 0.0), (0.0, 1e-3), (-1e-3, 1e-3), (2e-3, -1e-3)] {
            prop_assert!(at(&[v[0] + dx, v[1] + dy]) <= best + 1e-12);
        }
        prop_assert!(l.eval(&x, &h.drift(&x)).abs() < 1e-12);
    }

    #[test]
    fn lagrangian_is_nonnegative(seed in any::<u64>(), x in prop::array::uniform2(-1.5f64..1.5), v in prop::array::uniform2(-5.0f64..5.0)) {
        let h = random_quadratic_hamiltonian(&mut ChaCha8Rng::seed_from_u64(seed), true);
        prop_assert!(legendre(&h).unwrap().eval(&x, &v) >= -1e-12);
    }
}

#[test]
fn singular_sigma_reports_null_direction() {
    let h = QuadraticHamiltonian::two_d([[1.0, 0.0], [0.0, 1.0]], [[1.0, 1.0], [1.0, 1.0]]);
    let Err(Error::SingularSigma { null_direction }) = legendre(&h) else {
        panic!("expected a singular covariance");
    };
    let r = std::f64::consts::FRAC_1_SQRT_2;
    assert!((null_direction[0] * null_direction[1] + 0.5).abs() < 1e-12);
    assert!((null_direction[0].abs() - r).abs() < 1e-12);
    let flat = QuadraticHamiltonian::one_d(BTreeMap::new(), 0.0);
    assert!(matches!(legendre(&flat), Err(Error::SingularSigma { .. })));
}

#[test]
fn critical_lagrangian_prefactor() {
    let beta = 1.25;
    let p = ModelParams::new(beta, g1(beta).unwrap()).unwrap();
    let h = limit_hamiltonian(Regime::Critical, &p).unwrap();
    assert_eq!(h.regime, Some(Regime::Critical));
    // cosh(β g1(β)) = √β
    assert!((h.sigma[0][0] - 2.0 / beta.sqrt()).abs() < 1e-14);
    let l = legendre(&h).unwrap();
    let x = 0.4;
    let b = h.drift(&[x])[0];
    assert!((l.eval(&[x], &[b + 1.0]) - beta.sqrt() / 8.0).abs() < 1e-14);
    let want = 2.0 / 3.0 * beta * (2.0 * beta - 3.0) * beta.sqrt();
    assert!((b - want * x.powi(3)).abs() < 1e-13);
}

#[test]
fn paramagnetic_2d_hamiltonian() {
    let p = ModelParams::new(0.8, 0.5).unwrap();
    let h = limit_hamiltonian(Regime::Para2D, &p).unwrap();
    let c = (0.8f64 * 0.5).cosh();
    assert!((h.sigma[0][0] - 2.0 / c).abs() < 1e-14 && h.sigma[0][1].abs() < 1e-14);
    let Drift::Linear(a) = h.drift_coefficients else {
        panic!("expected a linear drift");
    };
    // trace of βĜ₁ − 2𝔹 is negative at a stable point
    assert!(a[0][0] + a[1][1] < 0.0);
    assert!(legendre(&h).is_ok());
}

#[test]
fn regime_preconditions() {
    let off = ModelParams::new(2.0, 0.3).unwrap();
    assert!(matches!(
        limit_hamiltonian(Regime::Critical, &off),
        Err(Error::Precondition(_))
    ));
    assert!(matches!(
        limit_hamiltonian(Regime::TriCritical, &off),
        Err(Error::Precondition(_))
    ));
    let tc = ModelParams::new(1.5, tricritical_field()).unwrap();
    let flat = limit_hamiltonian(Regime::Critical, &tc).unwrap();
    assert!(flat.drift(&[0.7])[0].abs() < 1e-12);
    assert!(matches!(
        limit_hamiltonian(Regime::TriCriticalArbitrary, &tc),
        Err(Error::Precondition(_))
    ));
    let pert = tc
        .with_perturbation(0.5, 0.5, ScalingCase::BnMinus4)
        .unwrap();
    assert!(limit_hamiltonian(Regime::TriCriticalArbitrary, &pert).is_ok());
    assert!(matches!(
        limit_hamiltonian(Regime::Para2D, &ModelParams::new(2.0, 0.1).unwrap()),
        Err(Error::Precondition(_))
    ));
    assert!(limit_hamiltonian(Regime::Ferro2D, &ModelParams::new(2.0, 0.1).unwrap()).is_ok());
}

#[test]
fn regime_names_parse() {
    for r in Regime::ALL {
        assert_eq!(
            format!("{r:?}").to_lowercase().parse::<Regime>().unwrap(),
            r
        );
    }
    assert!("critical2".parse::<Regime>().is_err());
    assert_eq!(Regime::TriCriticalOnCurve.nu(), 4);
}

#[test]
fn quasipotential_solves_the_stationary_equation() {
    let p = ModelParams::new(1.5, tricritical_field()).unwrap();
    let h = limit_hamiltonian(Regime::TriCritical, &p).unwrap();
    let grid: Vec<f64> = (0..=400).map(|i| -2.0 + 0.01 * i as f64).collect();
    let (sp, res) = quasipotential_check(&h, &grid).unwrap();
    assert!(res < 1e-12);
    // S′ = −b/Σ with b = c·x⁵, c < 0
    assert!(sp[300] > 0.0 && sp[100] < 0.0);
}

#[test]
fn action_of_paths() {
    let h = QuadraticHamiltonian::one_d(BTreeMap::from([(1, -1.0)]), 0.5);
    let l = legendre(&h).unwrap();
    let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
    // along the flow x = e^{−t} the cost vanishes
    let relax = Trajectory {
        states: times
            .iter()
            .map(|t| MacroState::new((-t).exp(), 0.0))
            .collect(),
        times: times.clone(),
        coords: Coordinates::Fluctuation,
    };
    assert!(action_integral(&l, &relax).unwrap() < 1e-6);
    // x = t: L = ¼·2·(1 + t)², integral 7/6
    let line = Trajectory {
        states: times.iter().map(|t| MacroState::new(*t, 0.0)).collect(),
        times,
        coords: Coordinates::Fluctuation,
    };
    assert!((action_integral(&l, &line).unwrap() - 7.0 / 6.0).abs() < 1e-6);
    let short = Trajectory {
        states: vec![MacroState::new(0.0, 0.0)],
        times: vec![0.0],
        coords: Coordinates::Fluctuation,
    };
    assert!(action_integral(&l, &short).is_err());
}

#[test]
fn jet_derivatives_of_gaussian() {
    // d^k/dx^k exp(−x²) at x = 0.3 via Hermite polynomials
    let x = 0.3;
    let j = Jet::var(x, 4);
    let e = (&j * &j).scale(-1.0).exp().derivatives();
    let g = (-x * x).exp();
    let herm = [
        1.0,
        -2.0 * x,
        4.0 * x * x - 2.0,
        -8.0 * x.powi(3) + 12.0 * x,
        16.0 * x.powi(4) - 48.0 * x * x + 12.0,
    ];
    for k in 0..=4 {
        assert!((e[k] - herm[k] * g).abs() < 1e-14, "k={k}");
    }
    let r = Jet::var(2.0, 3).recip().derivatives();
    assert!((r[3] + 6.0 / 16.0).abs() < 1e-15);
    assert_eq!(
        Jet::var(1.5, 2).powi(3).derivatives(),
        vec![3.375, 6.75, 9.0]
    );
}

#[test]
fn bumped_poly_derivatives_match_differences() {
    let f = BumpedPoly::quadratic_gaussian();
    for x in [-2.5, -0.7, 0.0, 0.4, 1.9] {
        let d = f.derivatives(x, 2);
        let h = 1e-5;
        let fd1 = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
        let fd2 = (f.derivatives(x + h, 1)[1] - f.derivatives(x - h, 1)[1]) / (2.0 * h);
        assert!((d[1] - fd1).abs() < 1e-8);
        assert!((d[2] - fd2).abs() < 1e-8);
    }
    assert_eq!(f.derivatives(3.0, 3), vec![0.0; 4]);
}

#[test]
fn expansion_tracks_exact_hamiltonian() {
    let p = ModelParams::new(0.8, 0.5).unwrap();
    let f = Product2D {
        fx: BumpedPoly::new(vec![0.5, 1.0, -0.3], 0.5),
        fy: BumpedPoly::new(vec![1.0, 0.2], 0.8),
    };
    let grid = Grid::square(-1.0, 1.0, 41);
    let ns = [1e4, 1e6, 1e8];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let setup = HamiltonianSetup {
                params: p,
                center: p.paramagnetic_point(),
                n,
                b_n: n.powf(0.1),
                nu: 0,
                eta_bar: 0.1,
            };
            let a = finite_n_hamiltonian(&setup, &f, &grid, Execution::default()).unwrap();
            let b = expansion_hamiltonian(&setup, &f, &grid, Execution::default()).unwrap();
            a.sup_diff(&b)
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    // the cubic remainder of the jump exponentials is O(1/b_n)
    for (e, n) in errs.iter().zip(ns) {
        assert!(e * n.powf(0.1) < 1.5, "{errs:?}");
    }
}

#[test]
fn bad_setups_are_rejected() {
    let p = ModelParams::new(0.8, 0.5).unwrap();
    let f = OnlyX(BumpedPoly::quadratic_gaussian());
    let mut setup = HamiltonianSetup {
        params: p,
        center: p.paramagnetic_point(),
        n: 1e4,
        b_n: 2.0,
        nu: 3,
        eta_bar: 0.0,
    };
    let g = Grid::square(-1.0, 1.0, 5);
    assert!(finite_n_hamiltonian(&setup, &f, &g, Execution::default()).is_err());
    setup.nu = 2;
    setup.b_n = 0.0;
    assert!(expansion_hamiltonian(&setup, &f, &g, Execution::default()).is_err());
}

/// With b_n = n^0.1 the sup error still falls with n; this is a diagnostic
/// only, the gated bound uses n^0.05.
#[test]
fn faster_scale_diagnostic() {
    let errs = hamiltonian_convergence_errors(Execution::default(), 0.1, &[1e4, 1e6, 1e8]).unwrap();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn hamiltonians_survive_json() {
    let p = ModelParams::new(1.25, g1(1.25).unwrap()).unwrap();
    for (regime, p) in [
        (Regime::Critical, p),
        (Regime::Para2D, ModelParams::new(0.8, 0.5).unwrap()),
    ] {
        let h = limit_hamiltonian(regime, &p).unwrap();
        let back: QuadraticHamiltonian =
            serde_json::from_str(&serde_json::to_string(&h).unwrap()).unwrap();
        assert_eq!(back, h);
    }
    let bad = r#"{"drift_coefficients":{"x":1.0},"sigma":[[1.0]]}"#;
    assert!(serde_json::from_str::<QuadraticHamiltonian>(bad).is_err());
}
