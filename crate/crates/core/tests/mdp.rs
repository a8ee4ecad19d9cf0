use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rfcw::mdp::*;
use rfcw::par::Execution;
use rfcw::verify::critical_drift_config;
use rfcw::Error;

/// Nearest-neighbour walk on hℤ with drift −x³ and diffusion D, sampled
/// every `dt`: rows [x, 0, Δx].
fn cubic_walk(replicas: u64, t_end: f64, dt: f64) -> Vec<[f64; 3]> {
    let (h, d) = (0.02, 0.2);
    let base = d / (h * h);
    let mut rows = Vec::new();
    for r in 0..replicas {
        let mut rng = ChaCha8Rng::seed_from_u64(r);
        let mut x: f64 = rng.random_range(-1.5..1.5);
        x = (x / h).round() * h;
        let mut t = 0.0;
        let mut next = dt;
        let mut last = x;
        while next <= t_end {
            let b = -x.powi(3);
            let up = (base + b / (2.0 * h)).max(0.0);
            let down = (base - b / (2.0 * h)).max(0.0);
            let hold: f64 = Exp1.sample(&mut rng);
            let t_jump = t + hold / (up + down);
            while next <= t_end && next < t_jump {
                rows.push([last, 0.0, x - last]);
                last = x;
                next += dt;
            }
            t = t_jump;
            x += if rng.random::<f64>() * (up + down) < up {
                h
            } else {
                -h
            };
        }
    }
    rows
}

#[test]
fn binning_recovers_a_known_drift() {
    let rows = cubic_walk(400, 40.0, 0.01);
    let rep = bin_increments(&rows, 0.01, 12, 1.0, |x, _| -x.powi(3));
    let a = rep.assess(0.6, 1.4, 0.25);
    assert!(
        a.passed && a.bins_checked >= 4,
        "{a:?} {:?}",
        rep.relative_errors(0.6, 1.4)
    );
    for i in 0..rep.bin_centers.len() {
        let z = (rep.drift_hat[i] - rep.reference_drift[i]) / rep.stderr[i];
        assert!(z.abs() < 4.0, "bin {}: z = {z}", rep.bin_centers[i]);
    }
    for (i, c) in rep.bin_centers.iter().enumerate() {
        if c.abs() < 1.2 {
            // 2D = 0.4
            assert!(
                (rep.diffusion_hat[i] - 0.4).abs() < 0.02,
                "bin {c}: {}",
                rep.diffusion_hat[i]
            );
        }
    }
    assert!(rep.empty_bins.is_empty());
}

#[test]
fn reference_is_averaged_within_bins() {
    // percentile range [0.011, 0.991], split at 0.501
    let rows: Vec<[f64; 3]> = (0..=100)
        .map(|i| [i as f64 / 100.0 + 0.001, 0.0, 0.0])
        .collect();
    let rep = bin_increments(&rows, 1.0, 2, 1.0, |x, _| x);
    assert_eq!(rep.counts, vec![49, 50]);
    assert!((rep.reference_drift[0] - 0.251).abs() < 1e-12);
    assert!((rep.reference_drift[1] - 0.746).abs() < 1e-12);
}

#[test]
fn drift_csv_round_trip() {
    let rows: Vec<[f64; 3]> = (0..200)
        .map(|i| [i as f64 / 100.0 - 1.0, 0.0, 1e-3 * (i % 7) as f64])
        .collect();
    let rep = bin_increments(&rows, 0.01, 5, 2.0, |x, _| -x);
    let back = DriftReport::from_csv(&rep.to_csv()).unwrap();
    assert_eq!(back.bin_centers, rep.bin_centers);
    assert_eq!(back.drift_hat, rep.drift_hat);
    assert_eq!(back.reference_drift, rep.reference_drift);
    assert!(DriftReport::from_csv("x,y\n1,2\n").is_err());
}

#[test]
fn config_validation_lists_problems() {
    let mut cfg = critical_drift_config(1, 10, Execution::Sequential).unwrap();
    cfg.nu = 4;
    cfg.alpha = 0.5;
    cfg.bins = 0;
    let Err(Error::Precondition(msg)) = estimate_drift(&cfg) else {
        panic!("expected a precondition error");
    };
    assert!(msg.contains("nu = 2"), "{msg}");
    assert!(msg.contains("alpha"), "{msg}");
    assert!(msg.contains("bins"), "{msg}");
}

#[test]
fn config_json_defaults() {
    let cfg = critical_drift_config(1, 10, Execution::Sequential).unwrap();
    let mut v = serde_json::to_value(&cfg).unwrap();
    let obj = v.as_object_mut().unwrap();
    for k in [
        "window",
        "burn_in",
        "start_range",
        "disorder",
        "execution",
        "coordinate",
    ] {
        obj.remove(k);
    }
    let back: EnsembleConfig = serde_json::from_value(v).unwrap();
    assert_eq!(back.window, 0.01);
    assert_eq!(back.start_range, (0.5, 1.6));
    assert_eq!(back.disorder, DisorderMode::Quenched);
    assert_eq!(back.coordinate, Coordinate::X);
}

fn small_ensemble(replicas: usize, start: (f64, f64)) -> EnsembleConfig {
    let mut cfg = critical_drift_config(17, replicas, Execution::default()).unwrap();
    cfg.n = 10_000;
    cfg.start_range = start;
    cfg.bins = 9;
    cfg
}

#[test]
fn drift_at_origin_is_unbiased() {
    let rep = estimate_drift(&small_ensemble(300, (0.0, 1.6))).unwrap();
    let mid = (0..rep.bin_centers.len())
        .min_by(|&a, &b| {
            rep.bin_centers[a]
                .abs()
                .total_cmp(&rep.bin_centers[b].abs())
        })
        .unwrap();
    let t = (rep.drift_hat[mid] - rep.reference_drift[mid]) / rep.stderr[mid];
    assert!(t.abs() < 3.0, "t = {t}, bin {}", rep.bin_centers[mid]);
    assert!(rep.reference_diffusion > 0.0 && rep.b_n > 2.5);
}

#[test]
fn ensembles_are_reproducible_across_execution_modes() {
    let mut cfg = small_ensemble(8, (0.3, 1.6));
    cfg.execution = Execution::Sequential;
    let a = estimate_drift(&cfg).unwrap();
    cfg.execution = Execution::Parallel;
    let b = estimate_drift(&cfg).unwrap();
    // empty bins hold NaN, so compare the serialized form
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.counts, b.counts);
    assert_eq!(a.max_scaled_disorder, b.max_scaled_disorder);
}

#[test]
fn balanced_disorder_has_no_offset() {
    let mut cfg = small_ensemble(4, (0.3, 1.6));
    cfg.disorder = DisorderMode::Balanced;
    assert_eq!(estimate_drift(&cfg).unwrap().max_scaled_disorder, 0.0);
}

#[test]
fn fast_coordinate_relaxes_at_predicted_rate() {
    let mut cfg = small_ensemble(200, (0.0, 0.0));
    cfg.t_end = 0.5;
    cfg.window = 0.002;
    cfg.burn_in = 0.05;
    let rep = q_relaxation_check(&cfg).unwrap();
    assert!(rep.fit_ok, "{rep:?}");
    assert!(
        rep.relative_error < 0.3,
        "fitted {} vs {}",
        rep.fitted_rate,
        rep.predicted_rate
    );
}

#[test]
fn paramagnetic_linear_drift() {
    use rfcw::hamjac::Regime;
    use rfcw::model::ModelParams;
    let (beta, b) = (0.8f64, 0.5f64);
    let c = (beta * b).cosh();
    let mut cfg = critical_drift_config(5, 200, Execution::default()).unwrap();
    cfg.params = ModelParams::new(beta, b).unwrap();
    cfg.regime = Regime::Para2D;
    cfg.nu = 0;
    cfg.n = 10_000;
    cfg.alpha = 0.25;
    cfg.t_end = 2.0;
    cfg.start_range = (0.0, 2.0);
    for (coord, rate) in [
        (Coordinate::X, 2.0 * (beta - c * c) / c),
        (Coordinate::Y, -2.0 * c),
    ] {
        cfg.coordinate = coord;
        let rep = estimate_drift(&cfg).unwrap();
        // the other coordinate averages out, so compare slopes through bulk bins
        let bulk: Vec<usize> = (0..rep.bin_centers.len())
            .filter(|&i| (0.4..=1.2).contains(&rep.bin_centers[i].abs()))
            .collect();
        assert!(bulk.len() >= 2);
        for &i in &bulk {
            let want = rate * rep.bin_centers[i];
            assert!(
                (rep.drift_hat[i] - rep.reference_drift[i]).abs()
                    < 0.25 * rep.reference_drift[i].abs(),
                "{coord:?} bin {}",
                rep.bin_centers[i]
            );
            assert!((rep.reference_drift[i] - want).abs() < 0.25 * want.abs());
            assert!((rep.diffusion_hat[i] / rep.reference_diffusion - 1.0).abs() < 0.3);
        }
        assert!((rep.reference_diffusion - 4.0 / c).abs() < 1e-12);
    }
}
