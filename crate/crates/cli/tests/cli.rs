use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use clap::Parser;
use rfcw::dynamics::{Coordinates, Trajectory};
use rfcw::hamjac::{Lagrangian, QuadraticHamiltonian};
use rfcw::io::{parse_grid_comparison_csv, parse_trajectory_csv};
use rfcw::mdp::{DriftReport, RelaxationReport};
use rfcw::model::{tricritical_field, PhaseReport, Region};
use rfcw::verify::VerifyReport;
use rfcw_cli::*;

fn rfcw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfcw"))
        .args(args)
        .env(OUT_DIR_ENV, dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = rfcw(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> T {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn config_examples() {
    let cfg = parse_config(r#"{"cmd":"phase","beta":2.0,"B":0.1}"#).unwrap();
    assert_eq!(cfg.job.name(), "phase");
    let errs = parse_config(r#"{"cmd":"phase","beta":-1}"#).unwrap_err();
    assert!(
        errs.0.iter().any(|e| e == "beta must be positive"),
        "{errs}"
    );
    let cfg = parse_config(r#"{"cmd":"expand","beta":1.5,"B":"tc","nu":4}"#).unwrap();
    let Job::Expand(a) = cfg.job else {
        panic!("expected expand")
    };
    assert_eq!(a.nu, 4);
    assert_eq!(a.point.field.resolve(1.5).unwrap(), tricritical_field());
}

#[test]
fn config_reports_every_problem() {
    let errs =
        parse_config(r#"{"cmd":"ode","beta":0.5,"B":"g7","dt":"small","colour":1,"t_end":-1}"#)
            .unwrap_err();
    let text = errs.to_string();
    for needle in [
        "key \"B\"",
        "key \"dt\"",
        "unknown key \"colour\"",
        "t_end must be nonnegative",
    ] {
        assert!(text.contains(needle), "missing {needle:?} in {text}");
    }
    assert!(errs.0.len() >= 4);
    let errs = parse_config(r#"{"cmd":"hamiltonian","beta":1.25}"#).unwrap_err();
    assert!(
        errs.0.contains(&"missing key \"regime\"".to_string()),
        "{errs}"
    );
    assert!(errs.0.contains(&"missing key \"B\"".to_string()), "{errs}");
}

#[test]
fn config_document_errors() {
    assert!(parse_config("{").unwrap_err().0[0].starts_with("malformed document"));
    assert!(parse_config("[1]").is_err());
    assert!(parse_config(r#"{"beta":1}"#).unwrap_err().0[0].contains("cmd"));
    assert!(parse_config(r#"{"cmd":"plot"}"#).unwrap_err().0[0].contains("unknown cmd"));
    let errs = parse_config(r#"{"cmd":"verify","format":"xml","out":3}"#).unwrap_err();
    assert_eq!(errs.0.len(), 2, "{errs}");
    let cfg = parse_config(
        r#"{"cmd":"verify","suite":["symbolic","montecarlo"],"format":"json","out":"res"}"#,
    )
    .unwrap();
    assert_eq!(cfg.format, Format::Json);
    assert_eq!(cfg.out.as_deref(), Some(Path::new("res")));
}

#[test]
fn named_fields_need_their_domain() {
    assert!(parse_config(r#"{"cmd":"phase","beta":2.0,"B":"tc"}"#).is_err());
    assert!(parse_config(r#"{"cmd":"phase","beta":0.8,"B":"g1"}"#).is_err());
    assert!(parse_config(r#"{"cmd":"phase","beta":2.0,"B":"g2"}"#).is_ok());
}

#[derive(Parser)]
struct Wrapper {
    #[command(subcommand)]
    job: Job,
}

#[test]
fn flags_and_config_agree() {
    let cases = [
        (
            vec!["phase", "--beta", "2", "--B", "0.1"],
            r#"{"cmd":"phase","beta":2,"B":0.1}"#,
        ),
        (
            vec!["ode", "--beta", "1.2", "--B", "g1", "--m0", "-0.3"],
            r#"{"cmd":"ode","beta":1.2,"B":"g1","m0":-0.3}"#,
        ),
        (
            vec![
                "simulate",
                "--beta",
                "1",
                "--B",
                "0.2",
                "--n",
                "500",
                "--rescale-nu",
                "2",
            ],
            r#"{"cmd":"simulate","beta":1,"B":0.2,"n":500,"rescale_nu":2}"#,
        ),
        (
            vec![
                "fluctuations",
                "--regime",
                "critical",
                "--beta",
                "1.25",
                "--B",
                "g1",
                "--replicas",
                "3",
            ],
            r#"{"cmd":"fluctuations","regime":"Critical","beta":1.25,"B":"g1","replicas":3}"#,
        ),
        (
            vec![
                "expand",
                "--beta",
                "1.5",
                "--B",
                "tc",
                "--nu",
                "4",
                "--kappa",
                "0.5",
                "--scaling",
                "bn-4",
            ],
            r#"{"cmd":"expand","beta":1.5,"B":"tc","nu":4,"kappa":0.5,"scaling":"bn-4"}"#,
        ),
        (
            vec![
                "hamiltonian",
                "--regime",
                "para2d",
                "--beta",
                "0.8",
                "--B",
                "0.5",
                "--execution",
                "sequential",
            ],
            r#"{"cmd":"hamiltonian","regime":"Para2D","beta":0.8,"B":0.5,"execution":"sequential"}"#,
        ),
        (
            vec!["verify", "--suite", "mc", "--seed", "3"],
            r#"{"cmd":"verify","suite":["montecarlo"],"seed":3}"#,
        ),
    ];
    for (args, doc) in cases {
        let mut argv = vec!["rfcw"];
        argv.extend(args.iter().copied());
        let flags = Wrapper::try_parse_from(&argv).unwrap().job;
        let cfg = parse_config(doc).unwrap().job;
        assert_eq!(flags, cfg, "{args:?}");
    }
}

#[test]
fn phase_and_expand_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["phase", "--beta", "1.5", "--B", "tc"]);
    assert!(out.contains("TriCritical"));
    let rep: PhaseReport = read_json(dir.path().join("phase.json"));
    assert_eq!(rep.region, Region::TriCritical);

    ok(
        dir.path(),
        &["expand", "--beta", "1.25", "--B", "g1", "--nu", "2"],
    );
    let doc: serde_json::Value = read_json(dir.path().join("expansion.json"));
    let c = doc["drift"]["3"].as_f64().unwrap();
    assert!((c + 0.4658475).abs() < 1e-7, "{c}");
    assert_eq!(doc["layers"].as_array().unwrap().len(), 3);
    let p0: rfcw::opcalc::VExpression =
        serde_json::from_value(doc["layers"][2]["p0"].clone()).unwrap();
    assert!((p0.coefficient(3, 0, 1) - c).abs() < 1e-15);
}

#[test]
fn trajectories_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--beta",
        "1.25",
        "--B",
        "g1",
        "--n",
        "20000",
        "--t-end",
        "1",
        "--points",
        "11",
        "--rescale-nu",
        "2",
    ];
    ok(dir.path(), &args);
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let traj = parse_trajectory_csv(&text).unwrap();
    assert_eq!(traj.len(), 11);
    assert_eq!(traj.coords, Coordinates::Macro);
    let resc = parse_trajectory_csv(
        &fs::read_to_string(dir.path().join("trajectory_rescaled.csv")).unwrap(),
    )
    .unwrap();
    assert_eq!(resc.coords, Coordinates::Fluctuation);

    // same seed, same bytes
    let again = tempfile::tempdir().unwrap();
    ok(again.path(), &args);
    assert_eq!(
        text,
        fs::read_to_string(again.path().join("trajectory.csv")).unwrap()
    );

    ok(
        dir.path(),
        &[
            "ode", "--beta", "2", "--B", "0.1", "--t-end", "1", "--format", "json",
        ],
    );
    let ode: Trajectory = read_json(dir.path().join("ode.json"));
    assert_eq!(ode.len(), 101);
    ok(
        dir.path(),
        &["ode", "--beta", "2", "--B", "0.1", "--t-end", "1"],
    );
    let csv =
        parse_trajectory_csv(&fs::read_to_string(dir.path().join("ode.csv")).unwrap()).unwrap();
    assert_eq!(csv, ode);
}

#[test]
fn hamiltonian_outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "hamiltonian",
            "--regime",
            "critical",
            "--beta",
            "1.25",
            "--B",
            "g1",
            "--compare-n",
            "1e6",
            "--grid-points",
            "11",
        ],
    );
    let h: QuadraticHamiltonian = read_json(dir.path().join("hamiltonian.json"));
    assert!((h.drift(&[1.0])[0] + 0.4658475).abs() < 1e-7);
    let rows = parse_grid_comparison_csv(
        &fs::read_to_string(dir.path().join("hamiltonian_grid.csv")).unwrap(),
    )
    .unwrap();
    assert_eq!(rows.len(), 121);
    assert!(rows.iter().all(|r| r[4] == (r[2] - r[3]).abs()));

    ok(
        dir.path(),
        &[
            "legendre",
            "--regime",
            "tricritical",
            "--beta",
            "1.5",
            "--B",
            "tc",
        ],
    );
    let l: Lagrangian = read_json(dir.path().join("lagrangian.json"));
    assert!((l.sigma_inverse[0][0] * l.hamiltonian.sigma[0][0] - 1.0).abs() < 1e-15);
}

#[test]
fn fluctuation_outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let common = [
        "fluctuations",
        "--regime",
        "critical",
        "--beta",
        "1.25",
        "--B",
        "g1",
        "--n",
        "10000",
        "--replicas",
        "6",
    ];
    // too few replicas for a verdict; the files must still be written
    let out = rfcw(dir.path(), &common);
    assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
    let rep =
        DriftReport::from_csv(&fs::read_to_string(dir.path().join("drift.csv")).unwrap()).unwrap();
    assert_eq!(rep.bin_centers.len(), 10);
    let summary: serde_json::Value = read_json(dir.path().join("drift_summary.json"));
    assert!(summary["assessment"]["passed"].is_boolean());
    assert_eq!(summary["counts"].as_array().unwrap().len(), 10);

    let mut relax = common.to_vec();
    relax.extend([
        "--relaxation",
        "--t-end",
        "0.3",
        "--window",
        "0.002",
        "--burn-in",
        "0.05",
    ]);
    let _ = rfcw(dir.path(), &relax);
    let r: RelaxationReport = read_json(dir.path().join("relaxation.json"));
    assert!(r.predicted_rate > 0.0);
}

#[test]
fn verify_writes_report_and_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["verify", "--suite", "symbolic"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("[PASS]")).count(), 7);
    let rep: VerifyReport = read_json(dir.path().join("verify_report.json"));
    assert!(rep.passed);
    assert_eq!(rep.checks.len(), 7);
}

#[test]
fn config_files_run_and_respect_out() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("nested");
    let cfg = dir.path().join("job.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"cmd":"phase","beta":2.0,"B":0.46,"out":{:?}}}"#,
            target.to_str().unwrap()
        ),
    )
    .unwrap();
    ok(dir.path(), &["run", cfg.to_str().unwrap()]);
    let rep: PhaseReport = read_json(target.join("phase.json"));
    assert_eq!(rep.region, Region::MixedIIiv);
    assert_eq!(rep.fixed_points.len(), 5);
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = rfcw(
        dir.path(),
        &["expand", "--beta", "2", "--B", "0.3", "--nu", "3"],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("nu must be 2 or 4"));
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"cmd":"phase","beta":-1,"B":0,"extra":true}"#).unwrap();
    let out = rfcw(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("beta must be positive") && err.contains("unknown key \"extra\""),
        "{err}"
    );
    // nothing written on failure
    assert!(!dir.path().join("phase.json").exists());
}
