//! Argument and config parsing, validation and file emission for the `rfcw`
//! binary.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use rfcw::dynamics::{
    integrate_ode, replica_rng, rescale_fluctuations, sample_disorder_with, simulate_with_rng,
    ChainState, OutputGrid, Trajectory,
};
use rfcw::hamjac::{
    expansion_hamiltonian, finite_n_hamiltonian, legendre, limit_hamiltonian, regime_expansion,
    BumpedPoly, Grid, HamiltonianSetup, PerturbedFunction, Product2D, Regime, TestFunction2D,
};
use rfcw::io::{grid_comparison_csv, trajectory_csv};
use rfcw::mdp::{estimate_drift, q_relaxation_check, Coordinate, DisorderMode, EnsembleConfig};
use rfcw::model::{
    g1, g2, stationary_points, tricritical_field, MacroState, ModelParams, ScalingCase, Stability,
};
use rfcw::opcalc::{build_extended_q, build_standard_q, perturb, CurveConstraint, VExpression};
use rfcw::par::Execution;
use rfcw::verify::{run_suite, Suite, VerifyOptions};

/// Default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "RFCW_OUT_DIR";

/// B as a number or one of the named curves `g1`, `g2`, `tc`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Value(f64),
    Named(NamedField),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedField {
    G1,
    G2,
    Tc,
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Value(0.0)
    }
}

impl FromStr for FieldSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "g1" => Ok(FieldSpec::Named(NamedField::G1)),
            "g2" => Ok(FieldSpec::Named(NamedField::G2)),
            "tc" => Ok(FieldSpec::Named(NamedField::Tc)),
            _ => s
                .parse::<f64>()
                .map(FieldSpec::Value)
                .map_err(|_| format!("B must be a number or one of g1, g2, tc; got {s:?}")),
        }
    }
}

impl<'de> Deserialize<'de> for FieldSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d) {
            Ok(Raw::Num(v)) => Ok(FieldSpec::Value(v)),
            Ok(Raw::Text(s)) => s.parse().map_err(serde::de::Error::custom),
            Err(_) => Err(serde::de::Error::custom(
                "B must be a number or one of g1, g2, tc",
            )),
        }
    }
}

impl FieldSpec {
    pub fn resolve(self, beta: f64) -> rfcw::Result<f64> {
        match self {
            FieldSpec::Value(v) => Ok(v),
            FieldSpec::Named(NamedField::G1) => g1(beta),
            FieldSpec::Named(NamedField::G2) => g2(beta),
            FieldSpec::Named(NamedField::Tc) => {
                if (beta - 1.5).abs() > 1e-12 {
                    return Err(rfcw::Error::Domain(format!(
                        "B = \"tc\" needs beta = 1.5, got {beta}"
                    )));
                }
                Ok(tricritical_field())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum Scaling {
    #[default]
    #[serde(rename = "none")]
    None,
    /// κ, θ enter at order b_n^{-2}
    #[serde(rename = "bn-2")]
    #[value(name = "bn-2")]
    BnMinus2,
    /// κ, θ enter at order b_n^{-4}
    #[serde(rename = "bn-4")]
    #[value(name = "bn-4")]
    BnMinus4,
}

impl From<Scaling> for ScalingCase {
    fn from(s: Scaling) -> Self {
        match s {
            Scaling::None => ScalingCase::None,
            Scaling::BnMinus2 => ScalingCase::BnMinus2,
            Scaling::BnMinus4 => ScalingCase::BnMinus4,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn parse_serde<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_execution(s: &str) -> Result<Execution, String> {
    parse_serde(s)
}

fn parse_coordinate(s: &str) -> Result<Coordinate, String> {
    parse_serde(s)
}

#[derive(Args, Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Point {
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
    /// Number, or g1 / g2 / tc.
    #[arg(long = "B", value_name = "B", allow_negative_numbers = true)]
    #[serde(rename = "B")]
    pub field: FieldSpec,
}

impl Default for Point {
    fn default() -> Self {
        Point {
            beta: f64::NAN,
            field: FieldSpec::default(),
        }
    }
}

#[derive(Args, Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Perturbation {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
    #[arg(long, value_enum, default_value_t = Scaling::None)]
    pub scaling: Scaling,
}

fn model_params(point: &Point, pert: Option<&Perturbation>) -> rfcw::Result<ModelParams> {
    if !(point.beta.is_finite() && point.beta > 0.0) {
        return Err(rfcw::Error::Domain("beta must be positive".into()));
    }
    let field = point.field.resolve(point.beta)?;
    let p = ModelParams {
        beta: point.beta,
        field,
        kappa: pert.map_or(0.0, |p| p.kappa),
        theta: pert.map_or(0.0, |p| p.theta),
        scaling: pert.map_or(ScalingCase::None, |p| p.scaling.into()),
    };
    p.validate()?;
    Ok(p)
}

/// Model errors as individual messages.
fn param_errors(point: &Point, pert: Option<&Perturbation>) -> Vec<String> {
    match model_params(point, pert) {
        Ok(_) => Vec::new(),
        Err(rfcw::Error::Domain(msg)) => msg.split("; ").map(str::to_string).collect(),
        Err(e) => vec![e.to_string()],
    }
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: Point,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: Point,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub m0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub q0: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
}

impl Default for OdeArgs {
    fn default() -> Self {
        OdeArgs {
            point: Point::default(),
            m0: 0.1,
            q0: 0.0,
            t_end: 10.0,
            dt: 0.01,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: Point,
    #[arg(long, default_value_t = 10_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub m0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub q0: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output grid points on [0, t_end].
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    /// Also write the path in fluctuation coordinates around the
    /// paramagnetic point with time exponent ν.
    #[arg(long)]
    pub rescale_nu: Option<u32>,
    /// b_n = n^alpha for the rescaled path.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
}

impl Default for SimulateArgs {
    fn default() -> Self {
        SimulateArgs {
            point: Point::default(),
            n: 10_000,
            m0: 0.1,
            q0: 0.0,
            t_end: 10.0,
            seed: 1,
            points: 1000,
            rescale_nu: None,
            alpha: 0.1,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluctuationsArgs {
    #[arg(long)]
    pub regime: Regime,
    #[command(flatten)]
    #[serde(flatten)]
    pub point: Point,
    #[command(flatten)]
    #[serde(flatten)]
    pub perturbation: Perturbation,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub replicas: usize,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_parser = parse_coordinate, default_value = "x")]
    pub coordinate: Coordinate,
    #[arg(long, default_value_t = 0.01)]
    pub window: f64,
    #[arg(long, default_value_t = 0.2)]
    pub burn_in: f64,
    #[arg(long, default_value_t = 0.3)]
    pub start_lo: f64,
    #[arg(long, default_value_t = 1.6)]
    pub start_hi: f64,
    /// Bins with |center| in [check_lo, check_hi] enter the verdict.
    #[arg(long, default_value_t = 0.5)]
    pub check_lo: f64,
    #[arg(long, default_value_t = 1.5)]
    pub check_hi: f64,
    #[arg(long, default_value_t = 0.25)]
    pub tolerance: f64,
    /// Fit the relaxation rate of y instead of the drift.
    #[arg(long)]
    pub relaxation: bool,
    #[arg(long, value_parser = parse_execution, default_value = "parallel")]
    pub execution: Execution,
}

impl Default for FluctuationsArgs {
    fn default() -> Self {
        FluctuationsArgs {
            regime: Regime::Critical,
            point: Point::default(),
            perturbation: Perturbation::default(),
            n: 1_000_000,
            alpha: 0.1,
            replicas: 1000,
            t_end: 1.0,
            bins: 10,
            seed: 1,
            coordinate: Coordinate::X,
            window: 0.01,
            burn_in: 0.2,
            start_lo: 0.3,
            start_hi: 1.6,
            check_lo: 0.5,
            check_hi: 1.5,
            tolerance: 0.25,
            relaxation: false,
            execution: Execution::Parallel,
        }
    }
}

impl FluctuationsArgs {
    fn ensemble(&self) -> rfcw::Result<EnsembleConfig> {
        Ok(EnsembleConfig {
            params: model_params(&self.point, Some(&self.perturbation))?,
            regime: self.regime,
            n: self.n,
            alpha: self.alpha,
            nu: self.regime.nu(),
            replicas: self.replicas,
            t_end: self.t_end,
            bins: self.bins,
            seed: self.seed,
            coordinate: self.coordinate,
            window: self.window,
            burn_in: self.burn_in,
            start_range: (self.start_lo, self.start_hi),
            disorder: DisorderMode::Quenched,
            execution: self.execution,
        })
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpandArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: Point,
    #[command(flatten)]
    #[serde(flatten)]
    pub perturbation: Perturbation,
    #[arg(long, default_value_t = 2)]
    pub nu: u32,
    /// Declare the perturbed parameters to stay on the critical curve.
    #[arg(long)]
    pub on_curve: bool,
}

impl Default for ExpandArgs {
    fn default() -> Self {
        ExpandArgs {
            point: Point::default(),
            perturbation: Perturbation::default(),
            nu: 2,
            on_curve: false,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HamiltonianArgs {
    #[arg(long)]
    pub regime: Regime,
    #[command(flatten)]
    #[serde(flatten)]
    pub point: Point,
    #[command(flatten)]
    #[serde(flatten)]
    pub perturbation: Perturbation,
    /// Also compare the exact finite-n Hamiltonian with its expansion at
    /// this system size.
    #[arg(long)]
    pub compare_n: Option<f64>,
    /// b_n = n^alpha for the comparison.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 201)]
    pub grid_points: usize,
    #[arg(long, value_parser = parse_execution, default_value = "parallel")]
    pub execution: Execution,
}

impl Default for HamiltonianArgs {
    fn default() -> Self {
        HamiltonianArgs {
            regime: Regime::Critical,
            point: Point::default(),
            perturbation: Perturbation::default(),
            compare_n: None,
            alpha: 0.05,
            grid_points: 201,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyArgs {
    /// Suites to run (repeatable); all when omitted.
    #[arg(long)]
    pub suite: Vec<Suite>,
    #[arg(long, default_value_t = 20240531)]
    pub seed: u64,
    #[arg(long, value_parser = parse_execution, default_value = "parallel")]
    pub execution: Execution,
}

impl Default for VerifyArgs {
    fn default() -> Self {
        VerifyArgs {
            suite: Vec::new(),
            seed: 20240531,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Subcommand, Clone, Debug, PartialEq)]
pub enum Job {
    /// Classify (β, B) and list the stationary points.
    Phase(PhaseArgs),
    /// Integrate the mean-field ODE.
    Ode(OdeArgs),
    /// Simulate one trajectory of the (m, q) chain.
    Simulate(SimulateArgs),
    /// Monte Carlo drift (or relaxation) estimate in fluctuation coordinates.
    Fluctuations(FluctuationsArgs),
    /// Perturbation layers and limiting drift.
    Expand(ExpandArgs),
    /// Limiting Hamiltonian of a regime.
    Hamiltonian(HamiltonianArgs),
    /// Lagrangian of a regime's Hamiltonian.
    Legendre(HamiltonianArgs),
    /// Acceptance checks.
    Verify(VerifyArgs),
}

const COMMANDS: [&str; 8] = [
    "phase",
    "ode",
    "simulate",
    "fluctuations",
    "expand",
    "hamiltonian",
    "legendre",
    "verify",
];

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Phase(_) => "phase",
            Job::Ode(_) => "ode",
            Job::Simulate(_) => "simulate",
            Job::Fluctuations(_) => "fluctuations",
            Job::Expand(_) => "expand",
            Job::Hamiltonian(_) => "hamiltonian",
            Job::Legendre(_) => "legendre",
            Job::Verify(_) => "verify",
        }
    }

    /// Every problem with the job's parameters.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        fn need(errs: &mut Vec<String>, ok: bool, msg: &str) {
            if !ok {
                errs.push(msg.to_string());
            }
        }
        match self {
            Job::Phase(a) => return param_errors(&a.point, None),
            Job::Ode(a) => {
                need(&mut errs, a.t_end >= 0.0, "t_end must be nonnegative");
                need(&mut errs, a.dt > 0.0, "dt must be positive");
                need(
                    &mut errs,
                    MacroState::new(a.m0, a.q0).in_e0(),
                    "(m0, q0) must satisfy |m0| + |q0| <= 1",
                );
                errs.extend(param_errors(&a.point, None));
            }
            Job::Simulate(a) => {
                need(&mut errs, a.n >= 1, "n must be at least 1");
                need(&mut errs, a.t_end >= 0.0, "t_end must be nonnegative");
                need(&mut errs, a.points >= 2, "points must be at least 2");
                need(
                    &mut errs,
                    MacroState::new(a.m0, a.q0).in_e0(),
                    "(m0, q0) must satisfy |m0| + |q0| <= 1",
                );
                need(
                    &mut errs,
                    a.rescale_nu.map_or(true, |nu| [0, 2, 4].contains(&nu)),
                    "rescale_nu must be 0, 2 or 4",
                );
                need(
                    &mut errs,
                    a.alpha > 0.0 && a.alpha < 0.5,
                    "alpha must lie in (0, 1/2)",
                );
                errs.extend(param_errors(&a.point, None));
            }
            Job::Fluctuations(a) => {
                let pe = param_errors(&a.point, Some(&a.perturbation));
                if pe.is_empty() {
                    if let Err(e) = a.ensemble().and_then(|c| c.validate()) {
                        errs.push(e.to_string());
                    }
                }
                need(&mut errs, a.tolerance > 0.0, "tolerance must be positive");
                errs.extend(pe);
            }
            Job::Expand(a) => {
                need(&mut errs, a.nu == 2 || a.nu == 4, "nu must be 2 or 4");
                errs.extend(param_errors(&a.point, Some(&a.perturbation)));
            }
            Job::Hamiltonian(a) | Job::Legendre(a) => {
                need(
                    &mut errs,
                    a.compare_n.map_or(true, |n| n >= 3.0),
                    "compare_n must be at least 3",
                );
                need(&mut errs, a.alpha > 0.0, "alpha must be positive");
                need(
                    &mut errs,
                    a.grid_points >= 2,
                    "grid_points must be at least 2",
                );
                errs.extend(param_errors(&a.point, Some(&a.perturbation)));
            }
            Job::Verify(_) => {}
        }
        errs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub job: Job,
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// All problems found in a configuration document.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.join("; "))
    }
}

impl std::error::Error for ConfigErrors {}

fn required_keys(cmd: &str) -> &'static [&'static str] {
    match cmd {
        "verify" => &[],
        "fluctuations" | "hamiltonian" | "legendre" => &["regime", "beta", "B"],
        _ => &["beta", "B"],
    }
}

/// Checks the keys of `obj` against the fields of `T` one at a time, then
/// builds `T` from the well-typed ones.
fn typed_args<T: Serialize + DeserializeOwned + Default>(
    cmd: &str,
    obj: &Map<String, Value>,
    errs: &mut Vec<String>,
) -> T {
    let Value::Object(known) =
        serde_json::to_value(T::default()).expect("argument records serialize")
    else {
        unreachable!("argument records are objects")
    };
    let mut good = Map::new();
    for (k, v) in obj {
        if !known.contains_key(k) {
            errs.push(format!("unknown key {k:?} for {cmd}"));
            continue;
        }
        let single = Value::Object(Map::from_iter([(k.clone(), v.clone())]));
        match serde_json::from_value::<T>(single) {
            Ok(_) => {
                good.insert(k.clone(), v.clone());
            }
            Err(e) => errs.push(format!("key {k:?}: {e}")),
        }
    }
    for k in required_keys(cmd) {
        if !obj.contains_key(*k) {
            errs.push(format!("missing key {k:?}"));
        }
    }
    serde_json::from_value(Value::Object(good)).unwrap_or_default()
}

/// Parses a JSON run configuration `{"cmd": …, …}`. Reports every problem
/// found rather than stopping at the first.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| ConfigErrors(vec![format!("malformed document: {e}")]))?;
    let Value::Object(mut obj) = doc else {
        return Err(ConfigErrors(vec![
            "configuration must be a JSON object".into()
        ]));
    };
    let mut errs = Vec::new();
    let cmd = match obj.remove("cmd") {
        Some(Value::String(c)) if COMMANDS.contains(&c.as_str()) => c,
        Some(Value::String(c)) => {
            return Err(ConfigErrors(vec![format!(
                "unknown cmd {c:?}; expected one of {}",
                COMMANDS.join(", ")
            )]))
        }
        Some(_) => return Err(ConfigErrors(vec!["cmd must be a string".into()])),
        None => return Err(ConfigErrors(vec!["missing key \"cmd\"".into()])),
    };
    let out = match obj.remove("out") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => {
            errs.push("key \"out\" must be a path string".into());
            None
        }
    };
    let format = match obj.remove("format") {
        None => Format::Csv,
        Some(v) => serde_json::from_value(v).unwrap_or_else(|_| {
            errs.push("key \"format\" must be \"csv\" or \"json\"".into());
            Format::Csv
        }),
    };
    let job = match cmd.as_str() {
        "phase" => Job::Phase(typed_args(&cmd, &obj, &mut errs)),
        "ode" => Job::Ode(typed_args(&cmd, &obj, &mut errs)),
        "simulate" => Job::Simulate(typed_args(&cmd, &obj, &mut errs)),
        "fluctuations" => Job::Fluctuations(typed_args(&cmd, &obj, &mut errs)),
        "expand" => Job::Expand(typed_args(&cmd, &obj, &mut errs)),
        "hamiltonian" => Job::Hamiltonian(typed_args(&cmd, &obj, &mut errs)),
        "legendre" => Job::Legendre(typed_args(&cmd, &obj, &mut errs)),
        _ => Job::Verify(typed_args(&cmd, &obj, &mut errs)),
    };
    errs.extend(job.validate());
    if errs.is_empty() {
        Ok(RunConfig { job, out, format })
    } else {
        Err(ConfigErrors(errs))
    }
}

/// What a run produced.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Lines for standard output.
    pub messages: Vec<String>,
    /// False when a check in the run failed.
    pub ok: bool,
}

impl Outcome {
    fn write(&mut self, dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.messages.push(format!("wrote {}", path.display()));
        self.files.push(path);
        Ok(())
    }

    fn write_json<T: Serialize + ?Sized>(
        &mut self,
        dir: &Path,
        name: &str,
        value: &T,
    ) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(dir, name, &text)
    }

    fn write_path(
        &mut self,
        dir: &Path,
        stem: &str,
        traj: &Trajectory,
        format: Format,
    ) -> anyhow::Result<()> {
        match format {
            Format::Csv => self.write(dir, &format!("{stem}.csv"), &trajectory_csv(traj)),
            Format::Json => self.write_json(dir, &format!("{stem}.json"), traj),
        }
    }
}

/// `--out`, then the environment variable, then the working directory.
pub fn output_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn layer_json(e: &VExpression) -> Value {
    serde_json::to_value(e).expect("expressions serialize")
}

fn compare_grid(a: &HamiltonianArgs, params: &ModelParams, n: f64) -> anyhow::Result<String> {
    let b = n.powf(a.alpha);
    let center = match a.regime {
        Regime::Ferro2D => stationary_points(params)?
            .fixed_points
            .iter()
            .filter(|p| p.stability == Stability::Stable && p.state.m > 0.0)
            .max_by(|x, y| x.state.m.total_cmp(&y.state.m))
            .map(|p| p.state)
            .context("no stable ferromagnetic point")?,
        _ => params.paramagnetic_point(),
    };
    let psi = BumpedPoly::quadratic_gaussian();
    let f: Box<dyn TestFunction2D> = if a.regime.nu() == 0 {
        Box::new(Product2D {
            fx: psi,
            fy: BumpedPoly::new(vec![0.0, 0.0, 1.0], 0.5),
        })
    } else {
        // ψ plus its correction layers, so that H_n F stays bounded
        let res = regime_expansion(a.regime, params)?;
        Box::new(PerturbedFunction::new(&res, b, psi))
    };
    let setup = HamiltonianSetup {
        params: *params,
        center,
        n,
        b_n: b,
        nu: a.regime.nu(),
        eta_bar: 0.0,
    };
    let grid = Grid::square(-1.0, 1.0, a.grid_points);
    let exact = finite_n_hamiltonian(&setup, f.as_ref(), &grid, a.execution)?;
    let approx = expansion_hamiltonian(&setup, f.as_ref(), &grid, a.execution)?;
    Ok(grid_comparison_csv(&exact, &approx))
}

/// Runs `job`, writing its artifacts into `dir`.
pub fn dispatch(job: &Job, dir: &Path, format: Format) -> anyhow::Result<Outcome> {
    let errs = job.validate();
    if !errs.is_empty() {
        bail!("invalid {} parameters: {}", job.name(), errs.join("; "));
    }
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut out = Outcome {
        ok: true,
        ..Default::default()
    };
    match job {
        Job::Phase(a) => {
            let rep = stationary_points(&model_params(&a.point, None)?)?;
            out.messages
                .push(format!("region {}", serde_json::to_value(rep.region)?));
            out.write_json(dir, "phase.json", &rep)?;
        }
        Job::Ode(a) => {
            let p = model_params(&a.point, None)?;
            let traj = integrate_ode(&p, MacroState::new(a.m0, a.q0), a.t_end, a.dt)?;
            out.write_path(dir, "ode", &traj, format)?;
        }
        Job::Simulate(a) => {
            let p = model_params(&a.point, None)?;
            let mut rng = replica_rng(a.seed, 0);
            let disorder = sample_disorder_with(a.n, &mut rng)?;
            let init = ChainState::nearest(&disorder, MacroState::new(a.m0, a.q0));
            let sim = simulate_with_rng(
                &p,
                &disorder,
                init,
                a.t_end,
                &OutputGrid::Uniform(a.points),
                &mut rng,
            )?;
            out.messages.push(format!(
                "{} jumps, eta_bar = {:.3e}",
                sim.jumps, disorder.eta_bar
            ));
            out.write_path(dir, "trajectory", &sim.trajectory, format)?;
            if let Some(nu) = a.rescale_nu {
                let b = (a.n as f64).powf(a.alpha);
                let r = rescale_fluctuations(&sim.trajectory, p.paramagnetic_point(), b, nu)?;
                out.write_path(dir, "trajectory_rescaled", &r, format)?;
            }
        }
        Job::Fluctuations(a) => {
            let cfg = a.ensemble()?;
            if a.relaxation {
                let rep = q_relaxation_check(&cfg)?;
                out.ok = rep.fit_ok && rep.relative_error < a.tolerance;
                out.messages.push(format!(
                    "fitted rate {:.4}, predicted {:.4}, relative error {:.3}",
                    rep.fitted_rate, rep.predicted_rate, rep.relative_error
                ));
                out.write_json(dir, "relaxation.json", &rep)?;
            } else {
                let rep = estimate_drift(&cfg)?;
                let verdict = rep.assess(a.check_lo, a.check_hi, a.tolerance);
                out.ok = verdict.passed;
                out.messages.push(format!(
                    "{} bins checked, worst relative error {:.3} (tol {})",
                    verdict.bins_checked, verdict.worst_relative_error, a.tolerance
                ));
                match format {
                    Format::Csv => out.write(dir, "drift.csv", &rep.to_csv())?,
                    Format::Json => out.write_json(dir, "drift.json", &rep)?,
                }
                let summary = json!({
                    "assessment": verdict,
                    "check_range": [a.check_lo, a.check_hi],
                    "b_n": rep.b_n,
                    "speed": rep.speed,
                    "counts": rep.counts,
                    "empty_bins": rep.empty_bins,
                    "reference_diffusion": rep.reference_diffusion,
                    "max_scaled_disorder": rep.max_scaled_disorder,
                    "lil_indicator": rep.lil_indicator,
                });
                out.write_json(dir, "drift_summary.json", &summary)?;
            }
        }
        Job::Expand(a) => {
            let p = model_params(&a.point, Some(&a.perturbation))?;
            let ops = if p.scaling == ScalingCase::None {
                build_standard_q(&p)
            } else {
                let c = if a.on_curve {
                    CurveConstraint::OnCurve
                } else {
                    CurveConstraint::Free
                };
                build_extended_q(&p, c)?
            };
            let res = perturb(&ops, a.nu)?;
            let mut layers = vec![json!({"r": 0, "psi": layer_json(&res.psi_layers[0])})];
            for r in 1..=a.nu as usize {
                layers.push(json!({
                    "r": r,
                    "psi": layer_json(&res.psi_layers[r]),
                    "phi": layer_json(res.phi(r)),
                    "p0": layer_json(res.p0(r)),
                }));
            }
            let drift: BTreeMap<String, f64> = res
                .drift_poly
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect();
            out.messages
                .push(format!("drift {}", serde_json::to_string(&drift)?));
            let doc = json!({
                "beta": p.beta,
                "B": p.field,
                "nu": a.nu,
                "layers": layers,
                "drift": drift,
                "warnings": res.warnings,
            });
            out.write_json(dir, "expansion.json", &doc)?;
        }
        Job::Hamiltonian(a) => {
            let p = model_params(&a.point, Some(&a.perturbation))?;
            let h = limit_hamiltonian(a.regime, &p)?;
            out.write_json(dir, "hamiltonian.json", &h)?;
            if let Some(n) = a.compare_n {
                out.write(dir, "hamiltonian_grid.csv", &compare_grid(a, &p, n)?)?;
            }
        }
        Job::Legendre(a) => {
            let p = model_params(&a.point, Some(&a.perturbation))?;
            let l = legendre(&limit_hamiltonian(a.regime, &p)?)?;
            out.write_json(dir, "lagrangian.json", &l)?;
        }
        Job::Verify(a) => {
            let suites = if a.suite.is_empty() {
                Suite::ALL.to_vec()
            } else {
                a.suite.clone()
            };
            let opts = VerifyOptions {
                seed: a.seed,
                execution: a.execution,
            };
            let rep = run_suite(&suites, &opts);
            out.messages.extend(rep.checks.iter().map(|c| c.line()));
            out.ok = rep.passed;
            out.write_json(dir, "verify_report.json", &rep)?;
        }
    }
    Ok(out)
}
