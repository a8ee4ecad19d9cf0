//! Monte Carlo estimates of the drift and fast relaxation of the rescaled
//! fluctuation process, compared with the symbolic limits.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    lil_check, replica_rng, rescale_fluctuations, sample_disorder_with, simulate_with_rng,
    ChainState, DisorderSample, OutputGrid,
};
use crate::error::{Error, Result};
use crate::hamjac::{limit_hamiltonian, Drift, QuadraticHamiltonian, Regime};
use crate::io::{fmt17, parse_table};
use crate::model::{stationary_points, MacroState, ModelParams, ScalingCase, Stability};
use crate::par::{map_indexed, pairwise_sum, Execution};

/// How each replica's random fields are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisorderMode {
    /// Fresh Bin(n, ½) draw per replica.
    #[default]
    Quenched,
    /// Balanced fields, η̄ = 0 for even n. Diagnostic only.
    Balanced,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coordinate {
    #[default]
    X,
    Y,
}

fn default_window() -> f64 {
    0.01
}
fn default_burn_in() -> f64 {
    0.2
}
fn default_start() -> (f64, f64) {
    (0.5, 1.6)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub params: ModelParams,
    pub regime: Regime,
    pub n: u64,
    /// b_n = n^α
    pub alpha: f64,
    pub nu: u32,
    pub replicas: usize,
    /// Rescaled horizon, burn-in included.
    pub t_end: f64,
    pub bins: usize,
    pub seed: u64,
    #[serde(default)]
    pub coordinate: Coordinate,
    /// Regression window in rescaled time.
    #[serde(default = "default_window")]
    pub window: f64,
    /// Rescaled time discarded before sampling.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    /// Initial |x| (and |y| in two-dimensional regimes) drawn uniformly
    /// from this range with a random sign.
    #[serde(default = "default_start")]
    pub start_range: (f64, f64),
    #[serde(default)]
    pub disorder: DisorderMode,
    #[serde(default)]
    pub execution: Execution,
}

impl EnsembleConfig {
    pub fn b_n(&self) -> f64 {
        (self.n as f64).powf(self.alpha)
    }

    /// n·b_n^{−(ν+2)}
    pub fn speed(&self) -> f64 {
        self.n as f64 * self.b_n().powi(-(self.nu as i32 + 2))
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.nu != self.regime.nu() {
            errs.push(format!(
                "regime {:?} runs at nu = {}, got {}",
                self.regime,
                self.regime.nu(),
                self.nu
            ));
        }
        let cap = 1.0 / (2.0 * self.nu as f64 + 2.0);
        if !(self.alpha > 0.0 && self.alpha < cap) {
            errs.push(format!("alpha must lie in (0, {cap}) for nu = {}", self.nu));
        }
        if self.n < 3 {
            errs.push("n must be at least 3".into());
        }
        if self.replicas == 0 || self.bins == 0 {
            errs.push("replicas and bins must be positive".into());
        }
        if !(self.window > 0.0)
            || !(self.burn_in >= 0.0)
            || !(self.t_end > self.burn_in + self.window)
        {
            errs.push("need window > 0 and t_end > burn_in + window".into());
        }
        if !(self.start_range.0 >= 0.0 && self.start_range.1 >= self.start_range.0) {
            errs.push("start_range must satisfy 0 <= lo <= hi".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Precondition(errs.join("; ")))
        }
    }

    /// Parameters actually simulated: κ, θ enter as κ·b^{−2} (or b^{−4}).
    pub fn simulated_params(&self) -> ModelParams {
        let b = self.b_n();
        let p = self.params;
        let w = match p.scaling {
            ScalingCase::None => 0.0,
            ScalingCase::BnMinus2 => b.powi(-2),
            ScalingCase::BnMinus4 => b.powi(-4),
        };
        ModelParams {
            beta: p.beta + p.kappa * w,
            field: p.field + p.theta * w,
            kappa: 0.0,
            theta: 0.0,
            scaling: ScalingCase::None,
        }
    }

    fn center(&self, sim: &ModelParams) -> Result<MacroState> {
        if self.regime == Regime::Ferro2D {
            let rep = stationary_points(sim)?;
            return rep
                .fixed_points
                .iter()
                .filter(|p| p.stability == Stability::Stable && p.state.m > 0.0)
                .max_by(|a, b| a.state.m.total_cmp(&b.state.m))
                .map(|p| p.state)
                .ok_or_else(|| Error::Precondition("no stable ferromagnetic point".into()));
        }
        Ok(sim.paramagnetic_point())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub bin_centers: Vec<f64>,
    pub counts: Vec<usize>,
    pub drift_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    /// speed·E[(ΔX − drift·Δt)²]/Δt, which estimates 2Σ.
    pub diffusion_hat: Vec<f64>,
    /// E[drift(X) | X in bin] under the limiting drift.
    pub reference_drift: Vec<f64>,
    /// 2Σ of the limiting Hamiltonian along the estimated coordinate.
    pub reference_diffusion: f64,
    pub b_n: f64,
    pub speed: f64,
    /// max over replicas of |b_n^{ν+1} η̄_n|
    pub max_scaled_disorder: f64,
    pub lil_indicator: f64,
    pub empty_bins: Vec<usize>,
}

pub const DRIFT_HEADER: &str = "bin_center,drift_hat,stderr,diffusion_hat,reference_drift";

impl DriftReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(DRIFT_HEADER);
        out.push('\n');
        for i in 0..self.bin_centers.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt17(self.bin_centers[i]),
                fmt17(self.drift_hat[i]),
                fmt17(self.stderr[i]),
                fmt17(self.diffusion_hat[i]),
                fmt17(self.reference_drift[i])
            );
        }
        out
    }

    /// Reads the CSV columns back; the scalar fields stay at their defaults.
    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_table(text, DRIFT_HEADER)?;
        let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<_>>();
        Ok(DriftReport {
            bin_centers: col(0),
            counts: vec![0; rows.len()],
            drift_hat: col(1),
            stderr: col(2),
            diffusion_hat: col(3),
            reference_drift: col(4),
            ..Default::default()
        })
    }

    /// Relative drift errors on bins with |center| in [lo, hi].
    pub fn relative_errors(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        (0..self.bin_centers.len())
            .filter(|&i| {
                let a = self.bin_centers[i].abs();
                a >= lo && a <= hi && self.counts[i] > 1 && self.reference_drift[i] != 0.0
            })
            .map(|i| {
                let r = self.reference_drift[i];
                (self.bin_centers[i], (self.drift_hat[i] - r).abs() / r.abs())
            })
            .collect()
    }

    /// Tolerance verdict for the bins with |center| in [lo, hi].
    pub fn assess(&self, lo: f64, hi: f64, rel_tol: f64) -> DriftAssessment {
        let errs = self.relative_errors(lo, hi);
        let worst = errs.iter().fold(0.0f64, |a, e| a.max(e.1));
        DriftAssessment {
            bins_checked: errs.len(),
            worst_relative_error: worst,
            tolerance: rel_tol,
            passed: !errs.is_empty() && worst < rel_tol,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftAssessment {
    pub bins_checked: usize,
    pub worst_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Per-replica samples: (X_k, other coordinate, ΔX).
struct ReplicaSamples {
    rows: Vec<[f64; 3]>,
    scaled_disorder: f64,
}

fn signed_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    let mag = lo + (hi - lo) * rng.random::<f64>();
    if rng.random::<bool>() {
        mag
    } else {
        -mag
    }
}

fn run_replica(
    cfg: &EnsembleConfig,
    sim: &ModelParams,
    center: MacroState,
    r: usize,
) -> Result<ReplicaSamples> {
    let mut rng = replica_rng(cfg.seed, r as u64);
    let b = cfg.b_n();
    let disorder = match cfg.disorder {
        DisorderMode::Quenched => sample_disorder_with(cfg.n, &mut rng)?,
        DisorderMode::Balanced => DisorderSample::annealed(cfg.n),
    };
    let x0 = signed_uniform(&mut rng, cfg.start_range);
    let y0 = if cfg.nu == 0 {
        signed_uniform(&mut rng, cfg.start_range)
    } else {
        0.0
    };
    let init = ChainState::nearest(
        &disorder,
        MacroState::new(center.m + x0 / b, center.q + y0 / b),
    );
    let tscale = b.powi(cfg.nu as i32);
    let steps = ((cfg.t_end - cfg.burn_in) / cfg.window).floor() as usize;
    let times: Vec<f64> = (0..=steps)
        .map(|k| (cfg.burn_in + k as f64 * cfg.window) * tscale)
        .collect();
    let t_end = *times.last().unwrap_or(&0.0);
    let out = simulate_with_rng(
        sim,
        &disorder,
        init,
        t_end,
        &OutputGrid::Times(times),
        &mut rng,
    )?;
    let path = rescale_fluctuations(&out.trajectory, center, b, cfg.nu)?;
    let pick = |s: &MacroState| match cfg.coordinate {
        Coordinate::X => (s.m, s.q),
        Coordinate::Y => (s.q, s.m),
    };
    let rows = path
        .states
        .windows(2)
        .map(|w| {
            let (a, other) = pick(&w[0]);
            let (b1, _) = pick(&w[1]);
            [a, other, b1 - a]
        })
        .collect();
    let lil = lil_check(cfg.n, b, cfg.nu, disorder.eta_bar)?;
    Ok(ReplicaSamples {
        rows,
        scaled_disorder: lil.scaled_disorder,
    })
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] * (1.0 - frac) + sorted[j] * frac
}

fn reference_diffusion(h: &QuadraticHamiltonian, coord: Coordinate) -> f64 {
    let k = match (h.dim(), coord) {
        (1, _) | (_, Coordinate::X) => 0,
        _ => 1,
    };
    2.0 * h.sigma[k][k]
}

pub fn estimate_drift(cfg: &EnsembleConfig) -> Result<DriftReport> {
    cfg.validate()?;
    let sim = cfg.simulated_params();
    let center = cfg.center(&sim)?;
    let ham = limit_hamiltonian(cfg.regime, &cfg.params)?;
    if ham.dim() == 1 && cfg.coordinate == Coordinate::Y {
        return Err(Error::Precondition(
            "one-dimensional regimes only carry a drift for x".into(),
        ));
    }
    let reps = map_indexed(cfg.execution, cfg.replicas, |r| {
        run_replica(cfg, &sim, center, r)
    });
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;

    let rows: Vec<[f64; 3]> = reps.iter().flat_map(|r| r.rows.iter().copied()).collect();
    let limit_drift = |x: f64, o: f64| match &ham.drift_coefficients {
        Drift::Poly(_) => ham.drift(&[x])[0],
        Drift::Linear(a) => match cfg.coordinate {
            Coordinate::X => a[0][0] * x + a[0][1] * o,
            Coordinate::Y => a[1][0] * o + a[1][1] * x,
        },
    };
    let mut report = bin_increments(&rows, cfg.window, cfg.bins, cfg.speed(), limit_drift);
    report.b_n = cfg.b_n();
    report.reference_diffusion = reference_diffusion(&ham, cfg.coordinate);
    report.max_scaled_disorder = reps
        .iter()
        .fold(0.0f64, |a, r| a.max(r.scaled_disorder.abs()));
    report.lil_indicator = lil_check(cfg.n, cfg.b_n(), cfg.nu, 0.0)?.indicator;
    Ok(report)
}

/// Bins samples `[x, other, Δx]` taken over windows of length `dt` by x
/// (uniform bins over the 1–99 percentile range) and estimates the drift,
/// its standard error and the diffusion per bin. `reference(x, other)` is
/// averaged over each bin's samples. Scalar fields other than `speed` are
/// left at their defaults.
pub fn bin_increments(
    rows: &[[f64; 3]],
    dt: f64,
    bins: usize,
    speed: f64,
    reference: impl Fn(f64, f64) -> f64,
) -> DriftReport {
    let mut xs: Vec<f64> = rows.iter().map(|v| v[0]).collect();
    xs.sort_by(|a, b| a.total_cmp(b));
    let (lo, hi) = (percentile(&xs, 0.01), percentile(&xs, 0.99));
    let nb = bins.max(1);
    let width = (hi - lo) / nb as f64;
    let bin_of = |x: f64| {
        if width <= 0.0 || x < lo || x > hi {
            None
        } else {
            Some((((x - lo) / width) as usize).min(nb - 1))
        }
    };
    // per-bin values in input order
    let mut vel: Vec<Vec<f64>> = vec![Vec::new(); nb];
    let mut refs: Vec<Vec<f64>> = vec![Vec::new(); nb];
    for row in rows {
        if let Some(k) = bin_of(row[0]) {
            vel[k].push(row[2] / dt);
            refs[k].push(reference(row[0], row[1]));
        }
    }
    let mut report = DriftReport {
        speed,
        ..Default::default()
    };
    for k in 0..nb {
        let c = lo + (k as f64 + 0.5) * width;
        let cnt = vel[k].len();
        let mean = if cnt > 0 {
            pairwise_sum(&vel[k]) / cnt as f64
        } else {
            f64::NAN
        };
        let (se, diff) = if cnt > 1 {
            let dev: Vec<f64> = vel[k].iter().map(|v| (v - mean).powi(2)).collect();
            let var = pairwise_sum(&dev) / (cnt - 1) as f64;
            // (Δx − drift·dt)² = dt²·(v − drift)²
            (
                (var / cnt as f64).sqrt(),
                speed * pairwise_sum(&dev) / cnt as f64 * dt,
            )
        } else {
            (f64::NAN, f64::NAN)
        };
        let ref_drift = if cnt > 0 {
            pairwise_sum(&refs[k]) / cnt as f64
        } else {
            reference(c, 0.0)
        };
        if cnt == 0 {
            report.empty_bins.push(k);
        }
        report.bin_centers.push(c);
        report.counts.push(cnt);
        report.drift_hat.push(mean);
        report.stderr.push(se);
        report.diffusion_hat.push(diff);
        report.reference_drift.push(ref_drift);
    }
    report
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationReport {
    /// Fitted decay rate of the y autocorrelation per unit rescaled time.
    pub fitted_rate: f64,
    /// 2cosh(βB)·b_n^ν
    pub predicted_rate: f64,
    pub relative_error: f64,
    /// Normalized autocorrelation at lags 0, 1, 2, … windows.
    pub autocorrelation: Vec<f64>,
    pub lags_used: usize,
    pub fit_ok: bool,
}

/// Fits the exponential decay of the stationary autocorrelation of the
/// rescaled y coordinate around the paramagnetic point.
pub fn q_relaxation_check(cfg: &EnsembleConfig) -> Result<RelaxationReport> {
    cfg.validate()?;
    let sim = cfg.simulated_params();
    let center = sim.paramagnetic_point();
    let b = cfg.b_n();
    let tscale = b.powi(cfg.nu as i32);
    let steps = ((cfg.t_end - cfg.burn_in) / cfg.window).floor() as usize;
    let max_lag = steps.min(40);
    let series = map_indexed(cfg.execution, cfg.replicas, |r| -> Result<Vec<f64>> {
        let mut rng = replica_rng(cfg.seed, r as u64);
        let disorder = sample_disorder_with(cfg.n, &mut rng)?;
        let init = ChainState::nearest(&disorder, center);
        let times: Vec<f64> = (0..=steps)
            .map(|k| (cfg.burn_in + k as f64 * cfg.window) * tscale)
            .collect();
        let t_end = *times.last().unwrap_or(&0.0);
        let out = simulate_with_rng(
            &sim,
            &disorder,
            init,
            t_end,
            &OutputGrid::Times(times),
            &mut rng,
        )?;
        let path = rescale_fluctuations(&out.trajectory, center, b, cfg.nu)?;
        Ok(path.states.iter().map(|s| s.q).collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let all: Vec<f64> = series.iter().flatten().copied().collect();
    let mean = pairwise_sum(&all) / all.len() as f64;
    let cov: Vec<f64> = (0..=max_lag)
        .map(|lag| {
            let prods: Vec<f64> = series
                .iter()
                .flat_map(|s| {
                    (0..s.len().saturating_sub(lag))
                        .map(move |i| (s[i] - mean) * (s[i + lag] - mean))
                })
                .collect();
            if prods.is_empty() {
                0.0
            } else {
                pairwise_sum(&prods) / prods.len() as f64
            }
        })
        .collect();
    let acf: Vec<f64> = cov.iter().map(|c| c / cov[0]).collect();
    // least squares of log acf against lag·window through the origin
    let mut num = 0.0;
    let mut den = 0.0;
    let mut used = 0;
    for (lag, &a) in acf.iter().enumerate().skip(1) {
        if a < 0.05 {
            break;
        }
        let t = lag as f64 * cfg.window;
        num += t * a.ln();
        den += t * t;
        used += 1;
    }
    let fitted = if used > 0 { -num / den } else { f64::NAN };
    let predicted = 2.0 * cfg.params.cosh_bb() * tscale;
    Ok(RelaxationReport {
        fitted_rate: fitted,
        predicted_rate: predicted,
        relative_error: (fitted - predicted).abs() / predicted,
        autocorrelation: acf,
        lags_used: used,
        fit_ok: used >= 2 && fitted > 0.0,
    })
}
