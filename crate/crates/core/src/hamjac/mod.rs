//! Limiting Hamiltonians and Lagrangians, finite-n Hamiltonians and their
//! expansion, action integrals and the quasipotential.

mod finite;
mod jet;
mod testfn;

pub use finite::{
    expansion_hamiltonian, finite_n_hamiltonian, limit_on_grid, Grid, GridValues, HamiltonianSetup,
};
pub use jet::Jet;
pub use testfn::{
    BumpedPoly, FnTest, OnlyX, PerturbedFunction, Product2D, TestFunction2D, Univariate,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::model::{
    classify, eigenvalues, g1, stationary_points, struct_matrices, tricritical_field, MacroState,
    Mat2, ModelParams, Region, ScalingCase, Stability, TRICRITICAL_BETA,
};
use crate::opcalc::{
    build_extended_q, build_standard_q, perturb, CurveConstraint, OperatorSet, PerturbationResult,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Para2D,
    Ferro2D,
    Critical,
    TriCritical,
    CriticalRescaled,
    TriCriticalOnCurve,
    TriCriticalArbitrary,
}

impl Regime {
    pub const ALL: [Regime; 7] = [
        Regime::Para2D,
        Regime::Ferro2D,
        Regime::Critical,
        Regime::TriCritical,
        Regime::CriticalRescaled,
        Regime::TriCriticalOnCurve,
        Regime::TriCriticalArbitrary,
    ];

    /// Time-scale exponent ν of the regime.
    pub fn nu(self) -> u32 {
        match self {
            Regime::Para2D | Regime::Ferro2D => 0,
            Regime::Critical | Regime::CriticalRescaled => 2,
            Regime::TriCritical | Regime::TriCriticalOnCurve | Regime::TriCriticalArbitrary => 4,
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .iter()
            .copied()
            .find(|r| format!("{r:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Domain(format!("unknown regime {s:?}")))
    }
}

/// Drift b(x): a polynomial in one dimension, a linear map in two.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, try_from = "DriftRepr")]
pub enum Drift {
    Poly(BTreeMap<u32, f64>),
    Linear(Mat2),
}

// untagged buffering cannot turn string keys into integers, so keys stay strings here
#[derive(Deserialize)]
#[serde(untagged)]
enum DriftRepr {
    Poly(BTreeMap<String, f64>),
    Linear(Mat2),
}

impl TryFrom<DriftRepr> for Drift {
    type Error = String;

    fn try_from(r: DriftRepr) -> std::result::Result<Self, String> {
        match r {
            DriftRepr::Linear(a) => Ok(Drift::Linear(a)),
            DriftRepr::Poly(m) => m
                .into_iter()
                .map(|(k, v)| {
                    k.parse::<u32>()
                        .map(|k| (k, v))
                        .map_err(|_| format!("drift power {k:?} is not an integer"))
                })
                .collect::<std::result::Result<_, _>>()
                .map(Drift::Poly),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticHamiltonian {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    pub drift_coefficients: Drift,
    /// dim×dim, symmetric
    pub sigma: Vec<Vec<f64>>,
}

impl QuadraticHamiltonian {
    pub fn one_d(drift: BTreeMap<u32, f64>, sigma: f64) -> Self {
        QuadraticHamiltonian {
            regime: None,
            drift_coefficients: Drift::Poly(drift),
            sigma: vec![vec![sigma]],
        }
    }

    pub fn two_d(a: Mat2, sigma: Mat2) -> Self {
        QuadraticHamiltonian {
            regime: None,
            drift_coefficients: Drift::Linear(a),
            sigma: sigma.iter().map(|r| r.to_vec()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        match self.drift_coefficients {
            Drift::Poly(_) => 1,
            Drift::Linear(_) => 2,
        }
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        match &self.drift_coefficients {
            Drift::Poly(c) => vec![c.iter().map(|(p, v)| v * x[0].powi(*p as i32)).sum()],
            Drift::Linear(a) => vec![
                a[0][0] * x[0] + a[0][1] * x[1],
                a[1][0] * x[0] + a[1][1] * x[1],
            ],
        }
    }

    fn quad(m: &[Vec<f64>], u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..u.len() {
            for j in 0..v.len() {
                s += u[i] * m[i][j] * v[j];
            }
        }
        s
    }

    /// ⟨b(x), p⟩ + ⟨Σp, p⟩
    pub fn eval(&self, x: &[f64], p: &[f64]) -> f64 {
        let b = self.drift(x);
        let lin: f64 = b.iter().zip(p).map(|(a, c)| a * c).sum();
        lin + Self::quad(&self.sigma, p, p)
    }

    /// Maximizer of p·v − L(x, v): v* = b(x) + 2Σp.
    pub fn optimal_velocity(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        let b = self.drift(x);
        (0..b.len())
            .map(|i| b[i] + 2.0 * (0..p.len()).map(|j| self.sigma[i][j] * p[j]).sum::<f64>())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lagrangian {
    pub hamiltonian: QuadraticHamiltonian,
    pub sigma_inverse: Vec<Vec<f64>>,
}

impl Lagrangian {
    /// ¼⟨Σ⁻¹(v − b(x)), v − b(x)⟩
    pub fn eval(&self, x: &[f64], v: &[f64]) -> f64 {
        let b = self.hamiltonian.drift(x);
        let d: Vec<f64> = v.iter().zip(&b).map(|(a, c)| a - c).collect();
        0.25 * QuadraticHamiltonian::quad(&self.sigma_inverse, &d, &d)
    }
}

pub fn lagrangian_eval(l: &Lagrangian, x: &[f64], v: &[f64]) -> f64 {
    l.eval(x, v)
}

const SINGULAR_TOL: f64 = 1e-13;

pub fn legendre(h: &QuadraticHamiltonian) -> Result<Lagrangian> {
    let s = &h.sigma;
    let inv = match h.dim() {
        1 => {
            if s[0][0].abs() <= SINGULAR_TOL {
                return Err(Error::SingularSigma {
                    null_direction: vec![1.0],
                });
            }
            vec![vec![1.0 / s[0][0]]]
        }
        _ => {
            let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
            let norm = s.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            if det.abs() <= SINGULAR_TOL * norm.max(1.0) * norm.max(1.0) {
                let m = [[s[0][0], s[0][1]], [s[1][0], s[1][1]]];
                return Err(Error::SingularSigma {
                    null_direction: null_direction(&m).to_vec(),
                });
            }
            // adding 0.0 turns −0 into 0
            let off = |v: f64| -v / det + 0.0;
            vec![
                vec![s[1][1] / det, off(s[0][1])],
                vec![off(s[1][0]), s[0][0] / det],
            ]
        }
    };
    Ok(Lagrangian {
        hamiltonian: h.clone(),
        sigma_inverse: inv,
    })
}

/// Unit eigenvector for the eigenvalue of smallest modulus.
fn null_direction(m: &Mat2) -> [f64; 2] {
    let ev = eigenvalues(m);
    let lam = if ev[0].0.abs() < ev[1].0.abs() {
        ev[0].0
    } else {
        ev[1].0
    };
    let (a, b, c, d) = (m[0][0] - lam, m[0][1], m[1][0], m[1][1] - lam);
    let v = if a.abs() + b.abs() >= c.abs() + d.abs() {
        [-b, a]
    } else {
        [-d, c]
    };
    let n = v[0].hypot(v[1]);
    if n == 0.0 {
        [1.0, 0.0]
    } else {
        [v[0] / n, v[1] / n]
    }
}

/// |H(x,p) − (p·v* − L(x,v*))| for the closed-form maximizer v*.
pub fn legendre_gap(h: &QuadraticHamiltonian, l: &Lagrangian, x: &[f64], p: &[f64]) -> f64 {
    let v = h.optimal_velocity(x, p);
    let pv: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
    (h.eval(x, p) - (pv - l.eval(x, &v))).abs()
}

const PARAM_TOL: f64 = 1e-10;

fn require_critical(params: &ModelParams, allow_tricritical: bool) -> Result<()> {
    let beta = params.beta;
    if !(beta > 1.0 && beta <= TRICRITICAL_BETA) {
        return Err(Error::Precondition(format!(
            "critical regimes need 1 < beta <= 3/2, got {beta}"
        )));
    }
    let c = g1(beta)?;
    if (params.field - c).abs() > PARAM_TOL {
        return Err(Error::Precondition(format!(
            "B = {} is not on the critical curve g1(beta) = {c}",
            params.field
        )));
    }
    if !allow_tricritical && (beta - TRICRITICAL_BETA).abs() <= PARAM_TOL {
        return Err(Error::Precondition(
            "beta = 3/2 is the tri-critical point".into(),
        ));
    }
    Ok(())
}

fn require_tricritical(params: &ModelParams) -> Result<()> {
    if (params.beta - TRICRITICAL_BETA).abs() > PARAM_TOL
        || (params.field - tricritical_field()).abs() > PARAM_TOL
    {
        return Err(Error::Precondition(format!(
            "regime needs (beta, B) = (3/2, {}), got ({}, {})",
            tricritical_field(),
            params.beta,
            params.field
        )));
    }
    Ok(())
}

fn require_scaling(params: &ModelParams, want: ScalingCase) -> Result<()> {
    if params.scaling != want {
        return Err(Error::Precondition(format!(
            "regime needs scaling {want:?}, got {:?}",
            params.scaling
        )));
    }
    Ok(())
}

fn require_unperturbed(params: &ModelParams) -> Result<()> {
    if params.scaling != ScalingCase::None {
        return Err(Error::Precondition(
            "regime takes no kappa/theta perturbation".into(),
        ));
    }
    Ok(())
}

/// Linear Hamiltonian around a stationary point: A = βĜ₁ − 2𝔹, Σ = 𝔾₁.
pub fn linear_hamiltonian_at(params: &ModelParams, center: &MacroState) -> QuadraticHamiltonian {
    let sm = struct_matrices(params, center);
    QuadraticHamiltonian::two_d(sm.linear_drift(params.beta), sm.g1_mat)
}

/// Operator family and order ν for a one-dimensional regime.
pub fn regime_operators(regime: Regime, params: &ModelParams) -> Result<(OperatorSet, u32)> {
    match regime {
        Regime::Critical => {
            require_unperturbed(params)?;
            require_critical(params, true)?;
            Ok((build_standard_q(params), 2))
        }
        Regime::TriCritical => {
            require_unperturbed(params)?;
            require_tricritical(params)?;
            Ok((build_standard_q(params), 4))
        }
        Regime::CriticalRescaled => {
            require_scaling(params, ScalingCase::BnMinus2)?;
            require_critical(params, true)?;
            Ok((build_extended_q(params, CurveConstraint::Free)?, 2))
        }
        Regime::TriCriticalOnCurve => {
            require_scaling(params, ScalingCase::BnMinus2)?;
            require_tricritical(params)?;
            Ok((build_extended_q(params, CurveConstraint::OnCurve)?, 4))
        }
        Regime::TriCriticalArbitrary => {
            require_scaling(params, ScalingCase::BnMinus4)?;
            require_tricritical(params)?;
            Ok((build_extended_q(params, CurveConstraint::Free)?, 4))
        }
        Regime::Para2D | Regime::Ferro2D => Err(Error::Precondition(format!(
            "{regime:?} is two-dimensional and has no operator expansion"
        ))),
    }
}

/// Runs the recursion for a one-dimensional regime and checks that every
/// lower even layer vanishes.
pub fn regime_expansion(regime: Regime, params: &ModelParams) -> Result<PerturbationResult> {
    let (ops, nu) = regime_operators(regime, params)?;
    let res = perturb(&ops, nu)?;
    for l in (2..nu).step_by(2) {
        if !res.p0(l as usize).is_zero() {
            return Err(Error::Precondition(format!(
                "P0 phi[{l}] does not vanish; the parameters do not sit at a degenerate point"
            )));
        }
    }
    if !res.warnings.is_empty() {
        return Err(Error::InvariantViolation(res.warnings.join("; ")));
    }
    Ok(res)
}

pub fn limit_hamiltonian(regime: Regime, params: &ModelParams) -> Result<QuadraticHamiltonian> {
    params.validate()?;
    let mut h = match regime {
        Regime::Para2D => {
            require_unperturbed(params)?;
            let region = classify(params)?;
            if !matches!(region, Region::ParaI | Region::ParaIIi | Region::MixedIIiv) {
                return Err(Error::Precondition(format!(
                    "paramagnetic point is not stable in region {region:?}"
                )));
            }
            linear_hamiltonian_at(params, &params.paramagnetic_point())
        }
        Regime::Ferro2D => {
            require_unperturbed(params)?;
            let rep = stationary_points(params)?;
            let center = rep
                .fixed_points
                .iter()
                .filter(|p| p.stability == Stability::Stable && p.state.m > 0.0)
                .max_by(|a, b| a.state.m.total_cmp(&b.state.m))
                .ok_or_else(|| {
                    Error::Precondition(format!(
                        "no stable ferromagnetic point in region {:?}",
                        rep.region
                    ))
                })?;
            linear_hamiltonian_at(params, &center.state)
        }
        _ => {
            let res = regime_expansion(regime, params)?;
            let sm = struct_matrices(params, &params.paramagnetic_point());
            QuadraticHamiltonian::one_d(res.drift_poly, sm.g1_mat[0][0])
        }
    };
    h.regime = Some(regime);
    Ok(h)
}

/// S′(x) = −b(x)/Σ and sup |H(x, S′(x))| over `grid`.
pub fn quasipotential_check(h: &QuadraticHamiltonian, grid: &[f64]) -> Result<(Vec<f64>, f64)> {
    if h.dim() != 1 {
        return Err(Error::Precondition(
            "quasipotential check is one-dimensional".into(),
        ));
    }
    let sigma = h.sigma[0][0];
    if !(sigma > 0.0) {
        return Err(Error::Precondition(format!("need sigma > 0, got {sigma}")));
    }
    let mut residual = 0.0f64;
    let sp: Vec<f64> = grid
        .iter()
        .map(|&x| {
            let p = -h.drift(&[x])[0] / sigma;
            residual = residual.max(h.eval(&[x], &[p]).abs());
            p
        })
        .collect();
    Ok((sp, residual))
}

/// Trapezoidal ∫ L(γ, γ̇) dt; one-dimensional Lagrangians read the first
/// coordinate of the path.
pub fn action_integral(l: &Lagrangian, path: &Trajectory) -> Result<f64> {
    let n = path.len();
    if n < 2 {
        return Err(Error::Precondition("path needs at least two points".into()));
    }
    if path.times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition(
            "path times must be strictly increasing".into(),
        ));
    }
    let dim = l.hamiltonian.dim();
    let pt = |i: usize| -> Vec<f64> {
        let s = path.states[i];
        if dim == 1 {
            vec![s.m]
        } else {
            vec![s.m, s.q]
        }
    };
    let t = &path.times;
    let vel = |i: usize| -> Vec<f64> {
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let (pa, pb) = (pt(a), pt(b));
        pa.iter()
            .zip(&pb)
            .map(|(u, v)| (v - u) / (t[b] - t[a]))
            .collect()
    };
    let vals: Vec<f64> = (0..n).map(|i| l.eval(&pt(i), &vel(i))).collect();
    Ok((1..n)
        .map(|i| 0.5 * (vals[i] + vals[i - 1]) * (t[i] - t[i - 1]))
        .sum())
}
