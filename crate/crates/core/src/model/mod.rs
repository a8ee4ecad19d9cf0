//! Static model mathematics: the G-functions, their derivative tables, the
//! structure matrices and the phase diagram.

mod phase;

pub use phase::{
    classify, g1, g2, stationary_points, tricritical_field, FixedPoint, PhaseReport, Region,
    Stability, TRICRITICAL_BETA,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];

/// Order of the size-dependent perturbations κ_n, θ_n relative to b_n.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingCase {
    #[default]
    None,
    BnMinus2,
    BnMinus4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    #[serde(rename = "B")]
    pub field: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub scaling: ScalingCase,
}

impl ModelParams {
    pub fn new(beta: f64, field: f64) -> Result<Self> {
        let p = ModelParams {
            beta,
            field,
            kappa: 0.0,
            theta: 0.0,
            scaling: ScalingCase::None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_perturbation(
        mut self,
        kappa: f64,
        theta: f64,
        scaling: ScalingCase,
    ) -> Result<Self> {
        self.kappa = kappa;
        self.theta = theta;
        self.scaling = scaling;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.beta.is_finite() && self.beta > 0.0) {
            errs.push("beta must be positive".to_string());
        }
        if !(self.field.is_finite() && self.field >= 0.0) {
            errs.push("B must be nonnegative".to_string());
        }
        if !self.kappa.is_finite() || !self.theta.is_finite() {
            errs.push("kappa and theta must be finite".to_string());
        }
        if self.scaling == ScalingCase::None && (self.kappa != 0.0 || self.theta != 0.0) {
            errs.push("kappa and theta must vanish when scaling is None".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Domain(errs.join("; ")))
        }
    }

    pub fn cosh_bb(&self) -> f64 {
        (self.beta * self.field).cosh()
    }

    pub fn sinh_bb(&self) -> f64 {
        (self.beta * self.field).sinh()
    }

    /// The paramagnetic fixed point (0, tanh βB).
    pub fn paramagnetic_point(&self) -> MacroState {
        MacroState::new(0.0, (self.beta * self.field).tanh())
    }

    /// Residual of the critical-curve identity β = cosh²(βB).
    pub fn critical_defect(&self) -> f64 {
        self.beta - self.cosh_bb().powi(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroState {
    pub m: f64,
    pub q: f64,
}

impl MacroState {
    pub const fn new(m: f64, q: f64) -> Self {
        MacroState { m, q }
    }

    /// Membership in E₀: (m+q, m−q) ∈ [−1,1]².
    pub fn in_e0(&self) -> bool {
        let tol = 1e-12;
        (self.m + self.q).abs() <= 1.0 + tol && (self.m - self.q).abs() <= 1.0 + tol
    }

    pub fn dist(&self, other: &MacroState) -> f64 {
        (self.m - other.m).hypot(self.q - other.q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GValues {
    pub g1_plus: f64,
    pub g1_minus: f64,
    pub g2_plus: f64,
    pub g2_minus: f64,
}

pub fn eval_g(params: &ModelParams, state: &MacroState) -> GValues {
    let (beta, b) = (params.beta, params.field);
    let (x, y) = (state.m, state.q);
    let (up, um) = (beta * (x + b), beta * (x - b));
    let (chp, shp) = (up.cosh(), up.sinh());
    let (chm, shm) = (um.cosh(), um.sinh());
    GValues {
        g1_plus: chp - (x + y) * shp,
        g1_minus: chm - (x - y) * shm,
        g2_plus: shp - (x + y) * chp,
        g2_minus: shm - (x - y) * chm,
    }
}

/// Right-hand side of the mean-field ODE.
pub fn mean_field_rhs(params: &ModelParams, state: &MacroState) -> (f64, f64) {
    let g = eval_g(params, state);
    (g.g2_plus + g.g2_minus, g.g2_plus - g.g2_minus)
}

/// Which closed form of D^k𝒢₂ to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DerivativeCase {
    Generic,
    Stationary,
    Paramagnetic,
    CriticalCurve,
    TriCritical,
}

const CASE_TOL: f64 = 1e-10;

fn check_case(params: &ModelParams, state: &MacroState, case: DerivativeCase) -> Result<()> {
    let stationary = || {
        let (dm, dq) = mean_field_rhs(params, state);
        if dm.abs().max(dq.abs()) > CASE_TOL {
            return Err(Error::Precondition(format!(
                "state ({}, {}) is not stationary: G2+ + G2- = {dm:e}, G2+ - G2- = {dq:e}",
                state.m, state.q
            )));
        }
        Ok(())
    };
    let para = || {
        let t = (params.beta * params.field).tanh();
        if state.m.abs() > CASE_TOL || (state.q - t).abs() > CASE_TOL {
            return Err(Error::Precondition(format!(
                "state must be the paramagnetic point m = 0, q = tanh(beta B) = {t}"
            )));
        }
        Ok(())
    };
    let curve = || {
        let d = params.critical_defect();
        if d.abs() > CASE_TOL {
            return Err(Error::Precondition(format!(
                "beta = cosh^2(beta B) fails by {d:e}"
            )));
        }
        Ok(())
    };
    match case {
        DerivativeCase::Generic => Ok(()),
        DerivativeCase::Stationary => stationary(),
        DerivativeCase::Paramagnetic => para(),
        DerivativeCase::CriticalCurve => {
            para()?;
            curve()
        }
        DerivativeCase::TriCritical => {
            para()?;
            curve()?;
            if (params.beta - TRICRITICAL_BETA).abs() > CASE_TOL {
                return Err(Error::Precondition(format!(
                    "beta must equal 3/2 at the tri-critical point, got {}",
                    params.beta
                )));
            }
            Ok(())
        }
    }
}

/// D^k𝒢₂ at `state`: first column ∂ₓᵏ, second column ∂ₓᵏ⁻¹∂_y, rows
/// G₂⁺+G₂⁻ and G₂⁺−G₂⁻.
pub fn d_k_g2(
    params: &ModelParams,
    state: &MacroState,
    k: u32,
    case: DerivativeCase,
) -> Result<Mat2> {
    if !(1..=5).contains(&k) {
        return Err(Error::Precondition(format!(
            "derivative order k must be in 1..=5, got {k}"
        )));
    }
    check_case(params, state, case)?;
    let beta = params.beta;
    let kf = k as f64;
    let bk = beta.powi(k as i32);
    let bk1 = beta.powi(k as i32 - 1);
    let (c, s) = (params.cosh_bb(), params.sinh_bb());
    let odd = k % 2 == 1;
    let m = match case {
        DerivativeCase::Generic => return Ok(generic_dk(params, state, k)),
        DerivativeCase::Stationary => {
            let (cm, sm) = ((beta * state.m).cosh(), (beta * state.m).sinh());
            if odd {
                let g = eval_g(params, state);
                let (sum, diff) = (g.g1_plus + g.g1_minus, g.g1_plus - g.g1_minus);
                [
                    [bk * sum - 2.0 * bk1 * kf * cm * c, -2.0 * bk1 * sm * s],
                    [bk * diff - 2.0 * bk1 * kf * sm * s, -2.0 * bk1 * cm * c],
                ]
            } else {
                [
                    [-2.0 * bk1 * kf * sm * c, -2.0 * bk1 * cm * s],
                    [-2.0 * bk1 * kf * cm * s, -2.0 * bk1 * sm * c],
                ]
            }
        }
        DerivativeCase::Paramagnetic => {
            if odd {
                [
                    [2.0 * bk / c - 2.0 * bk1 * c * kf, 0.0],
                    [0.0, -2.0 * bk1 * c],
                ]
            } else {
                [[0.0, -2.0 * bk1 * s], [-2.0 * bk1 * s * kf, 0.0]]
            }
        }
        DerivativeCase::CriticalCurve | DerivativeCase::TriCritical => {
            if odd {
                [[-2.0 * bk1 * c * (kf - 1.0), 0.0], [0.0, -2.0 * bk1 * c]]
            } else {
                [[0.0, -2.0 * bk1 * s], [-2.0 * bk1 * s * kf, 0.0]]
            }
        }
    };
    Ok(m)
}

/// General derivative formulas, valid at any point.
fn generic_dk(params: &ModelParams, state: &MacroState, k: u32) -> Mat2 {
    let beta = params.beta;
    let (x, y) = (state.m, state.q);
    let kf = k as f64;
    let bk = beta.powi(k as i32);
    let bk1 = beta.powi(k as i32 - 1);
    // (∂ₓᵏ G₂^±, ∂ₓᵏ⁻¹∂_y G₂^±) for sign ±1
    let parts = |sign: f64| {
        let u = beta * (x + sign * params.field);
        let (ch, sh) = (u.cosh(), u.sinh());
        let (sh_k, ch_k, ch_k1) = if k % 2 == 0 {
            (sh, ch, sh)
        } else {
            (ch, sh, ch)
        };
        let w = x + sign * y;
        let dx = bk * sh_k - w * bk * ch_k - kf * bk1 * ch_k1;
        let dy = -sign * bk1 * ch_k1;
        (dx, dy)
    };
    let (pxp, pyp) = parts(1.0);
    let (pxm, pym) = parts(-1.0);
    [[pxp + pxm, pyp + pym], [pxp - pxm, pyp - pym]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructMatrices {
    /// 𝔾₁
    pub g1_mat: Mat2,
    /// Ĝ₁
    pub g1_hat: Mat2,
    /// 𝔹
    pub b_mat: Mat2,
}

pub fn struct_matrices(params: &ModelParams, state: &MacroState) -> StructMatrices {
    let g = eval_g(params, state);
    let (sum, diff) = (g.g1_plus + g.g1_minus, g.g1_plus - g.g1_minus);
    let bm = params.beta * state.m;
    let (c, s) = (params.cosh_bb(), params.sinh_bb());
    let diag = bm.cosh() * c;
    let off = bm.sinh() * s;
    StructMatrices {
        g1_mat: [[sum, diff], [diff, sum]],
        g1_hat: [[sum, 0.0], [diff, 0.0]],
        b_mat: [[diag, off], [off, diag]],
    }
}

impl StructMatrices {
    /// βĜ₁ − 2𝔹, the linear drift around a stationary point.
    pub fn linear_drift(&self, beta: f64) -> Mat2 {
        let mut a = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                a[i][j] = beta * self.g1_hat[i][j] - 2.0 * self.b_mat[i][j];
            }
        }
        a
    }
}

/// Eigenvalues of a real 2×2 matrix as (re, im) pairs, largest real part first.
pub fn eigenvalues(a: &Mat2) -> [(f64, f64); 2] {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        // avoid cancellation in the smaller root
        let big = if half >= 0.0 { half + r } else { half - r };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (l1, l2) = if big >= small {
            (big, small)
        } else {
            (small, big)
        };
        [(l1, 0.0), (l2, 0.0)]
    } else {
        let r = (-disc).sqrt();
        [(half, r), (half, -r)]
    }
}
