use serde::{Deserialize, Serialize};

use super::{d_k_g2, eigenvalues, DerivativeCase, MacroState, ModelParams};
use crate::error::{Error, Result};

pub const TRICRITICAL_BETA: f64 = 1.5;

/// B_tc = (2/3) arccosh √(3/2).
pub fn tricritical_field() -> f64 {
    (2.0 / 3.0) * 1.5f64.sqrt().acosh()
}

/// The critical curve g₁(β) = arccosh(√β)/β.
pub fn g1(beta: f64) -> Result<f64> {
    if !(beta >= 1.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("g1 requires beta >= 1, got {beta}")));
    }
    Ok(beta.sqrt().acosh() / beta)
}

const GRID: usize = 10_000;
const ROOT_TOL: f64 = 1e-12;
const FIELD_TOL: f64 = 1e-13;

/// m − ½[tanh(β(m+B)) + tanh(β(m−B))]
fn selfconsistency(beta: f64, field: f64, m: f64) -> f64 {
    m - 0.5 * ((beta * (m + field)).tanh() + (beta * (m - field)).tanh())
}

/// Whether m ↦ h(m) has a zero in (0, 1]. h(1) > 0 always, so it is enough to
/// know whether h dips to a nonpositive value somewhere; the grid minimum is
/// refined by golden-section search so that nearly tangent pairs of roots
/// are not missed.
fn has_positive_root(beta: f64, field: f64) -> bool {
    let h = |m: f64| selfconsistency(beta, field, m);
    let step = 1.0 / GRID as f64;
    let mut best = (f64::INFINITY, 0usize);
    for i in 1..=GRID {
        let v = h(i as f64 * step);
        if v <= 0.0 {
            return true;
        }
        if v < best.0 {
            best = (v, i);
        }
    }
    let (mut a, mut b) = (
        ((best.1 as f64 - 1.0) * step).max(step * 1e-3),
        ((best.1 + 1) as f64 * step).min(1.0),
    );
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (h(c), h(d));
    while b - a > 1e-14 {
        if fc.min(fd) <= 0.0 {
            return true;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = h(d);
        }
    }
    fc.min(fd) <= 0.0
}

/// g₂(β): supremum of the fields B for which nonzero stationary
/// magnetizations exist. Coincides with g₁ up to β = 3/2.
pub fn g2(beta: f64) -> Result<f64> {
    let lo_init = g1(beta)?;
    if beta <= TRICRITICAL_BETA {
        return Ok(lo_init);
    }
    let mut lo = lo_init;
    let mut hi = 1.0;
    while has_positive_root(beta, hi) {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::NoConvergence {
                what: "g2 upper bracket".into(),
                lo,
                hi,
            });
        }
    }
    for _ in 0..200 {
        if hi - lo <= FIELD_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if has_positive_root(beta, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo > FIELD_TOL {
        return Err(Error::NoConvergence {
            what: "g2 bisection".into(),
            lo,
            hi,
        });
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "Para_I")]
    ParaI,
    #[serde(rename = "Para_IIi")]
    ParaIIi,
    #[serde(rename = "Ferro_IIii")]
    FerroIIii,
    #[serde(rename = "Boundary_IIiii")]
    BoundaryIIiii,
    #[serde(rename = "Mixed_IIiv")]
    MixedIIiv,
    CriticalCurve,
    TriCritical,
}

impl Region {
    /// Number of stationary points the classification predicts.
    pub fn expected_count(self) -> usize {
        match self {
            Region::ParaI | Region::ParaIIi | Region::CriticalCurve | Region::TriCritical => 1,
            Region::FerroIIii | Region::BoundaryIIiii => 3,
            Region::MixedIIiv => 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    Neutral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub state: MacroState,
    pub stability: Stability,
    /// Largest real part among the Jacobian eigenvalues.
    pub leading_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub beta: f64,
    #[serde(rename = "B")]
    pub field: f64,
    pub region: Region,
    pub fixed_points: Vec<FixedPoint>,
}

impl PhaseReport {
    pub fn stable_points(&self) -> impl Iterator<Item = &FixedPoint> {
        self.fixed_points
            .iter()
            .filter(|p| p.stability == Stability::Stable)
    }
}

const NEUTRAL_TOL: f64 = 1e-8;
const CURVE_TOL: f64 = 1e-10;

/// Region label from the g₁/g₂ classification.
pub fn classify(params: &ModelParams) -> Result<Region> {
    let (beta, b) = (params.beta, params.field);
    if beta <= 1.0 {
        return Ok(Region::ParaI);
    }
    let c1 = g1(beta)?;
    if (beta - TRICRITICAL_BETA).abs() <= CURVE_TOL && (b - tricritical_field()).abs() <= CURVE_TOL
    {
        return Ok(Region::TriCritical);
    }
    if (b - c1).abs() <= CURVE_TOL {
        return Ok(if beta < TRICRITICAL_BETA {
            Region::CriticalCurve
        } else {
            Region::BoundaryIIiii
        });
    }
    if b < c1 {
        return Ok(Region::FerroIIii);
    }
    if beta <= TRICRITICAL_BETA || b >= g2(beta)? {
        return Ok(Region::ParaIIi);
    }
    Ok(Region::MixedIIiv)
}

fn bisect_root(beta: f64, field: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let h = |m: f64| selfconsistency(beta, field, m);
    let mut flo = h(lo);
    if flo == 0.0 {
        return Ok(lo);
    }
    for _ in 0..200 {
        if hi - lo <= ROOT_TOL {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        let fm = h(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        what: "stationary magnetization".into(),
        lo,
        hi,
    })
}

/// Positive roots of the self-consistency equation from sign changes on the
/// grid, each refined by bisection.
fn positive_roots(beta: f64, field: f64) -> Result<Vec<f64>> {
    let h = |m: f64| selfconsistency(beta, field, m);
    let step = 1.0 / GRID as f64;
    let mut roots = Vec::new();
    let mut prev_m = step * 1e-3;
    let mut prev = h(prev_m);
    if prev == 0.0 {
        prev = h(step * 0.5e-3);
    }
    for i in 1..=GRID {
        let m = i as f64 * step;
        let v = h(m);
        if v == 0.0 {
            roots.push(m);
        } else if (v < 0.0) != (prev < 0.0) && prev != 0.0 {
            roots.push(bisect_root(beta, field, prev_m, m)?);
        }
        prev = v;
        prev_m = m;
    }
    Ok(roots)
}

/// All stationary points of the mean-field ODE with stability labels.
pub fn stationary_points(params: &ModelParams) -> Result<PhaseReport> {
    params.validate()?;
    let region = classify(params)?;
    let (beta, b) = (params.beta, params.field);
    let mut ms = vec![0.0];
    // Tiny magnetizations at the edge of the first cell are the paramagnetic
    // root seen through rounding; they are not separate fixed points.
    for r in positive_roots(beta, b)? {
        if r > 1e-9 {
            ms.push(r);
            ms.push(-r);
        }
    }
    ms.sort_by(|a, b| a.total_cmp(b));
    let fixed_points = ms
        .into_iter()
        .map(|m| {
            let q = 0.5 * ((beta * (m + b)).tanh() - (beta * (m - b)).tanh());
            let state = MacroState::new(m, q);
            let jac = d_k_g2(params, &state, 1, DerivativeCase::Generic)?;
            let lead = eigenvalues(&jac)[0].0;
            let stability = if lead > NEUTRAL_TOL {
                Stability::Unstable
            } else if lead < -NEUTRAL_TOL {
                Stability::Stable
            } else {
                Stability::Neutral
            };
            Ok(FixedPoint {
                state,
                stability,
                leading_eigenvalue: lead,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseReport {
        beta,
        field: b,
        region,
        fixed_points,
    })
}
