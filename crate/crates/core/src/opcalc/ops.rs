use serde::{Deserialize, Serialize};

use super::expr::{VExpression, VTerm};
use crate::error::{Error, Result};
use crate::model::{ModelParams, ScalingCase};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    /// a·x^{m−1}·y·∂ₓ
    Plus,
    /// a·x^m·∂_y
    Minus,
    /// a·x^m·∂ₓ
    Zero,
    /// a·x^{m−1}·y·∂_y
    One,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OpKind,
    /// b_n-order slot
    pub k: u32,
    /// monomial degree
    pub m: u32,
    pub a: f64,
}

impl OperatorSpec {
    pub fn new(kind: OpKind, k: u32, m: u32, a: f64) -> Result<Self> {
        if !(1..=5).contains(&k) || m == 0 || m > k {
            return Err(Error::Precondition(format!(
                "operator slot k={k}, degree m={m} out of range"
            )));
        }
        let even = m % 2 == 0;
        match kind {
            OpKind::Plus | OpKind::Minus if !even => {
                return Err(Error::Precondition(format!(
                    "{kind:?} operators need even m, got {m}"
                )))
            }
            OpKind::Zero | OpKind::One if even => {
                return Err(Error::Precondition(format!(
                    "{kind:?} operators need odd m, got {m}"
                )))
            }
            _ => {}
        }
        if kind == OpKind::Zero && k == 1 && m == 1 && a != 0.0 {
            return Err(Error::Precondition(
                "the coefficient of Q_{1,1}^0 must vanish".into(),
            ));
        }
        Ok(OperatorSpec { kind, k, m, a })
    }

    /// Shorthand for the standard calculus, where m = k.
    pub fn standard(kind: OpKind, k: u32, a: f64) -> Result<Self> {
        OperatorSpec::new(kind, k, k, a)
    }
}

pub fn apply_operator(op: &OperatorSpec, e: &VExpression) -> VExpression {
    let a = op.a;
    let m = op.m;
    let mut out = Vec::with_capacity(2 * e.terms().len());
    for t in e.terms() {
        let c = t.coeff;
        match op.kind {
            OpKind::Plus => {
                if t.xpow > 0 {
                    out.push(VTerm::new(
                        a * c * t.xpow as f64,
                        t.xpow - 1 + m - 1,
                        t.ypow + 1,
                        t.dpsi,
                    ));
                }
                out.push(VTerm::new(a * c, t.xpow + m - 1, t.ypow + 1, t.dpsi + 1));
            }
            OpKind::Minus => {
                if t.ypow > 0 {
                    out.push(VTerm::new(
                        a * c * t.ypow as f64,
                        t.xpow + m,
                        t.ypow - 1,
                        t.dpsi,
                    ));
                }
            }
            OpKind::Zero => {
                if t.xpow > 0 {
                    out.push(VTerm::new(
                        a * c * t.xpow as f64,
                        t.xpow - 1 + m,
                        t.ypow,
                        t.dpsi,
                    ));
                }
                out.push(VTerm::new(a * c, t.xpow + m, t.ypow, t.dpsi + 1));
            }
            OpKind::One => {
                if t.ypow > 0 {
                    out.push(VTerm::new(
                        a * c * t.ypow as f64,
                        t.xpow + m - 1,
                        t.ypow,
                        t.dpsi,
                    ));
                }
            }
        }
    }
    VExpression::from_terms(out)
}

/// P: drops the y-free part and inverts Q₁¹ on the rest.
pub fn project_p(e: &VExpression, a11: f64) -> Result<VExpression> {
    if a11 == 0.0 {
        return Err(Error::SingularProjection);
    }
    Ok(VExpression::from_terms(
        e.terms()
            .iter()
            .filter(|t| t.ypow > 0)
            .map(|t| VTerm {
                coeff: -t.coeff / (t.ypow as f64 * a11),
                ..*t
            })
            .collect(),
    ))
}

/// P₀: keeps the y-free part.
pub fn project_p0(e: &VExpression) -> VExpression {
    VExpression::from_terms(e.terms().iter().filter(|t| t.ypow == 0).copied().collect())
}

/// A family of operators; 𝒬_k is the sum of the members in slot k.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OperatorSet {
    pub ops: Vec<OperatorSpec>,
}

impl OperatorSet {
    pub fn new(ops: Vec<OperatorSpec>) -> Self {
        OperatorSet { ops }
    }

    /// Sum of the coefficients of all members matching (kind, k, m).
    pub fn coeff(&self, kind: OpKind, k: u32, m: u32) -> f64 {
        self.ops
            .iter()
            .filter(|o| o.kind == kind && o.k == k && o.m == m)
            .map(|o| o.a)
            .sum()
    }

    pub fn a11(&self) -> f64 {
        self.coeff(OpKind::One, 1, 1)
    }

    /// 𝒬_k e
    pub fn apply_slot(&self, k: u32, e: &VExpression) -> VExpression {
        let parts: Vec<VExpression> = self
            .ops
            .iter()
            .filter(|o| o.k == k)
            .map(|o| apply_operator(o, e))
            .collect();
        VExpression::sum(parts.iter())
    }

    /// Q_{k,m}^z e for a single component (summing duplicates).
    pub fn apply_component(&self, kind: OpKind, k: u32, m: u32, e: &VExpression) -> VExpression {
        let a = self.coeff(kind, k, m);
        if a == 0.0 {
            return VExpression::zero();
        }
        apply_operator(&OperatorSpec { kind, k, m, a }, e)
    }

    pub fn extend(&mut self, more: impl IntoIterator<Item = OperatorSpec>) {
        self.ops.extend(more);
    }
}

/// Coefficients read off D^k𝒢₂ at the paramagnetic point.
pub fn build_standard_q(params: &ModelParams) -> OperatorSet {
    let beta = params.beta;
    let (c, s) = (params.cosh_bb(), params.sinh_bb());
    let b2 = beta * beta;
    let b3 = b2 * beta;
    let b4 = b3 * beta;
    let a2 = -2.0 * beta * s;
    let a4 = -b3 * s / 3.0;
    let op = |kind, k, a| OperatorSpec { kind, k, m: k, a };
    OperatorSet::new(vec![
        op(OpKind::One, 1, -2.0 * c),
        op(OpKind::Plus, 2, a2),
        op(OpKind::Minus, 2, a2),
        op(OpKind::Zero, 3, -2.0 / 3.0 * b2 * c),
        op(OpKind::One, 3, -b2 * c),
        op(OpKind::Plus, 4, a4),
        op(OpKind::Minus, 4, a4),
        op(OpKind::Zero, 5, -b4 * c / 15.0),
        op(OpKind::One, 5, -b4 * c / 12.0),
    ])
}

/// Whether the perturbed parameters are declared to stay on the critical
/// curve β_n = cosh²(β_n B_n).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveConstraint {
    #[default]
    Free,
    OnCurve,
}

/// First-order (κ, θ) coefficient of the x∂ₓ part of the linearized drift.
fn linear_shift(params: &ModelParams) -> f64 {
    let (beta, b) = (params.beta, params.field);
    let (c, s) = (params.cosh_bb(), params.sinh_bb());
    let t = s / c;
    2.0 / c * (1.0 - 2.0 * beta * b * t) * params.kappa - 4.0 * beta * s * params.theta
}

/// Second-order (κ, θ) Taylor term of a(β, B) = 2β/cosh(βB) − 2cosh(βB).
fn quadratic_shift(params: &ModelParams) -> f64 {
    let (beta, b) = (params.beta, params.field);
    let (c, s) = (params.cosh_bb(), params.sinh_bb());
    let (c2, c3) = (c * c, c * c * c);
    let w = c2 - 2.0 * s * s;
    let a_bb = -4.0 * b * s / c2 - 2.0 * beta * b * b * w / c3 - 2.0 * b * b * c;
    let a_bf = -4.0 * beta * s / c2 - 2.0 * beta * beta * b * w / c3 - 2.0 * s - 2.0 * beta * b * c;
    let a_ff = -2.0 * beta.powi(3) * w / c3 - 2.0 * beta * beta * c;
    let (k, th) = (params.kappa, params.theta);
    0.5 * k * k * a_bb + k * th * a_bf + 0.5 * th * th * a_ff
}

/// Standard operators plus the (κ, θ) corrections for the declared scaling.
pub fn build_extended_q(params: &ModelParams, constraint: CurveConstraint) -> Result<OperatorSet> {
    let mut set = build_standard_q(params);
    let beta = params.beta;
    let b = params.field;
    let (c, s) = (params.cosh_bb(), params.sinh_bb());
    let (k, th) = (params.kappa, params.theta);
    let on_curve = constraint == CurveConstraint::OnCurve;
    match params.scaling {
        ScalingCase::None => {
            return Err(Error::Precondition(
                "extended operators need a scaling case for kappa and theta".into(),
            ))
        }
        ScalingCase::BnMinus2 => {
            let a42 = -2.0 * ((s + beta * b * c) * k + beta * beta * c * th);
            set.extend([
                OperatorSpec {
                    kind: OpKind::Zero,
                    k: 3,
                    m: 1,
                    a: if on_curve { 0.0 } else { linear_shift(params) },
                },
                OperatorSpec {
                    kind: OpKind::One,
                    k: 3,
                    m: 1,
                    a: -2.0 * s * (b * k + beta * th),
                },
                OperatorSpec {
                    kind: OpKind::Plus,
                    k: 4,
                    m: 2,
                    a: a42,
                },
                OperatorSpec {
                    kind: OpKind::Minus,
                    k: 4,
                    m: 2,
                    a: a42,
                },
                OperatorSpec {
                    kind: OpKind::Zero,
                    k: 5,
                    m: 3,
                    a: -2.0 / 3.0 * (beta * (2.0 * c + beta * b * s) * k + beta.powi(3) * s * th),
                },
                OperatorSpec {
                    kind: OpKind::Zero,
                    k: 5,
                    m: 1,
                    a: if on_curve {
                        0.0
                    } else {
                        quadratic_shift(params)
                    },
                },
            ]);
        }
        ScalingCase::BnMinus4 => {
            set.extend([OperatorSpec {
                kind: OpKind::Zero,
                k: 5,
                m: 1,
                a: linear_shift(params),
            }]);
        }
    }
    Ok(set)
}
