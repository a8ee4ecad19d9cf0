use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::expr::VExpression;
use super::ops::{project_p, project_p0, OpKind, OperatorSet};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResult {
    pub nu: u32,
    /// ψ[0..=ν]
    pub psi_layers: Vec<VExpression>,
    /// φ[1..=ν]
    pub phi_layers: Vec<VExpression>,
    /// P₀φ[1..=ν]
    pub p0_layers: Vec<VExpression>,
    /// x-power ↦ coefficient of x^power·ψ′ in P₀φ[ν].
    pub drift_poly: BTreeMap<u32, f64>,
    /// Terms of P₀φ[ν] that are not of the form c·x^a·ψ′.
    pub warnings: Vec<String>,
}

impl PerturbationResult {
    /// P₀φ[r] for 1 ≤ r ≤ ν.
    pub fn p0(&self, r: usize) -> &VExpression {
        &self.p0_layers[r - 1]
    }

    pub fn phi(&self, r: usize) -> &VExpression {
        &self.phi_layers[r - 1]
    }

    pub fn drift_at(&self, x: f64) -> f64 {
        self.drift_poly
            .iter()
            .map(|(p, c)| c * x.powi(*p as i32))
            .sum()
    }
}

/// Runs the recursion φ[r] = Σ_{l<r} 𝒬_{r+1−l} ψ[l], ψ[r] = P φ[r] from
/// ψ[0] = ψ.
pub fn perturb(ops: &OperatorSet, nu: u32) -> Result<PerturbationResult> {
    perturb_from(VExpression::psi(), ops, nu)
}

pub fn perturb_from(psi0: VExpression, ops: &OperatorSet, nu: u32) -> Result<PerturbationResult> {
    if nu != 2 && nu != 4 {
        return Err(Error::Precondition(format!("nu must be 2 or 4, got {nu}")));
    }
    let a11 = ops.a11();
    if a11 == 0.0 {
        return Err(Error::SingularProjection);
    }
    let nu_us = nu as usize;
    let mut psi = vec![psi0];
    let mut phi = Vec::with_capacity(nu_us);
    let mut p0 = Vec::with_capacity(nu_us);
    for r in 1..=nu_us {
        let parts: Vec<VExpression> = (0..r)
            .map(|l| ops.apply_slot((r + 1 - l) as u32, &psi[l]))
            .collect();
        let f = VExpression::sum(parts.iter());
        psi.push(project_p(&f, a11)?);
        p0.push(project_p0(&f));
        phi.push(f);
    }
    let mut drift_poly = BTreeMap::new();
    let mut warnings = Vec::new();
    for t in p0[nu_us - 1].terms() {
        if t.dpsi == 1 {
            *drift_poly.entry(t.xpow).or_insert(0.0) += t.coeff;
        } else {
            warnings.push(format!(
                "P0 phi[{nu}] keeps a term {:e}*x^{}*psi^({}) outside the drift form",
                t.coeff, t.xpow, t.dpsi
            ));
        }
    }
    Ok(PerturbationResult {
        nu,
        psi_layers: psi,
        phi_layers: phi,
        p0_layers: p0,
        drift_poly,
        warnings,
    })
}

/// Q_{k,m}^- P Q_{j,n}^+ e
fn minus_p_plus(
    ops: &OperatorSet,
    k: (u32, u32),
    j: (u32, u32),
    e: &VExpression,
) -> Result<VExpression> {
    let a11 = ops.a11();
    let plus = ops.apply_component(OpKind::Plus, j.0, j.1, e);
    Ok(ops.apply_component(OpKind::Minus, k.0, k.1, &project_p(&plus, a11)?))
}

/// Coefficient of x^{k+j−1}ψ′ in Q_k⁻ P Q_j⁺ ψ.
pub fn combo_check(ops: &OperatorSet, j: u32, k: u32) -> Result<f64> {
    let e = minus_p_plus(ops, (k, k), (j, j), &VExpression::psi())?;
    Ok(e.coefficient(k + j - 1, 0, 1))
}

/// Coefficient of x⁵ψ′ in Q₂⁻ P Q₃¹ P Q₂⁺ ψ.
pub fn triple_combo_check(ops: &OperatorSet) -> Result<f64> {
    let a11 = ops.a11();
    let inner = project_p(
        &ops.apply_component(OpKind::Plus, 2, 2, &VExpression::psi()),
        a11,
    )?;
    let mid = project_p(&ops.apply_component(OpKind::One, 3, 3, &inner), a11)?;
    Ok(ops
        .apply_component(OpKind::Minus, 2, 2, &mid)
        .coefficient(5, 0, 1))
}

/// P₀φ[2] assembled from individual components:
/// Q_{3,3}⁰ψ + Q_{2,2}⁻PQ_{2,2}⁺ψ + Q_{3,1}⁰ψ.
pub fn p0_phi2_closed_form(ops: &OperatorSet) -> Result<VExpression> {
    let psi = VExpression::psi();
    let parts = [
        ops.apply_component(OpKind::Zero, 3, 3, &psi),
        minus_p_plus(ops, (2, 2), (2, 2), &psi)?,
        ops.apply_component(OpKind::Zero, 3, 1, &psi),
    ];
    Ok(VExpression::sum(parts.iter()))
}

/// P₀φ[4] assembled from individual components (standard terms plus the
/// m < k corrections).
pub fn p0_phi4_closed_form(ops: &OperatorSet) -> Result<VExpression> {
    let a11 = ops.a11();
    let psi = VExpression::psi();
    let p_plus2 = project_p(&ops.apply_component(OpKind::Plus, 2, 2, &psi), a11)?;
    let through_one = |m: u32| -> Result<VExpression> {
        let mid = project_p(&ops.apply_component(OpKind::One, 3, m, &p_plus2), a11)?;
        Ok(ops.apply_component(OpKind::Minus, 2, 2, &mid))
    };
    // (Q_{3,3}⁰ + Q_{2,2}⁻PQ_{2,2}⁺ + Q_{3,1}⁰) on PQ_{2,2}⁺ψ
    let inner = VExpression::sum(
        [
            ops.apply_component(OpKind::Zero, 3, 3, &p_plus2),
            minus_p_plus(ops, (2, 2), (2, 2), &p_plus2)?,
            ops.apply_component(OpKind::Zero, 3, 1, &p_plus2),
        ]
        .iter(),
    );
    let nested = ops.apply_component(OpKind::Minus, 2, 2, &project_p(&inner, a11)?);
    let parts = [
        ops.apply_component(OpKind::Zero, 5, 5, &psi),
        minus_p_plus(ops, (2, 2), (4, 4), &psi)?,
        minus_p_plus(ops, (4, 4), (2, 2), &psi)?,
        through_one(3)?,
        ops.apply_component(OpKind::Zero, 5, 3, &psi),
        minus_p_plus(ops, (2, 2), (4, 2), &psi)?,
        minus_p_plus(ops, (4, 2), (2, 2), &psi)?,
        through_one(1)?,
        ops.apply_component(OpKind::Zero, 5, 1, &psi),
        nested,
    ];
    Ok(VExpression::sum(parts.iter()))
}
