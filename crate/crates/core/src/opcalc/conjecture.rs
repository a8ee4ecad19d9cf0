//! Closed-form candidates for the drift coefficient, summed over index
//! compositions.

use std::collections::BTreeMap;

use super::ops::{OpKind, OperatorSet};
use super::recursion::perturb;
use crate::error::{Error, Result};

/// Largest slot carrying an operator.
const MAX_SLOT: u32 = 5;

fn check_hypothesis(ops: &OperatorSet, nu: u32) -> Result<()> {
    let res = perturb(ops, nu)?;
    for l in (2..nu).step_by(2) {
        if !res.p0(l as usize).is_zero() {
            return Err(Error::Precondition(format!(
                "P0 phi[{l}] does not vanish, so the closed form does not apply"
            )));
        }
    }
    Ok(())
}

/// Compositions i₁+…+iₙ = total with the admissibility test applied to
/// every prefix.
fn compositions(total: u32, parts: usize, allowed: &dyn Fn(usize, u32) -> bool) -> Vec<Vec<u32>> {
    fn go(
        rem: u32,
        pos: usize,
        parts: usize,
        cur: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
        allowed: &dyn Fn(usize, u32) -> bool,
    ) {
        if pos == parts {
            if rem == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let left = (parts - pos - 1) as u32;
        for i in 1..=rem.saturating_sub(left) {
            if allowed(pos, i) {
                cur.push(i);
                go(rem - i, pos + 1, parts, cur, out, allowed);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(total, 0, parts, &mut Vec::new(), &mut out, allowed);
    out
}

/// x^{ν+1} coefficient of the drift predicted by the standard closed form.
pub fn conjecture_drift(ops: &OperatorSet, nu: u32) -> Result<f64> {
    check_hypothesis(ops, nu)?;
    Ok(conjecture_sum(ops, nu))
}

/// The alternating composition sum, without checking the hypothesis.
pub fn conjecture_sum(ops: &OperatorSet, nu: u32) -> f64 {
    let a11 = ops.a11();
    let at = |kind, k: u32| {
        if k <= MAX_SLOT {
            ops.coeff(kind, k, k)
        } else {
            0.0
        }
    };
    let mut total = at(OpKind::Zero, nu + 1);
    for n in 2..=(nu as usize + 1) {
        let admissible = |pos: usize, i: u32| {
            if pos == 0 || pos == n - 1 {
                i % 2 == 0
            } else {
                i % 2 == 1 && i != 1
            }
        };
        for comp in compositions(nu + n as u32, n, &admissible) {
            let mut prod = at(OpKind::Minus, comp[0]) * at(OpKind::Plus, comp[n - 1]);
            for &i in &comp[1..n - 1] {
                prod *= at(OpKind::One, i);
            }
            let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
            total += sign * prod / a11.powi(n as i32 - 1);
        }
    }
    total
}

/// x-power ↦ coefficient predicted by the closed form of the extended
/// calculus (operators Q_{k,m} with m ≤ k).
pub fn conjecture_drift_extended(ops: &OperatorSet, nu: u32) -> Result<BTreeMap<u32, f64>> {
    check_hypothesis(ops, nu)?;
    for o in &ops.ops {
        if o.a != 0.0 && o.k % 2 != o.m % 2 {
            return Err(Error::Precondition(format!(
                "closed form assumes a_(k,m) = 0 when k and m differ in parity; found k={}, m={}",
                o.k, o.m
            )));
        }
    }
    Ok(conjecture_sum_extended(ops, nu))
}

pub fn conjecture_sum_extended(ops: &OperatorSet, nu: u32) -> BTreeMap<u32, f64> {
    let a11 = ops.a11();
    let at = |kind, k: u32, m: u32| {
        if k <= MAX_SLOT && m <= k {
            ops.coeff(kind, k, m)
        } else {
            0.0
        }
    };
    let mut out = BTreeMap::new();
    for mu in (0..=nu).step_by(2) {
        let mut total = at(OpKind::Zero, nu + 1, mu + 1);
        for n in 2..=(nu as usize + 1) {
            let i_ok = |pos: usize, i: u32| pos == 0 || pos == n - 1 || i != 1;
            let r_ok = |pos: usize, r: u32| {
                if pos == 0 || pos == n - 1 {
                    r % 2 == 0
                } else {
                    r % 2 == 1
                }
            };
            let is = compositions(nu + n as u32, n, &i_ok);
            let rs = compositions(mu + n as u32, n, &r_ok);
            for i in &is {
                for r in &rs {
                    if i.iter().zip(r).any(|(a, b)| b > a) {
                        continue;
                    }
                    let mut prod =
                        at(OpKind::Minus, i[0], r[0]) * at(OpKind::Plus, i[n - 1], r[n - 1]);
                    for j in 1..n - 1 {
                        prod *= at(OpKind::One, i[j], r[j]);
                    }
                    let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
                    total += sign * prod / a11.powi(n as i32 - 1);
                }
            }
        }
        if total != 0.0 {
            out.insert(mu + 1, total);
        }
    }
    out
}
