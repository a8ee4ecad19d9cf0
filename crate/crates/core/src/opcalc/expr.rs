use serde::{Deserialize, Serialize};

/// Relative cut below which merged coefficients are treated as zero.
pub const DROP_TOL: f64 = 1e-14;

/// c·x^a·y^b·ψ^{(d)}(x)
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VTerm {
    pub coeff: f64,
    pub xpow: u32,
    pub ypow: u32,
    pub dpsi: u32,
}

impl VTerm {
    pub const fn new(coeff: f64, xpow: u32, ypow: u32, dpsi: u32) -> Self {
        VTerm {
            coeff,
            xpow,
            ypow,
            dpsi,
        }
    }

    fn key(&self) -> (u32, u32, u32) {
        (self.ypow, self.xpow, self.dpsi)
    }

    /// [coeff, xpow, ypow, dpsi]
    pub fn to_array(&self) -> [f64; 4] {
        [
            self.coeff,
            self.xpow as f64,
            self.ypow as f64,
            self.dpsi as f64,
        ]
    }
}

/// Finite sum of [`VTerm`]s in canonical order: sorted by (ypow, xpow, dpsi),
/// like terms merged, negligible terms dropped.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<[f64; 4]>", try_from = "Vec<[f64; 4]>")]
pub struct VExpression {
    terms: Vec<VTerm>,
}

impl VExpression {
    pub fn zero() -> Self {
        VExpression { terms: Vec::new() }
    }

    /// The formal symbol ψ.
    pub fn psi() -> Self {
        VExpression {
            terms: vec![VTerm::new(1.0, 0, 0, 0)],
        }
    }

    /// Canonical form of a raw sum. The drop threshold is relative to the
    /// largest incoming coefficient, so exact cancellations between large
    /// contributions vanish.
    pub fn from_terms(mut raw: Vec<VTerm>) -> Self {
        let scale = raw.iter().fold(0.0f64, |acc, t| acc.max(t.coeff.abs()));
        raw.sort_by_key(|t| t.key());
        let mut terms: Vec<VTerm> = Vec::with_capacity(raw.len());
        for t in raw {
            match terms.last_mut() {
                Some(last) if last.key() == t.key() => last.coeff += t.coeff,
                _ => terms.push(t),
            }
        }
        terms.retain(|t| t.coeff != 0.0 && t.coeff.abs() > DROP_TOL * scale);
        VExpression { terms }
    }

    pub fn terms(&self) -> &[VTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &VExpression) -> VExpression {
        let mut raw = self.terms.clone();
        raw.extend_from_slice(&other.terms);
        VExpression::from_terms(raw)
    }

    pub fn sum<'a>(parts: impl IntoIterator<Item = &'a VExpression>) -> VExpression {
        VExpression::from_terms(
            parts
                .into_iter()
                .flat_map(|e| e.terms.iter().copied())
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> VExpression {
        VExpression::from_terms(
            self.terms
                .iter()
                .map(|t| VTerm {
                    coeff: t.coeff * s,
                    ..*t
                })
                .collect(),
        )
    }

    pub fn sub(&self, other: &VExpression) -> VExpression {
        self.add(&other.scale(-1.0))
    }

    pub fn max_ypow(&self) -> Option<u32> {
        self.terms.iter().map(|t| t.ypow).max()
    }

    pub fn coefficient(&self, xpow: u32, ypow: u32, dpsi: u32) -> f64 {
        self.terms
            .iter()
            .find(|t| t.xpow == xpow && t.ypow == ypow && t.dpsi == dpsi)
            .map_or(0.0, |t| t.coeff)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().fold(0.0, |a, t| a.max(t.coeff.abs()))
    }

    /// Term-by-term agreement up to a relative tolerance on the larger side.
    pub fn approx_eq(&self, other: &VExpression, rel: f64) -> bool {
        let scale = self
            .max_abs_coeff()
            .max(other.max_abs_coeff())
            .max(f64::MIN_POSITIVE);
        let diff = self.sub(other);
        diff.terms.iter().all(|t| t.coeff.abs() <= rel * scale)
    }

    /// Value at (x, y) given the derivatives ψ, ψ′, ψ″, … at x.
    pub fn eval(&self, x: f64, y: f64, psi_derivs: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coeff
                    * x.powi(t.xpow as i32)
                    * y.powi(t.ypow as i32)
                    * psi_derivs[t.dpsi as usize]
            })
            .sum()
    }

    /// (∂ₓ, ∂_y) at (x, y); `psi_derivs` must reach one order beyond the
    /// largest dpsi.
    pub fn grad(&self, x: f64, y: f64, psi_derivs: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for t in &self.terms {
            let (a, b, d) = (t.xpow as i32, t.ypow as i32, t.dpsi as usize);
            let yb = y.powi(b);
            let xa = x.powi(a);
            let mut gx = xa * yb * psi_derivs[d + 1];
            if a > 0 {
                gx += a as f64 * x.powi(a - 1) * yb * psi_derivs[d];
            }
            g[0] += t.coeff * gx;
            if b > 0 {
                g[1] += t.coeff * b as f64 * xa * y.powi(b - 1) * psi_derivs[d];
            }
        }
        g
    }

    pub fn max_dpsi(&self) -> u32 {
        self.terms.iter().map(|t| t.dpsi).max().unwrap_or(0)
    }
}

impl From<VExpression> for Vec<[f64; 4]> {
    fn from(e: VExpression) -> Self {
        e.terms.iter().map(VTerm::to_array).collect()
    }
}

impl TryFrom<Vec<[f64; 4]>> for VExpression {
    type Error = String;

    fn try_from(rows: Vec<[f64; 4]>) -> Result<Self, Self::Error> {
        let idx = |v: f64| -> Result<u32, String> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(format!("exponent {v} is not a nonnegative integer"))
            }
        };
        let terms = rows
            .into_iter()
            .map(|[c, a, b, d]| Ok(VTerm::new(c, idx(a)?, idx(b)?, idx(d)?)))
            .collect::<Result<Vec<_>, String>>()?;
        Ok(VExpression::from_terms(terms))
    }
}
