//! Smooth, compactly supported test functions with exact derivatives.

use super::jet::Jet;
use crate::opcalc::{PerturbationResult, VExpression};

pub trait Univariate: Send + Sync {
    /// f, f′, …, f^{(order)} at x.
    fn derivatives(&self, x: f64, order: usize) -> Vec<f64>;

    fn value(&self, x: f64) -> f64 {
        self.derivatives(x, 0)[0]
    }
}

pub trait TestFunction2D: Send + Sync {
    fn value(&self, x: f64, y: f64) -> f64;
    fn grad(&self, x: f64, y: f64) -> [f64; 2];
}

/// p(x)·exp(−g·x²)·bump(x/R) with bump(u) = exp(1 − 1/(1 − u²)) on |u| < 1.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpedPoly {
    /// Ascending coefficients of p.
    pub poly: Vec<f64>,
    pub gauss: f64,
    pub radius: f64,
}

impl BumpedPoly {
    pub const DEFAULT_RADIUS: f64 = 3.0;

    pub fn new(poly: Vec<f64>, gauss: f64) -> Self {
        BumpedPoly {
            poly,
            gauss,
            radius: Self::DEFAULT_RADIUS,
        }
    }

    /// x²·exp(−x²)·bump
    pub fn quadratic_gaussian() -> Self {
        BumpedPoly::new(vec![0.0, 0.0, 1.0], 1.0)
    }
}

impl Univariate for BumpedPoly {
    fn derivatives(&self, x: f64, order: usize) -> Vec<f64> {
        let u = x / self.radius;
        if u.abs() >= 1.0 {
            return vec![0.0; order + 1];
        }
        let xj = Jet::var(x, order);
        let mut p = Jet::constant(0.0, order);
        for &c in self.poly.iter().rev() {
            p = &(&p * &xj) + &Jet::constant(c, order);
        }
        let x2 = &xj * &xj;
        let gauss = x2.scale(-self.gauss).exp();
        let one = Jet::constant(1.0, order);
        let denom = &one - &x2.scale(1.0 / (self.radius * self.radius));
        let bump = (&one - &denom.recip()).exp();
        (&(&p * &gauss) * &bump).derivatives()
    }
}

/// f(x, y) = g(x)·h(y)
pub struct Product2D<A, B> {
    pub fx: A,
    pub fy: B,
}

impl<A: Univariate, B: Univariate> TestFunction2D for Product2D<A, B> {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.fx.value(x) * self.fy.value(y)
    }

    fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let gx = self.fx.derivatives(x, 1);
        let gy = self.fy.derivatives(y, 1);
        [gx[1] * gy[0], gx[0] * gy[1]]
    }
}

/// ψ viewed as a function of (x, y).
pub struct OnlyX<A>(pub A);

impl<A: Univariate> TestFunction2D for OnlyX<A> {
    fn value(&self, x: f64, _y: f64) -> f64 {
        self.0.value(x)
    }

    fn grad(&self, x: f64, _y: f64) -> [f64; 2] {
        [self.0.derivatives(x, 1)[1], 0.0]
    }
}

/// F_{n,ψ} = Σ_{l=0}^{ν} b_n^{−l} ψ[l] for a concrete ψ.
pub struct PerturbedFunction<A> {
    layers: Vec<VExpression>,
    b_n: f64,
    psi: A,
    order: usize,
}

impl<A: Univariate> PerturbedFunction<A> {
    pub fn new(result: &PerturbationResult, b_n: f64, psi: A) -> Self {
        let layers = result.psi_layers.clone();
        let order = layers
            .iter()
            .map(|l| l.max_dpsi() as usize)
            .max()
            .unwrap_or(0)
            + 1;
        PerturbedFunction {
            layers,
            b_n,
            psi,
            order,
        }
    }
}

impl<A: Univariate> TestFunction2D for PerturbedFunction<A> {
    fn value(&self, x: f64, y: f64) -> f64 {
        let d = self.psi.derivatives(x, self.order);
        let mut w = 1.0;
        let mut acc = 0.0;
        for layer in &self.layers {
            acc += w * layer.eval(x, y, &d);
            w /= self.b_n;
        }
        acc
    }

    fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let d = self.psi.derivatives(x, self.order);
        let mut w = 1.0;
        let mut acc = [0.0; 2];
        for layer in &self.layers {
            let g = layer.grad(x, y, &d);
            acc[0] += w * g[0];
            acc[1] += w * g[1];
            w /= self.b_n;
        }
        acc
    }
}

/// Adapter for closures.
pub struct FnTest<F, G> {
    pub f: F,
    pub g: G,
}

impl<F, G> TestFunction2D for FnTest<F, G>
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
    G: Fn(f64, f64) -> [f64; 2] + Send + Sync,
{
    fn value(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }

    fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        (self.g)(x, y)
    }
}
