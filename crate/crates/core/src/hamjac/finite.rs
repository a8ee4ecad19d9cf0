use serde::{Deserialize, Serialize};

use super::testfn::TestFunction2D;
use super::QuadraticHamiltonian;
use crate::error::{Error, Result};
use crate::model::{d_k_g2, eval_g, struct_matrices, DerivativeCase, MacroState, ModelParams};
use crate::par::{map_indexed, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn square(lo: f64, hi: f64, points: usize) -> Self {
        Grid {
            x_range: (lo, hi),
            y_range: (lo, hi),
            nx: points,
            ny: points,
        }
    }

    fn axis((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
        if n <= 1 {
            return vec![lo];
        }
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        Self::axis(self.x_range, self.nx)
    }

    pub fn ys(&self) -> Vec<f64> {
        Self::axis(self.y_range, self.ny)
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid::square(-1.0, 1.0, 201)
    }
}

/// Values on a grid, x-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridValues {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridValues {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ys.len() + j]
    }

    pub fn sup_diff(&self, other: &GridValues) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |a, (u, v)| a.max((u - v).abs()))
    }

    fn build(
        grid: &Grid,
        exec: Execution,
        f: impl Fn(f64, f64) -> f64 + Send + Sync,
    ) -> GridValues {
        let xs = grid.xs();
        let ys = grid.ys();
        let ny = ys.len();
        let rows = map_indexed(exec, xs.len(), |i| {
            ys.iter().map(|&y| f(xs[i], y)).collect::<Vec<_>>()
        });
        GridValues {
            values: rows.into_iter().flatten().collect(),
            xs,
            ys: ys[..ny].to_vec(),
        }
    }
}

/// Center, system size and scales shared by the finite-n Hamiltonian and
/// its expansion. The speed exponent is δ = ν + 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSetup {
    pub params: ModelParams,
    pub center: MacroState,
    pub n: f64,
    pub b_n: f64,
    pub nu: u32,
    #[serde(default)]
    pub eta_bar: f64,
}

impl HamiltonianSetup {
    fn check(&self) -> Result<()> {
        if ![0, 2, 4].contains(&self.nu) {
            return Err(Error::Precondition(format!(
                "nu must be 0, 2 or 4, got {}",
                self.nu
            )));
        }
        if !(self.n >= 1.0) || !(self.b_n > 0.0) {
            return Err(Error::Precondition(format!(
                "need n >= 1 and b_n > 0, got n={}, b_n={}",
                self.n, self.b_n
            )));
        }
        Ok(())
    }

    pub fn delta(&self) -> i32 {
        self.nu as i32 + 2
    }
}

/// The exact four-channel H_n f, no Taylor expansion.
pub fn finite_n_hamiltonian(
    setup: &HamiltonianSetup,
    f: &dyn TestFunction2D,
    grid: &Grid,
    exec: Execution,
) -> Result<GridValues> {
    setup.check()?;
    let HamiltonianSetup {
        params,
        center,
        n,
        b_n: b,
        nu,
        eta_bar: eta,
    } = *setup;
    let delta = setup.delta();
    let scale = b.powi(nu as i32 + delta) / 4.0;
    let speed = n * b.powi(-delta);
    let h = 2.0 * b / n;
    let (beta, bf) = (params.beta, params.field);
    let (m, q) = (center.m, center.q);
    Ok(GridValues::build(grid, exec, |x, y| {
        let f0 = f.value(x, y);
        let (xs, ys) = (x / b + m, y / b + q);
        let channel = |pref: f64, expo: f64, sx: f64, sy: f64| {
            let df = f.value(x + sx * h, y + sy * h) - f0;
            pref * expo.exp() * (speed * df).exp_m1()
        };
        scale
            * (channel(1.0 + eta + xs + ys, -beta * (xs + bf), -1.0, -1.0)
                + channel(1.0 + eta - xs - ys, beta * (xs + bf), 1.0, 1.0)
                + channel(1.0 - eta + xs - ys, -beta * (xs - bf), -1.0, 1.0)
                + channel(1.0 - eta - xs + ys, beta * (xs - bf), 1.0, -1.0))
    }))
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Taylor expansion of H_n f to fifth order in 1/b_n, including the
/// disorder terms when η̄ ≠ 0.
pub fn expansion_hamiltonian(
    setup: &HamiltonianSetup,
    f: &dyn TestFunction2D,
    grid: &Grid,
    exec: Execution,
) -> Result<GridValues> {
    setup.check()?;
    let HamiltonianSetup {
        params,
        center,
        b_n: b,
        nu,
        eta_bar: eta,
        ..
    } = *setup;
    let beta = params.beta;
    let g = eval_g(&params, &center);
    let g0 = [g.g2_plus + g.g2_minus, g.g2_plus - g.g2_minus];
    let dk: Vec<_> = (1..=5)
        .map(|k| d_k_g2(&params, &center, k, DerivativeCase::Generic))
        .collect::<Result<_>>()?;
    let g1m = struct_matrices(&params, &center).g1_mat;
    let (c, s) = (params.cosh_bb(), params.sinh_bb());
    let bm = beta * center.m;
    // k-th derivative of (cosh βx·sinh βB, sinh βx·cosh βB) at x = m
    let disorder: Vec<[f64; 2]> = (0..=5u32)
        .map(|k| {
            let bk = beta.powi(k as i32);
            let (ch, sh) = if k % 2 == 0 {
                (bm.cosh(), bm.sinh())
            } else {
                (bm.sinh(), bm.cosh())
            };
            [2.0 * eta * bk * ch * s, 2.0 * eta * bk * sh * c]
        })
        .collect();
    let lead = b.powi(nu as i32 + 1);
    Ok(GridValues::build(grid, exec, |x, y| {
        let gr = f.grad(x, y);
        let dot = |u: [f64; 2]| u[0] * gr[0] + u[1] * gr[1];
        let mut acc = lead * dot(g0) + lead * dot(disorder[0]);
        for k in 1..=5u32 {
            let w = lead * b.powi(-(k as i32)) / factorial(k);
            let xk = x.powi(k as i32);
            let v = [xk, k as f64 * x.powi(k as i32 - 1) * y];
            let d = &dk[k as usize - 1];
            let col = [
                d[0][0] * v[0] + d[0][1] * v[1],
                d[1][0] * v[0] + d[1][1] * v[1],
            ];
            acc += w * dot(col);
            let nk = disorder[k as usize];
            acc += w * xk * dot(nk);
        }
        acc + gr[0] * (g1m[0][0] * gr[0] + g1m[0][1] * gr[1])
            + gr[1] * (g1m[1][0] * gr[0] + g1m[1][1] * gr[1])
    }))
}

/// H applied to f: H(x, ∂ₓf) in one dimension, H((x,y), ∇f) in two.
pub fn limit_on_grid(
    h: &QuadraticHamiltonian,
    f: &dyn TestFunction2D,
    grid: &Grid,
    exec: Execution,
) -> GridValues {
    let dim = h.dim();
    GridValues::build(grid, exec, |x, y| {
        let g = f.grad(x, y);
        if dim == 1 {
            h.eval(&[x], &[g[0]])
        } else {
            h.eval(&[x, y], &g)
        }
    })
}
