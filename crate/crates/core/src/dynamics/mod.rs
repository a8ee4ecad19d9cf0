//! Quenched disorder, exact simulation of the (m, q) chain, the mean-field
//! ODE and fluctuation rescaling.

mod chain;
mod ode;

pub use chain::{jump_rates, simulate, simulate_with_rng, ChainState, OutputGrid, SimOutcome};
pub use ode::{integrate_ode, integrate_ode_terminal, rk4_step};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MacroState;

/// Generator for replica `stream` of a run seeded with `seed`.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSample {
    pub n: u64,
    /// Number of sites with η = +1.
    pub n_plus: u64,
    pub eta_bar: f64,
    pub seed: u64,
}

impl DisorderSample {
    pub fn from_counts(n: u64, n_plus: u64, seed: u64) -> Result<Self> {
        if n == 0 || n_plus > n {
            return Err(Error::Domain(format!(
                "need 0 <= n_plus <= n and n >= 1, got n_plus={n_plus}, n={n}"
            )));
        }
        Ok(DisorderSample {
            n,
            n_plus,
            eta_bar: (2.0 * n_plus as f64 - n as f64) / n as f64,
            seed,
        })
    }

    /// Balanced fields (η̄ = 0 for even n).
    pub fn annealed(n: u64) -> Self {
        DisorderSample {
            n,
            n_plus: n / 2,
            eta_bar: (2.0 * (n / 2) as f64 - n as f64) / n as f64,
            seed: 0,
        }
    }
}

pub fn sample_disorder(n: u64, seed: u64) -> Result<DisorderSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = sample_disorder_with(n, &mut rng)?;
    d.seed = seed;
    Ok(d)
}

pub fn sample_disorder_with<R: Rng + ?Sized>(n: u64, rng: &mut R) -> Result<DisorderSample> {
    if n == 0 {
        return Err(Error::Domain("system size n must be at least 1".into()));
    }
    let bin = Binomial::new(n, 0.5).map_err(|e| Error::Domain(e.to_string()))?;
    let n_plus = bin.sample(rng);
    DisorderSample::from_counts(n, n_plus, 0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coordinates {
    /// (m, q)
    #[default]
    Macro,
    /// (x, y) after rescaling
    Fluctuation,
}

impl Coordinates {
    pub fn header(self) -> &'static str {
        match self {
            Coordinates::Macro => "t,m,q",
            Coordinates::Fluctuation => "t,x,y",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MacroState>,
    #[serde(default)]
    pub coords: Coordinates,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, MacroState)> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    pub fn push(&mut self, t: f64, s: MacroState) {
        self.times.push(t);
        self.states.push(s);
    }
}

/// Maps a path to fluctuation coordinates: t ↦ t / b^ν,
/// (m, q) ↦ b·(m − m_c, q − q_c).
pub fn rescale_fluctuations(
    traj: &Trajectory,
    center: MacroState,
    b_n: f64,
    nu: u32,
) -> Result<Trajectory> {
    if ![0, 2, 4].contains(&nu) {
        return Err(Error::Precondition(format!(
            "nu must be 0, 2 or 4, got {nu}"
        )));
    }
    if !(b_n > 0.0) {
        return Err(Error::Precondition(format!(
            "b_n must be positive, got {b_n}"
        )));
    }
    let tscale = b_n.powi(nu as i32);
    Ok(Trajectory {
        times: traj.times.iter().map(|t| t / tscale).collect(),
        states: traj
            .states
            .iter()
            .map(|s| MacroState::new(b_n * (s.m - center.m), b_n * (s.q - center.q)))
            .collect(),
        coords: Coordinates::Fluctuation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LilReport {
    /// b_n^{ν+1}·η̄_n
    pub scaled_disorder: f64,
    /// b_n^{2ν+2}·n⁻¹·log log n
    pub indicator: f64,
}

pub fn lil_check(n: u64, b_n: f64, nu: u32, eta_bar: f64) -> Result<LilReport> {
    if n < 3 {
        return Err(Error::Domain(format!("log log n needs n >= 3, got {n}")));
    }
    let nf = n as f64;
    Ok(LilReport {
        scaled_disorder: b_n.powi(nu as i32 + 1) * eta_bar,
        indicator: b_n.powi(2 * nu as i32 + 2) / nf * nf.ln().ln(),
    })
}
