use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{Coordinates, DisorderSample, Trajectory};
use crate::error::{Error, Result};
use crate::model::{MacroState, ModelParams};

/// Microscopic content of a point of E_n: spin counts within each field
/// class. Only these four counts enter the rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainState {
    pub n: u64,
    pub n_plus: u64,
    /// Up spins among the sites with η = +1.
    pub up_plus: u64,
    /// Up spins among the sites with η = −1.
    pub up_minus: u64,
}

impl ChainState {
    pub fn new(n: u64, n_plus: u64, up_plus: u64, up_minus: u64) -> Result<Self> {
        if n_plus > n || up_plus > n_plus || up_minus > n - n_plus {
            return Err(Error::InvariantViolation(format!(
                "counts outside E_n: n={n}, n_plus={n_plus}, up_plus={up_plus}, up_minus={up_minus}"
            )));
        }
        Ok(ChainState {
            n,
            n_plus,
            up_plus,
            up_minus,
        })
    }

    pub fn n_minus(&self) -> u64 {
        self.n - self.n_plus
    }

    /// Σ_{η=+1} σ_i
    pub fn u(&self) -> i64 {
        2 * self.up_plus as i64 - self.n_plus as i64
    }

    /// Σ_{η=−1} σ_i
    pub fn w(&self) -> i64 {
        2 * self.up_minus as i64 - self.n_minus() as i64
    }

    pub fn m(&self) -> f64 {
        (self.u() + self.w()) as f64 / self.n as f64
    }

    pub fn q(&self) -> f64 {
        (self.u() - self.w()) as f64 / self.n as f64
    }

    pub fn macro_state(&self) -> MacroState {
        MacroState::new(self.m(), self.q())
    }

    /// Point of E_n closest to `target` (per field class, ties toward zero
    /// class magnetization).
    pub fn nearest(disorder: &DisorderSample, target: MacroState) -> Self {
        let n = disorder.n;
        let n_plus = disorder.n_plus;
        let n_minus = n - n_plus;
        let u_star = 0.5 * n as f64 * (target.m + target.q);
        let w_star = 0.5 * n as f64 * (target.m - target.q);
        ChainState {
            n,
            n_plus,
            up_plus: nearest_count(n_plus, u_star),
            up_minus: nearest_count(n_minus, w_star),
        }
    }

    /// Independent spins whose class means match `target` in expectation.
    pub fn product<R: Rng + ?Sized>(
        disorder: &DisorderSample,
        target: MacroState,
        rng: &mut R,
    ) -> Result<Self> {
        let n = disorder.n;
        let n_plus = disorder.n_plus;
        let n_minus = n - n_plus;
        let draw = |size: u64, sum: f64, rng: &mut R| -> Result<u64> {
            if size == 0 {
                return Ok(0);
            }
            let p = (0.5 * (1.0 + sum / size as f64)).clamp(0.0, 1.0);
            let bin =
                rand_distr::Binomial::new(size, p).map_err(|e| Error::Domain(e.to_string()))?;
            Ok(bin.sample(rng))
        };
        let up_plus = draw(n_plus, 0.5 * n as f64 * (target.m + target.q), rng)?;
        let up_minus = draw(n_minus, 0.5 * n as f64 * (target.m - target.q), rng)?;
        Ok(ChainState {
            n,
            n_plus,
            up_plus,
            up_minus,
        })
    }
}

fn nearest_count(size: u64, sum_target: f64) -> u64 {
    // class sum = 2·up − size
    let exact = 0.5 * (sum_target + size as f64);
    let lo = exact.floor().clamp(0.0, size as f64) as u64;
    let hi = (lo + 1).min(size);
    let sum_of = |up: u64| 2.0 * up as f64 - size as f64;
    let (dl, dh) = (
        (sum_of(lo) - sum_target).abs(),
        (sum_of(hi) - sum_target).abs(),
    );
    if dl < dh || (dl == dh && sum_of(lo).abs() <= sum_of(hi).abs()) {
        lo
    } else {
        hi
    }
}

/// Rates of the four channels in the order (−−, −+, ++, +−).
pub fn jump_rates(params: &ModelParams, chain: &ChainState, eta_bar: f64) -> Result<[f64; 4]> {
    let n = chain.n as f64;
    let (x, y) = (chain.m(), chain.q());
    let (beta, b) = (params.beta, params.field);
    let pref = [
        1.0 + eta_bar + x + y,
        1.0 - eta_bar + x - y,
        1.0 + eta_bar - x - y,
        1.0 - eta_bar - x + y,
    ];
    let expo = [
        (-beta * (x + b)).exp(),
        (-beta * (x - b)).exp(),
        (beta * (x + b)).exp(),
        (beta * (x - b)).exp(),
    ];
    let mut rates = [0.0; 4];
    for i in 0..4 {
        let p = pref[i];
        if p < -1e-12 {
            return Err(Error::InvariantViolation(format!(
                "negative rate prefactor {p} in channel {i}: state (m={x}, q={y}) lies outside E_n for eta_bar={eta_bar}"
            )));
        }
        rates[i] = n * p.max(0.0) / 4.0 * expo[i];
    }
    Ok(rates)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OutputGrid {
    /// `points` equally spaced times on [0, t_end], endpoints included.
    Uniform(usize),
    /// Caller-chosen increasing times.
    Times(Vec<f64>),
    /// Every jump (small systems only).
    Raw,
}

impl Default for OutputGrid {
    fn default() -> Self {
        OutputGrid::Uniform(1000)
    }
}

impl OutputGrid {
    fn times(&self, t_end: f64) -> Option<Vec<f64>> {
        match self {
            OutputGrid::Uniform(points) => {
                let p = (*points).max(2);
                Some((0..p).map(|i| t_end * i as f64 / (p - 1) as f64).collect())
            }
            OutputGrid::Times(ts) => Some(ts.clone()),
            OutputGrid::Raw => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub trajectory: Trajectory,
    pub final_state: ChainState,
    pub jumps: u64,
    /// The total rate vanished before `t_end`.
    pub absorbed: bool,
}

pub fn simulate(
    params: &ModelParams,
    disorder: &DisorderSample,
    init: ChainState,
    t_end: f64,
    seed: u64,
    grid: &OutputGrid,
) -> Result<SimOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with_rng(params, disorder, init, t_end, grid, &mut rng)
}

const RESYNC: u32 = 1 << 12;

/// Race-of-exponentials simulation of the (m, q) chain.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    params: &ModelParams,
    disorder: &DisorderSample,
    init: ChainState,
    t_end: f64,
    grid: &OutputGrid,
    rng: &mut R,
) -> Result<SimOutcome> {
    if init.n != disorder.n || init.n_plus != disorder.n_plus {
        return Err(Error::Precondition(format!(
            "initial state (n={}, n_plus={}) inconsistent with disorder (n={}, n_plus={})",
            init.n, init.n_plus, disorder.n, disorder.n_plus
        )));
    }
    if !(t_end >= 0.0) {
        return Err(Error::Precondition(format!(
            "t_end must be nonnegative, got {t_end}"
        )));
    }
    let times = grid.times(t_end);
    if let Some(ts) = &times {
        if ts.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Precondition(
                "output grid must be nondecreasing".into(),
            ));
        }
    }
    let n = init.n as f64;
    let beta = params.beta;
    let ebp = (beta * params.field).exp();
    let ebm = 1.0 / ebp;
    let step = (2.0 * beta / n).exp();

    let (mut up_p, mut up_m) = (init.up_plus as i64, init.up_minus as i64);
    let (n_p, n_m) = (init.n_plus as i64, init.n_minus() as i64);
    let mag = |up_p: i64, up_m: i64| (2 * (up_p + up_m) - n_p - n_m) as f64 / n;
    let mut e = (beta * mag(up_p, up_m)).exp();
    let mut since_sync = 0u32;

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        coords: Coordinates::Macro,
    };
    let state_of = |up_p: i64, up_m: i64| {
        let u = 2 * up_p - n_p;
        let w = 2 * up_m - n_m;
        MacroState::new((u + w) as f64 / n, (u - w) as f64 / n)
    };
    let raw = times.is_none();
    let ts = times.unwrap_or_default();
    if raw {
        traj.push(0.0, state_of(up_p, up_m));
    }
    let mut gi = 0usize;
    let mut t = 0.0;
    let mut jumps = 0u64;
    let mut absorbed = false;
    loop {
        let ei = 1.0 / e;
        let r1 = up_p as f64 * ei * ebm;
        let r2 = up_m as f64 * ei * ebp;
        let r3 = (n_p - up_p) as f64 * e * ebp;
        let r4 = (n_m - up_m) as f64 * e * ebm;
        let total = r1 + r2 + r3 + r4;
        let t_next = if total > 0.0 {
            let hold: f64 = Exp1.sample(rng);
            t + hold / total
        } else {
            absorbed = true;
            f64::INFINITY
        };
        let cur = state_of(up_p, up_m);
        while gi < ts.len() && ts[gi] < t_next {
            traj.push(ts[gi], cur);
            gi += 1;
        }
        if t_next > t_end || (!raw && gi == ts.len()) {
            if raw {
                traj.push(t_end, cur);
            }
            break;
        }
        t = t_next;
        let pick = rng.random::<f64>() * total;
        if pick < r1 {
            up_p -= 1;
            e /= step;
        } else if pick < r1 + r2 {
            up_m -= 1;
            e /= step;
        } else if pick < r1 + r2 + r3 {
            up_p += 1;
            e *= step;
        } else {
            up_m += 1;
            e *= step;
        }
        jumps += 1;
        since_sync += 1;
        if since_sync == RESYNC {
            e = (beta * mag(up_p, up_m)).exp();
            since_sync = 0;
        }
        if raw {
            traj.push(t, state_of(up_p, up_m));
        }
    }
    Ok(SimOutcome {
        trajectory: traj,
        final_state: ChainState {
            n: init.n,
            n_plus: init.n_plus,
            up_plus: up_p as u64,
            up_minus: up_m as u64,
        },
        jumps,
        absorbed,
    })
}
