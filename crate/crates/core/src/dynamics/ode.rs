use super::{Coordinates, Trajectory};
use crate::error::{Error, Result};
use crate::model::{mean_field_rhs, MacroState, ModelParams};

const HALVING_TOL: f64 = 1e-6;

pub fn rk4_step(params: &ModelParams, s: MacroState, dt: f64) -> MacroState {
    let f = |s: MacroState| mean_field_rhs(params, &s);
    let k1 = f(s);
    let k2 = f(MacroState::new(
        s.m + 0.5 * dt * k1.0,
        s.q + 0.5 * dt * k1.1,
    ));
    let k3 = f(MacroState::new(
        s.m + 0.5 * dt * k2.0,
        s.q + 0.5 * dt * k2.1,
    ));
    let k4 = f(MacroState::new(s.m + dt * k3.0, s.q + dt * k3.1));
    MacroState::new(
        s.m + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        s.q + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

fn check_inputs(init: &MacroState, t_end: f64, dt: f64) -> Result<usize> {
    if !init.in_e0() {
        return Err(Error::Precondition(format!(
            "initial state ({}, {}) is outside E0",
            init.m, init.q
        )));
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Precondition(format!(
            "need dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}"
        )));
    }
    Ok((t_end / dt).ceil() as usize)
}

fn run(
    params: &ModelParams,
    init: MacroState,
    t_end: f64,
    steps: usize,
    mut visit: impl FnMut(f64, MacroState),
) -> MacroState {
    let h = if steps > 0 { t_end / steps as f64 } else { 0.0 };
    let mut s = init;
    visit(0.0, s);
    for i in 1..=steps {
        s = rk4_step(params, s, h);
        visit(i as f64 * h, s);
    }
    s
}

fn halving_check(
    params: &ModelParams,
    init: MacroState,
    t_end: f64,
    steps: usize,
    end: MacroState,
) -> Result<()> {
    let fine = run(params, init, t_end, 2 * steps, |_, _| {});
    let gap = end.dist(&fine);
    if gap > HALVING_TOL {
        return Err(Error::Tolerance {
            what: "step-halving check of the mean-field ODE".into(),
            got: gap,
            tol: HALVING_TOL,
            hint: "use a smaller dt".into(),
        });
    }
    Ok(())
}

/// Classical RK4 on the mean-field ODE, recording every step.
pub fn integrate_ode(
    params: &ModelParams,
    init: MacroState,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let steps = check_inputs(&init, t_end, dt)?;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        coords: Coordinates::Macro,
    };
    let end = run(params, init, t_end, steps, |t, s| traj.push(t, s));
    halving_check(params, init, t_end, steps, end)?;
    Ok(traj)
}

/// Same integration keeping only the terminal state.
pub fn integrate_ode_terminal(
    params: &ModelParams,
    init: MacroState,
    t_end: f64,
    dt: f64,
) -> Result<MacroState> {
    let steps = check_inputs(&init, t_end, dt)?;
    let end = run(params, init, t_end, steps, |_, _| {});
    halving_check(params, init, t_end, steps, end)?;
    Ok(end)
}
