//! Simulation and verification toolkit for the random-field Curie-Weiss
//! spin-flip model.
//!
//! * [`model`]: G-functions, derivative tables, phase diagram.
//! * [`dynamics`]: disorder sampling, exact simulation of the (m, q) chain,
//!   mean-field ODE, fluctuation rescaling.
//! * [`opcalc`]: symbolic perturbation calculus yielding limiting drifts.
//! * [`hamjac`]: limiting Hamiltonians and Lagrangians, finite-n
//!   Hamiltonians and their expansion.
//! * [`mdp`]: Monte Carlo estimates of moderate-deviation drifts.
//! * [`verify`]: the acceptance checks, shared by the test suite and the CLI.

pub mod dynamics;
pub mod error;
pub mod hamjac;
pub mod io;
pub mod mdp;
pub mod model;
pub mod opcalc;
pub mod par;
pub mod verify;

pub use error::{Error, Result};
pub use model::{MacroState, ModelParams, ScalingCase};
