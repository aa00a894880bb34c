//! Nonlinear time-domain simulation of open vehicle strings and ℒ₂/ℒ∞
//! norms of the resulting speed perturbations.

mod disturbance;
mod integrate;
mod norms;

use thiserror::Error;

use crate::model::ModelError;

pub use disturbance::{prbs, Disturbance, PrbsSignal, DEFAULT_HOLD};
pub use integrate::{simulate, simulate_from, ClampEvent, Trajectory, MAX_DT};
pub use norms::{nonlinear_stability_sweep, norm_profile, NormProfile, SweepResult};

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_DURATION: f64 = 240.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("collision: vehicle {vehicle} reached net gap {net_gap:.3} m at t = {time:.3} s")]
    Collision {
        time: f64,
        vehicle: usize,
        net_gap: f64,
    },
    #[error("non-finite state at t = {time:.3} s")]
    NumericalFailure { time: f64 },
    #[error("time step {dt} s must lie in (0, {max}]")]
    InvalidStep { dt: f64, max: f64 },
    #[error("duration {duration} s is shorter than the disturbance window ending at {needed} s")]
    DurationTooShort { duration: f64, needed: f64 },
    #[error("disturbance targets vehicle {vehicle} of a {len}-vehicle chain")]
    InvalidTarget { vehicle: usize, len: usize },
    #[error("initial state has {got} vehicles, chain has {expected}")]
    InitialStateMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}
