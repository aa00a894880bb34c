//! Car-following dynamics: IDM law, equilibrium, linearization and
//! population sampling.

mod chain;
mod distribution;
mod idm;
mod params;

use thiserror::Error;

pub use chain::{Vehicle, VehicleChain};
pub use distribution::{sample_params, sample_params_with, Law, ParamDistribution, MIN_ACCEPTANCE};
pub use idm::{acceleration_from_gap, desired_gap, equilibrium_gap, idm_acceleration, linearize};
pub use params::{
    IdmParams, Interval, LinearCoeffs, Param, ParamBox, VehicleKinematics, DEFAULT_LENGTH,
    DEFAULT_V_MAX,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("non-positive net gap {net_gap} m")]
    GapCollision { net_gap: f64 },
    #[error("no equilibrium at v_eq = {v_eq} m/s (v_max = {v_max} m/s)")]
    NoEquilibrium { v_eq: f64, v_max: f64 },
    #[error("parameter {name} = {value} must be finite and strictly positive")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("parameter {name} = {value} outside admissible interval [{lo}, {hi}]")]
    OutOfBounds {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid distribution for {name}")]
    InvalidDistribution { name: &'static str },
    #[error("truncation of {name} keeps only {mass:.3e} of the probability mass")]
    SamplingInfeasible { name: &'static str, mass: f64 },
    #[error("sample count must be at least 1")]
    EmptySample,
    #[error("vehicle chain is empty")]
    EmptyChain,
}
