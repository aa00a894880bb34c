//! Tuning of automated-vehicle parameters for weak string stability, and the
//! mixed-traffic experiment driver.

mod anneal;
mod experiment;
mod problem;

use thiserror::Error;

use crate::linear::LinearError;
use crate::model::ModelError;
use crate::sim::SimError;

pub use anneal::{optimize_av, OptimizationResult, SaConfig, SaTrace};
pub use experiment::{
    experiment_30, tune_chain, AvOutcome, CellResult, ExperimentConfig, ExperimentReport,
    ExperimentRow, ParamShiftRow, DEFAULT_FRACTIONS,
};
pub use problem::{
    objective, window_gains, worst_case_augment, Evaluation, Fictitious, OptimizationProblem,
    PenaltyWeighting, Placement, Window, WindowGain, WindowMember, WindowSet, DEFAULT_ALPHA,
    DEFAULT_FREE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("vehicle index {index} out of range for {len} vehicles")]
    InvalidIndex { index: usize, len: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("infeasible candidate: {0}")]
    Infeasible(String),
    #[error("no feasible candidate found")]
    AllInfeasible,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Independent seed for stream `stream` of a run seeded with `seed`
/// (SplitMix64 finalizer).
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
