//! Linearized string dynamics: transfer functions, H∞ norms and the strict
//! and weak string-stability predicates.

mod hinf;
mod report;
mod transfer;

use thiserror::Error;

use crate::model::ModelError;

pub use hinf::{
    bounded_real_check, hinf_chain, hinf_chain_with, peak_norm, Cascade, CascadeInput, HinfOptions,
    TfChainGain,
};
#[allow(unused_imports)]
pub(crate) use hinf::{eigenvalues, golden_max};
pub use report::{analyze_chain, analyze_coeffs, PairGain, StabilityReport, VehicleStability};
pub use transfer::{
    build_block_matrices, gamma_gain, gamma_impulse_response, hinf_second_order,
    impulse_response_nonnegative, linf_induced_norm, linf_step_monotone, mimo_hinf, mimo_sigma_max,
    mimo_sufficient_condition, poles, string_stability_coefficient, BlockMatrices, SecondOrderTf,
    TfKind,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearError {
    #[error("vehicle chain is empty")]
    EmptyChain,
    #[error("state matrix is not Hurwitz; the gain is infinite")]
    InfiniteGain,
    #[error("eigenvalue computation did not converge for a {order}×{order} matrix")]
    EigenFailure { order: usize },
    #[error("gain bound {value} must be finite and strictly positive")]
    InvalidBound { value: f64 },
    #[error("pair ({from}, {to}) invalid for a chain of {len} vehicles")]
    InvalidPair { from: usize, to: usize, len: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}
