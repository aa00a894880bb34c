//! Per-vehicle and per-pair string-stability summary of a vehicle chain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    hinf_chain, hinf_second_order, impulse_response_nonnegative, linf_step_monotone, mimo_hinf,
    mimo_sufficient_condition, string_stability_coefficient, LinearError,
};
use crate::model::{LinearCoeffs, VehicleChain};

/// Stability indicators of one linearized vehicle. `vehicle` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleStability {
    pub vehicle: usize,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    /// `f1² − 2f1f3 − 2f2`.
    pub s: f64,
    /// Strict ℒ₂ string stability, `S ≥ 0`.
    pub l2_strict: bool,
    /// Real poles of Γ.
    pub linf_monotone: bool,
    /// Nonnegative impulse response of Γ.
    pub impulse_nonnegative: bool,
    /// `f3² ≥ 2f2`.
    pub norm_equality: bool,
    pub hinf: f64,
    pub peak_freq: f64,
    pub mimo_hinf: f64,
    pub mimo_sufficient: bool,
}

impl VehicleStability {
    pub fn new(vehicle: usize, c: LinearCoeffs) -> Self {
        let s = string_stability_coefficient(c);
        let (hinf, peak_freq) = hinf_second_order(c);
        Self {
            vehicle,
            f1: c.f1,
            f2: c.f2,
            f3: c.f3,
            s,
            l2_strict: s >= 0.0,
            linf_monotone: linf_step_monotone(c),
            impulse_nonnegative: impulse_response_nonnegative(c),
            norm_equality: c.f3 * c.f3 >= 2.0 * c.f2,
            hinf,
            peak_freq,
            mimo_hinf: mimo_hinf(c).0,
            mimo_sufficient: mimo_sufficient_condition(c),
        }
    }

    pub fn coeffs(&self) -> LinearCoeffs {
        LinearCoeffs::new(self.f1, self.f2, self.f3)
    }
}

/// H∞ norm of `Γ_{from+1}···Γ_to`, the gain from the speed of vehicle
/// `from` (0 is the virtual leader) to the speed of vehicle `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGain {
    pub from: usize,
    pub to: usize,
    pub gamma: f64,
    pub peak_freq: f64,
}

impl PairGain {
    /// Weak string stability of the pair.
    pub fn is_weakly_stable(&self, tol: f64) -> bool {
        self.gamma <= 1.0 + tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub v_eq: Option<f64>,
    pub vehicles: Vec<VehicleStability>,
    pub pairs: Vec<PairGain>,
}

impl StabilityReport {
    pub fn strictly_unstable_count(&self) -> usize {
        self.vehicles.iter().filter(|v| !v.l2_strict).count()
    }

    pub fn pair(&self, from: usize, to: usize) -> Option<&PairGain> {
        self.pairs.iter().find(|p| p.from == from && p.to == to)
    }
}

pub fn analyze_chain(
    chain: &VehicleChain,
    pairs: &[(usize, usize)],
) -> Result<StabilityReport, LinearError> {
    let coeffs = chain.coeffs()?;
    let mut report = analyze_coeffs(&coeffs, pairs)?;
    report.v_eq = Some(chain.v_eq);
    Ok(report)
}

pub fn analyze_coeffs(
    coeffs: &[LinearCoeffs],
    pairs: &[(usize, usize)],
) -> Result<StabilityReport, LinearError> {
    if coeffs.is_empty() {
        return Err(LinearError::EmptyChain);
    }
    for &(from, to) in pairs {
        if from >= to || to > coeffs.len() {
            return Err(LinearError::InvalidPair {
                from,
                to,
                len: coeffs.len(),
            });
        }
    }
    let vehicles = coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| VehicleStability::new(k + 1, c))
        .collect();
    let pairs = pairs
        .par_iter()
        .map(|&(from, to)| {
            let g = hinf_chain(&coeffs[from..to])?;
            Ok(PairGain {
                from,
                to,
                gamma: g.gamma,
                peak_freq: g.peak_freq,
            })
        })
        .collect::<Result<Vec<_>, LinearError>>()?;
    Ok(StabilityReport {
        v_eq: None,
        vehicles,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IdmParams;

    #[test]
    fn stable_homogeneous_chain() {
        let chain = VehicleChain::homogeneous(IdmParams::new(1.55, 1.7, 0.8, 2.0), 10, 16.5);
        let report = analyze_chain(&chain, &[(0, 10), (2, 5), (9, 10)]).unwrap();
        assert!(report.vehicles.iter().all(|v| v.l2_strict && v.hinf == 1.0));
        for p in &report.pairs {
            assert!((p.gamma - 1.0).abs() < 1e-9, "{p:?}");
        }
        assert_eq!(report.v_eq, Some(16.5));
        assert_eq!(report.strictly_unstable_count(), 0);
    }

    #[test]
    fn flags_follow_their_definitions() {
        let coeffs = [
            LinearCoeffs::new(-0.075, 0.091, 0.55),
            LinearCoeffs::new(-2.0, 0.1, 1.0),
        ];
        let report = analyze_coeffs(&coeffs, &[(0, 2)]).unwrap();
        for v in &report.vehicles {
            assert_eq!(v.l2_strict, v.s >= 0.0);
            assert_eq!(v.norm_equality, v.f3 * v.f3 >= 2.0 * v.f2);
            assert!(!v.mimo_sufficient);
            assert!(v.mimo_hinf >= v.hinf);
        }
        assert!(!report.vehicles[0].l2_strict);
        assert!(report.vehicles[1].l2_strict);
    }

    #[test]
    fn bad_pairs_are_rejected() {
        let coeffs = [LinearCoeffs::new(-0.075, 0.091, 0.55)];
        assert!(matches!(
            analyze_coeffs(&coeffs, &[(0, 2)]),
            Err(LinearError::InvalidPair { .. })
        ));
        assert!(matches!(
            analyze_coeffs(&coeffs, &[(1, 1)]),
            Err(LinearError::InvalidPair { .. })
        ));
        assert_eq!(analyze_coeffs(&[], &[]), Err(LinearError::EmptyChain));
    }
}
