use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate, Disturbance, SimError, Trajectory};
use crate::model::VehicleChain;

/// Per-vehicle norms of the speed perturbation; index 0 is vehicle 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormProfile {
    /// `√(Σ_k ẏ(t_k)² dt)` (m·s^−1/2).
    pub l2: Vec<f64>,
    /// `max_k |ẏ(t_k)|` (m/s).
    pub linf: Vec<f64>,
}

impl NormProfile {
    pub fn len(&self) -> usize {
        self.l2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l2.is_empty()
    }

    /// ℒ₂ never grows by more than `rel_tol` from one vehicle to the next.
    pub fn l2_non_increasing(&self, rel_tol: f64) -> bool {
        non_increasing(&self.l2, rel_tol)
    }

    pub fn linf_non_increasing(&self, rel_tol: f64) -> bool {
        non_increasing(&self.linf, rel_tol)
    }

    /// First vehicle (1-based) whose ℒ₂ norm exceeds its predecessor's.
    pub fn l2_growth_onset(&self, rel_tol: f64) -> Option<usize> {
        self.l2
            .windows(2)
            .position(|w| w[1] > w[0] * (1.0 + rel_tol))
            .map(|k| k + 2)
    }

    /// `l2[n+1] − l2[n]`.
    pub fn l2_increments(&self) -> Vec<f64> {
        self.l2.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

fn non_increasing(xs: &[f64], rel_tol: f64) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] * (1.0 + rel_tol))
}

/// Euler-sum ℒ₂ and sampled ℒ∞ norms of every vehicle's speed perturbation.
pub fn norm_profile(traj: &Trajectory) -> NormProfile {
    let samples = traj.len().saturating_sub(1);
    let (l2, linf) = (0..traj.vehicle_count())
        .map(|n| {
            let mut sum = 0.0;
            let mut peak = 0.0f64;
            for (k, d) in traj.speed_perturbation(n).enumerate() {
                if k < samples {
                    sum += d * d;
                }
                peak = peak.max(d.abs());
            }
            ((sum * traj.dt).sqrt(), peak)
        })
        .unzip();
    NormProfile { l2, linf }
}

/// Outcome of one amplitude of [`nonlinear_stability_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub amplitude: f64,
    pub profile: NormProfile,
    pub clamp_events: usize,
    /// The ℒ₂ profile rises somewhere along the chain.
    pub grows: bool,
}

/// Step disturbance of each amplitude on vehicle 1 during `[t_on, t_off)`,
/// one independent simulation per amplitude.
pub fn nonlinear_stability_sweep(
    chain: &VehicleChain,
    amplitudes: &[f64],
    window: (f64, f64),
    duration: f64,
    dt: f64,
) -> Vec<Result<SweepResult, SimError>> {
    amplitudes
        .par_iter()
        .map(|&amplitude| {
            let d = Disturbance::step(1, amplitude, window.0, window.1);
            let traj = simulate(chain, &[d], duration, dt)?;
            let profile = norm_profile(&traj);
            Ok(SweepResult {
                amplitude,
                grows: !profile.l2_non_increasing(1e-9),
                clamp_events: traj.clamp_events.len(),
                profile,
            })
        })
        .collect()
}
