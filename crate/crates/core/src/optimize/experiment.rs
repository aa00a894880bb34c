use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::anneal::{optimize_av, SaConfig};
use super::problem::{
    Fictitious, OptimizationProblem, PenaltyWeighting, Window, WindowSet, DEFAULT_ALPHA,
    DEFAULT_FREE,
};
use super::{sub_seed, OptimizeError};
use crate::model::{sample_params, IdmParams, Param, ParamBox, ParamDistribution, VehicleChain};
use crate::sim::{norm_profile, simulate, Disturbance, NormProfile, DEFAULT_DT, DEFAULT_HOLD};

pub const DEFAULT_FRACTIONS: [f64; 4] = [0.0, 0.1, 0.2, 0.3];

const STREAM_PARAMS: u64 = 0;
const STREAM_POSITIONS: u64 = 1;
const STREAM_PRBS: u64 = 2;
const STREAM_SA: u64 = 1000;

/// Mixed-traffic experiment: a sampled string with a share of automated
/// vehicles excited by a PRBS acceleration on vehicle 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub vehicles: usize,
    pub distribution: ParamDistribution,
    /// Admissible box of the automated vehicles.
    pub bounds: ParamBox,
    /// `v_eq / v_max`.
    pub v_eq_ratio: f64,
    pub prbs_amplitude: f64,
    pub prbs_hold: [f64; 2],
    pub prbs_duration: f64,
    pub duration: f64,
    pub dt: f64,
    pub sa: SaConfig,
    pub alpha: f64,
    pub window: Window,
    pub window_set: WindowSet,
    pub weighting: PenaltyWeighting,
    pub free: Vec<Param>,
    pub fictitious: Vec<Fictitious>,
    pub io_gain_weight: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            vehicles: 30,
            distribution: ParamDistribution::default(),
            bounds: ParamBox::default(),
            v_eq_ratio: 1.0 / 3.0,
            prbs_amplitude: 1.0,
            prbs_hold: DEFAULT_HOLD,
            prbs_duration: 60.0,
            duration: 240.0,
            dt: DEFAULT_DT,
            sa: SaConfig::default(),
            alpha: DEFAULT_ALPHA,
            window: Window::default(),
            window_set: WindowSet::default(),
            weighting: PenaltyWeighting::default(),
            free: DEFAULT_FREE.to_vec(),
            fictitious: Vec::new(),
            io_gain_weight: 0.0,
        }
    }
}

impl ExperimentConfig {
    pub fn v_eq(&self) -> f64 {
        self.v_eq_ratio * self.distribution.v_max
    }

    pub fn automated_count(&self, fraction: f64) -> usize {
        ((fraction * self.vehicles as f64).round() as usize).min(self.vehicles.saturating_sub(1))
    }

    fn sigma(&self) -> Vec<f64> {
        self.free
            .iter()
            .map(|&p| self.distribution.law(p).std())
            .collect()
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        if self.vehicles < 2 {
            return Err(OptimizeError::InvalidProblem(
                "at least 2 vehicles required".into(),
            ));
        }
        self.distribution.validate()?;
        if !(self.v_eq_ratio > 0.0 && self.v_eq_ratio < 1.0) {
            return Err(OptimizeError::InvalidProblem(
                "v_eq_ratio must lie in (0, 1)".into(),
            ));
        }
        if self.sigma().iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(OptimizeError::InvalidProblem(
                "free parameters need a population with positive spread".into(),
            ));
        }
        if self.sa.budget == 0 {
            return Err(OptimizeError::InvalidProblem(
                "SA budget must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Tuning outcome of one automated vehicle (1-based `vehicle`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvOutcome {
    pub vehicle: usize,
    pub theta_hat: IdmParams,
    pub theta_star: IdmParams,
    pub gamma_hat: Option<f64>,
    pub gamma_star: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub seed: u64,
    pub fraction: f64,
    /// 1-based indices of the automated vehicles.
    pub automated: Vec<usize>,
    pub outcomes: Vec<AvOutcome>,
    pub profile: Option<NormProfile>,
    pub error: Option<String>,
}

/// One CSV row of per-vehicle norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub seed: u64,
    pub fraction: f64,
    pub vehicle: usize,
    pub l2: f64,
    pub linf: f64,
    /// `(l2 − l2_baseline) / l2_baseline`; empty without a baseline.
    pub relative_l2: Option<f64>,
}

/// Reference and optimized value of one parameter of one automated vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamShiftRow {
    pub seed: u64,
    pub fraction: f64,
    pub vehicle: usize,
    pub param: Param,
    pub reference: f64,
    pub optimized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<CellResult>,
}

impl ExperimentReport {
    pub fn cell(&self, seed: u64, fraction: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.seed == seed && c.fraction == fraction)
    }

    pub fn rows(&self) -> Vec<ExperimentRow> {
        let mut out = Vec::new();
        for cell in &self.cells {
            let Some(profile) = &cell.profile else {
                continue;
            };
            let baseline = self.cell(cell.seed, 0.0).and_then(|c| c.profile.as_ref());
            for n in 0..profile.len() {
                let relative_l2 = baseline
                    .map(|b| b.l2[n])
                    .filter(|&b| b > 0.0)
                    .map(|b| (profile.l2[n] - b) / b);
                out.push(ExperimentRow {
                    seed: cell.seed,
                    fraction: cell.fraction,
                    vehicle: n + 1,
                    l2: profile.l2[n],
                    linf: profile.linf[n],
                    relative_l2,
                });
            }
        }
        out
    }

    /// Per-vehicle mean and sample standard deviation of ℒ₂ over the
    /// successful cells of `fraction`.
    pub fn mean_profile(&self, fraction: f64) -> Vec<(f64, f64)> {
        let profiles: Vec<&NormProfile> = self
            .cells
            .iter()
            .filter(|c| c.fraction == fraction)
            .filter_map(|c| c.profile.as_ref())
            .collect();
        let Some(first) = profiles.first() else {
            return Vec::new();
        };
        let count = profiles.len() as f64;
        (0..first.len())
            .map(|n| {
                let mean = profiles.iter().map(|p| p.l2[n]).sum::<f64>() / count;
                let var = if profiles.len() > 1 {
                    profiles
                        .iter()
                        .map(|p| (p.l2[n] - mean).powi(2))
                        .sum::<f64>()
                        / (count - 1.0)
                } else {
                    0.0
                };
                (mean, var.sqrt())
            })
            .collect()
    }

    pub fn param_shifts(&self) -> Vec<ParamShiftRow> {
        let mut out = Vec::new();
        for cell in &self.cells {
            for o in &cell.outcomes {
                for p in Param::ALL {
                    out.push(ParamShiftRow {
                        seed: cell.seed,
                        fraction: cell.fraction,
                        vehicle: o.vehicle,
                        param: p,
                        reference: o.theta_hat.get(p),
                        optimized: o.theta_star.get(p),
                    });
                }
            }
        }
        out
    }

    /// Medians of the reference and optimized values of `param` over every
    /// automated vehicle.
    pub fn median_shift(&self, param: Param) -> Option<(f64, f64)> {
        let (mut reference, mut optimized): (Vec<f64>, Vec<f64>) = self
            .param_shifts()
            .into_iter()
            .filter(|r| r.param == param)
            .map(|r| (r.reference, r.optimized))
            .unzip();
        Some((median(&mut reference)?, median(&mut optimized)?))
    }

    pub fn errors(&self) -> Vec<(u64, f64, &str)> {
        self.cells
            .iter()
            .filter_map(|c| c.error.as_deref().map(|e| (c.seed, c.fraction, e)))
            .collect()
    }
}

fn median(xs: &mut [f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

/// Runs every (seed, fraction) cell concurrently. A fraction-0 baseline is
/// always included so relative norms can be formed. Cell failures are
/// recorded in the cell and do not stop the others.
pub fn experiment_30(
    config: &ExperimentConfig,
    seeds: &[u64],
    fractions: &[f64],
) -> Result<ExperimentReport, OptimizeError> {
    config.validate()?;
    let mut all_fractions = vec![0.0];
    for &f in fractions {
        if !(0.0..1.0).contains(&f) {
            return Err(OptimizeError::InvalidProblem(format!(
                "fraction {f} outside [0, 1)"
            )));
        }
        if !all_fractions.contains(&f) {
            all_fractions.push(f);
        }
    }
    let jobs: Vec<(u64, f64)> = seeds
        .iter()
        .flat_map(|&s| all_fractions.iter().map(move |&f| (s, f)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(seed, fraction)| {
            run_cell(config, seed, fraction).unwrap_or_else(|e| CellResult {
                seed,
                fraction,
                automated: Vec::new(),
                outcomes: Vec::new(),
                profile: None,
                error: Some(e.to_string()),
            })
        })
        .collect();
    Ok(ExperimentReport { cells })
}

/// Tunes the automated vehicles of `chain` in increasing position, each
/// against the already tuned vehicles ahead of it, and writes the results
/// back into `chain`.
pub fn tune_chain(
    chain: &mut VehicleChain,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<AvOutcome>, OptimizeError> {
    let automated = chain.automated_indices();
    let mut outcomes = Vec::with_capacity(automated.len());
    for k in automated {
        let theta_hat = chain.vehicles[k].params;
        let problem = OptimizationProblem {
            chain: chain.clone(),
            av_index: k,
            window: config.window,
            window_set: config.window_set,
            theta_hat,
            free: config.free.clone(),
            bounds: config.bounds,
            alpha: config.alpha,
            sigma: config.sigma(),
            weighting: config.weighting,
            fictitious: config.fictitious.clone(),
            io_gain_weight: config.io_gain_weight,
        };
        let result = optimize_av(&problem, &config.sa, sub_seed(seed, STREAM_SA + k as u64))?;
        chain.vehicles[k].params = result.theta_star;
        outcomes.push(AvOutcome {
            vehicle: k + 1,
            theta_hat,
            theta_star: result.theta_star,
            gamma_hat: result.start.as_ref().map(|e| e.gamma),
            gamma_star: result.gamma_star,
            value: result.value,
        });
    }
    Ok(outcomes)
}

fn run_cell(
    config: &ExperimentConfig,
    seed: u64,
    fraction: f64,
) -> Result<CellResult, OptimizeError> {
    let m = config.vehicles;
    let sampled = sample_params(&config.distribution, sub_seed(seed, STREAM_PARAMS), m)?;
    let mut chain = VehicleChain::from_params(sampled.iter().copied(), config.v_eq());

    // Vehicle 1 stays human; AV sets are nested across fractions.
    let mut order: Vec<usize> = (1..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(sub_seed(
        seed,
        STREAM_POSITIONS,
    )));
    let mut automated: Vec<usize> = order[..config.automated_count(fraction)].to_vec();
    automated.sort_unstable();
    for &k in &automated {
        chain.vehicles[k].automated = true;
    }

    let outcomes = tune_chain(&mut chain, config, seed)?;

    let disturbance = Disturbance::Prbs {
        vehicle: 1,
        amplitude: config.prbs_amplitude,
        hold: config.prbs_hold,
        duration: config.prbs_duration,
        start: 0.0,
        seed: sub_seed(seed, STREAM_PRBS),
    };
    let traj = simulate(&chain, &[disturbance], config.duration, config.dt)?;
    Ok(CellResult {
        seed,
        fraction,
        automated: automated.iter().map(|k| k + 1).collect(),
        outcomes,
        profile: Some(norm_profile(&traj)),
        error: None,
    })
}
