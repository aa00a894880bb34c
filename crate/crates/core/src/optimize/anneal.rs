use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::{objective, Evaluation, OptimizationProblem};
use super::{sub_seed, OptimizeError};
use crate::model::{IdmParams, Interval};

/// Simulated-annealing schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SaConfig {
    /// Objective evaluations per chain, the start point included.
    pub budget: usize,
    pub t0: f64,
    /// Temperature factor applied every `cooling_every` proposals.
    pub cooling: f64,
    pub cooling_every: usize,
    /// Proposal standard deviation as a fraction of each box width.
    pub step_fraction: f64,
    /// Independent chains run in parallel; the best result wins.
    pub chains: usize,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            budget: 5000,
            t0: 1.0,
            cooling: 0.97,
            cooling_every: 50,
            step_fraction: 0.1,
            chains: 1,
        }
    }
}

impl SaConfig {
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn temperature(&self, proposal: usize) -> f64 {
        self.t0
            * self
                .cooling
                .powi((proposal / self.cooling_every.max(1)) as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SaTrace {
    pub accepted: usize,
    pub rejected: usize,
    pub infeasible: usize,
    /// Best objective after each evaluation (`+∞` until a feasible point).
    pub best: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub theta_star: IdmParams,
    pub gamma_star: f64,
    pub value: f64,
    pub evaluation: Evaluation,
    /// Objective at the (clamped) reference parameters, if feasible.
    pub start: Option<Evaluation>,
    pub trace: SaTrace,
    /// Index of the chain that produced the result.
    pub chain: usize,
}

/// Box-constrained simulated annealing over the free parameters.
pub fn optimize_av(
    problem: &OptimizationProblem,
    config: &SaConfig,
    seed: u64,
) -> Result<OptimizationResult, OptimizeError> {
    if config.budget == 0 {
        return Err(OptimizeError::InvalidProblem(
            "SA budget must be at least 1".into(),
        ));
    }
    problem.validate()?;
    let chains = config.chains.max(1);
    let runs: Vec<Result<OptimizationResult, OptimizeError>> = if chains == 1 {
        vec![anneal(problem, config, seed, 0)]
    } else {
        (0..chains)
            .into_par_iter()
            .map(|k| anneal(problem, config, sub_seed(seed, k as u64), k))
            .collect()
    };
    let mut best: Option<OptimizationResult> = None;
    let mut last_err = None;
    for run in runs {
        match run {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.value < b.value) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(OptimizeError::AllInfeasible))
}

fn anneal(
    problem: &OptimizationProblem,
    config: &SaConfig,
    seed: u64,
    chain: usize,
) -> Result<OptimizationResult, OptimizeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boxes: Vec<Interval> = problem
        .free
        .iter()
        .map(|&p| problem.bounds.get(p))
        .collect();
    let mut trace = SaTrace::default();

    let start_theta = problem.start();
    let start = objective(&start_theta, problem).ok();
    let mut current = (
        start_theta,
        start.as_ref().map_or(f64::INFINITY, |e| e.value),
    );
    let mut best: Option<(IdmParams, Evaluation)> = start.clone().map(|e| (start_theta, e));
    if start.is_none() {
        trace.infeasible += 1;
    }
    trace.best.push(current.1);

    for k in 1..config.budget {
        let mut proposal = current.0;
        for (&p, iv) in problem.free.iter().zip(&boxes) {
            let z: f64 = rng.sample(StandardNormal);
            let x = proposal.get(p) + z * config.step_fraction * iv.width();
            proposal.set(p, reflect(x, iv));
        }
        let u: f64 = rng.random();
        match objective(&proposal, problem) {
            Ok(e) => {
                let delta = e.value - current.1;
                let temp = config.temperature(k);
                let accept = delta <= 0.0 || (temp > 0.0 && u < (-delta / temp).exp());
                if accept {
                    trace.accepted += 1;
                    current = (proposal, e.value);
                } else {
                    trace.rejected += 1;
                }
                if best.as_ref().is_none_or(|b| e.value < b.1.value) {
                    best = Some((proposal, e));
                }
            }
            Err(OptimizeError::Infeasible(_)) | Err(OptimizeError::Model(_)) => {
                trace.infeasible += 1;
            }
            Err(other) => return Err(other),
        }
        trace
            .best
            .push(best.as_ref().map_or(f64::INFINITY, |b| b.1.value));
    }

    let (theta_star, evaluation) = best.ok_or(OptimizeError::AllInfeasible)?;
    Ok(OptimizationResult {
        theta_star: problem.candidate(&theta_star),
        gamma_star: evaluation.gamma,
        value: evaluation.value,
        evaluation,
        start,
        trace,
        chain,
    })
}

/// Folds `x` back into `[lo, hi]` by mirror reflection at the edges.
fn reflect(x: f64, iv: &Interval) -> f64 {
    let width = iv.width();
    if width <= 0.0 {
        return iv.lo;
    }
    let period = 2.0 * width;
    let y = (x - iv.lo).rem_euclid(period);
    if y <= width {
        iv.lo + y
    } else {
        iv.lo + period - y
    }
}
