use serde::{Deserialize, Serialize};

use super::OptimizeError;
use crate::linear::{hinf_chain, hinf_second_order, peak_norm, Cascade, CascadeInput, HinfOptions};
use crate::model::{linearize, IdmParams, LinearCoeffs, Param, ParamBox, VehicleChain};

/// Neighbour window `[n − upstream, n + downstream]` around the automated
/// vehicle `n`, clipped to the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub upstream: usize,
    pub downstream: usize,
}

impl Default for Window {
    fn default() -> Self {
        Self {
            upstream: 1,
            downstream: 2,
        }
    }
}

/// Which products of the window enter γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowSet {
    /// Every contiguous sub-window `[i', j']` with `i ≤ i' ≤ n ≤ j' ≤ j`.
    #[default]
    Containing,
    /// Only the full window `[i, j]`.
    Single,
}

/// Diagonal weighting of the parameter penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyWeighting {
    /// `1/σ²`, a Mahalanobis distance.
    #[default]
    InverseVariance,
    /// `1/σ`.
    InverseStd,
}

/// Side of the window where a fictitious vehicle is inserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Directly ahead of the first window vehicle.
    Upstream,
    /// Directly behind the last window vehicle.
    Downstream,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fictitious {
    pub params: IdmParams,
    pub placement: Placement,
}

/// Tuning problem of one automated vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    pub chain: VehicleChain,
    /// 0-based index of the automated vehicle in `chain`.
    pub av_index: usize,
    pub window: Window,
    pub window_set: WindowSet,
    /// Reference parameters the penalty pulls towards.
    pub theta_hat: IdmParams,
    pub free: Vec<Param>,
    pub bounds: ParamBox,
    /// Weight on γ.
    pub alpha: f64,
    /// Population standard deviation of each free parameter.
    pub sigma: Vec<f64>,
    pub weighting: PenaltyWeighting,
    pub fictitious: Vec<Fictitious>,
    /// Weight on the disturbance-to-speed H∞ gain of the window; 0 disables
    /// the term.
    pub io_gain_weight: f64,
}

pub const DEFAULT_ALPHA: f64 = 1e3;

pub const DEFAULT_FREE: [Param; 3] = [Param::Accel, Param::Decel, Param::Headway];

/// One product evaluated for γ; `first..=last` index the window list
/// returned by [`OptimizationProblem::window_vehicles`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowGain {
    pub first: usize,
    pub last: usize,
    /// The H∞ norm, or when `exact` is false an upper bound that does not
    /// exceed the largest exact gain.
    pub gamma: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gamma: f64,
    pub penalty: f64,
    pub io_gain: f64,
    pub windows: Vec<WindowGain>,
}

/// A vehicle of the evaluated window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowMember {
    Chain(usize),
    Fictitious(usize),
}

impl OptimizationProblem {
    /// Problem with the default window, weights and free set, referencing
    /// the current parameters of vehicle `av_index`.
    pub fn new(
        chain: VehicleChain,
        av_index: usize,
        bounds: ParamBox,
        sigma: Vec<f64>,
    ) -> Result<Self, OptimizeError> {
        let theta_hat = chain
            .vehicles
            .get(av_index)
            .ok_or(OptimizeError::InvalidIndex {
                index: av_index,
                len: chain.len(),
            })?
            .params;
        let problem = Self {
            chain,
            av_index,
            window: Window::default(),
            window_set: WindowSet::default(),
            theta_hat,
            free: DEFAULT_FREE.to_vec(),
            bounds,
            alpha: DEFAULT_ALPHA,
            sigma,
            weighting: PenaltyWeighting::default(),
            fictitious: Vec::new(),
            io_gain_weight: 0.0,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        if self.av_index >= self.chain.len() {
            return Err(OptimizeError::InvalidIndex {
                index: self.av_index,
                len: self.chain.len(),
            });
        }
        self.chain.validate()?;
        if self.free.is_empty() || self.sigma.len() != self.free.len() {
            return Err(OptimizeError::InvalidProblem(
                "sigma needs one entry per free parameter".into(),
            ));
        }
        if self.sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(OptimizeError::InvalidProblem(
                "sigma must be positive definite".into(),
            ));
        }
        if !(self.alpha >= 0.0 && self.io_gain_weight >= 0.0) {
            return Err(OptimizeError::InvalidProblem(
                "weights must be nonnegative".into(),
            ));
        }
        for p in &self.free {
            let iv = self.bounds.get(*p);
            if !(iv.lo > 0.0 && iv.lo <= iv.hi) {
                return Err(OptimizeError::InvalidProblem(format!(
                    "empty or non-positive interval for {}",
                    p.symbol()
                )));
            }
        }
        for f in &self.fictitious {
            f.params.validate()?;
        }
        Ok(())
    }

    /// Window vehicles in driving order, fictitious ones included, and the
    /// position of the automated vehicle in that list.
    pub fn window_vehicles(&self) -> (Vec<WindowMember>, usize) {
        let n = self.av_index;
        let first = n.saturating_sub(self.window.upstream);
        let last = (n + self.window.downstream).min(self.chain.len() - 1);
        let mut members = Vec::new();
        for (k, f) in self.fictitious.iter().enumerate() {
            if f.placement == Placement::Upstream {
                members.push(WindowMember::Fictitious(k));
            }
        }
        members.extend((first..=last).map(WindowMember::Chain));
        for (k, f) in self.fictitious.iter().enumerate() {
            if f.placement == Placement::Downstream {
                members.push(WindowMember::Fictitious(k));
            }
        }
        let pos = members
            .iter()
            .position(|m| *m == WindowMember::Chain(n))
            .unwrap();
        (members, pos)
    }

    /// `theta_hat` with the free parameters taken from `theta`.
    pub fn candidate(&self, theta: &IdmParams) -> IdmParams {
        let mut p = self.theta_hat;
        for &f in &self.free {
            p.set(f, theta.get(f));
        }
        p
    }

    /// Reference parameters clamped into the box.
    pub fn start(&self) -> IdmParams {
        let mut p = self.theta_hat;
        for &f in &self.free {
            p.set(f, self.bounds.get(f).clamp(p.get(f)));
        }
        p
    }

    /// `(1/k)·Σ w_p (θ_p − θ̂_p)²` over the `k` free parameters.
    pub fn penalty(&self, theta: &IdmParams) -> f64 {
        let sum: f64 = self
            .free
            .iter()
            .zip(&self.sigma)
            .map(|(&p, &s)| {
                let d = theta.get(p) - self.theta_hat.get(p);
                let w = match self.weighting {
                    PenaltyWeighting::InverseVariance => 1.0 / (s * s),
                    PenaltyWeighting::InverseStd => 1.0 / s,
                };
                w * d * d
            })
            .sum();
        sum / self.free.len() as f64
    }

    fn window_coeffs(&self, av: LinearCoeffs) -> Result<(Vec<LinearCoeffs>, usize), OptimizeError> {
        let (members, pos) = self.window_vehicles();
        let v_eq = self.chain.v_eq;
        let coeffs = members
            .iter()
            .map(|m| match *m {
                WindowMember::Chain(k) if k == self.av_index => Ok(av),
                WindowMember::Chain(k) => linearize(&self.chain.vehicles[k].params, v_eq),
                WindowMember::Fictitious(k) => linearize(&self.fictitious[k].params, v_eq),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((coeffs, pos))
    }

    /// Coefficients of the window with `theta` as the automated vehicle.
    pub fn coeffs_at(
        &self,
        theta: &IdmParams,
    ) -> Result<(Vec<LinearCoeffs>, usize), OptimizeError> {
        let av = linearize(&self.candidate(theta), self.chain.v_eq)?;
        self.window_coeffs(av)
    }
}

/// `α·γ + penalty (+ io term)` at `theta`. Fails when `theta` leaves the
/// box or has no equilibrium at the chain speed.
pub fn objective(
    theta: &IdmParams,
    problem: &OptimizationProblem,
) -> Result<Evaluation, OptimizeError> {
    let p = problem.candidate(theta);
    if problem
        .free
        .iter()
        .any(|&f| !problem.bounds.get(f).contains(p.get(f)))
    {
        return Err(OptimizeError::Infeasible(
            "parameters outside the box".into(),
        ));
    }
    p.validate()?;
    let (coeffs, pos) = problem.coeffs_at(&p)?;
    let windows = window_gains(&coeffs, pos, problem.window_set)?;
    let gamma = windows.iter().map(|w| w.gamma).fold(1.0, f64::max);
    let penalty = problem.penalty(&p);
    let io_gain = if problem.io_gain_weight > 0.0 {
        let sys = Cascade::new(&coeffs[pos..], CascadeInput::Disturbance)?;
        peak_norm(&sys, &HinfOptions::default())?.0
    } else {
        0.0
    };
    Ok(Evaluation {
        value: problem.alpha * gamma + penalty + problem.io_gain_weight * io_gain,
        gamma,
        penalty,
        io_gain,
        windows,
    })
}

/// Gains of the sub-windows of `coeffs` that contain index `pos`, skipping
/// exact computation where the product of single-vehicle norms cannot beat
/// the running maximum.
pub fn window_gains(
    coeffs: &[LinearCoeffs],
    pos: usize,
    set: WindowSet,
) -> Result<Vec<WindowGain>, OptimizeError> {
    let single: Vec<f64> = coeffs.iter().map(|&c| hinf_second_order(c).0).collect();
    let ranges: Vec<(usize, usize)> = match set {
        WindowSet::Containing => (0..=pos)
            .flat_map(|i| (pos..coeffs.len()).map(move |j| (i, j)))
            .collect(),
        WindowSet::Single => vec![(0, coeffs.len() - 1)],
    };
    let mut bounded: Vec<(usize, usize, f64)> = ranges
        .into_iter()
        .map(|(i, j)| (i, j, single[i..=j].iter().product()))
        .collect();
    bounded.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let mut best = 1.0f64;
    let mut out = Vec::with_capacity(bounded.len());
    for (i, j, bound) in bounded {
        let (gamma, exact) = if i == j {
            (single[i], true)
        } else if bound <= 1.0 {
            (1.0, true)
        } else if bound <= best {
            (bound, false)
        } else {
            (hinf_chain(&coeffs[i..=j])?.gamma, true)
        };
        if exact {
            best = best.max(gamma);
        }
        out.push(WindowGain {
            first: i,
            last: j,
            gamma,
            exact,
        });
    }
    out.sort_by_key(|w| (w.first, w.last));
    Ok(out)
}

/// Problem whose γ also includes the fictitious vehicle `wc`.
pub fn worst_case_augment(
    problem: &OptimizationProblem,
    wc: IdmParams,
    placement: Placement,
) -> OptimizationProblem {
    let mut out = problem.clone();
    out.fictitious.push(Fictitious {
        params: wc,
        placement,
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::bounded_real_check;
    use crate::model::{Interval, Vehicle};

    fn sigma() -> Vec<f64> {
        vec![0.42, 0.43, 0.57]
    }

    fn three_vehicle_chain() -> VehicleChain {
        let params =
            [(0.58, 1.76), (0.35, 1.26), (0.39, 1.43)].map(|(a, t)| IdmParams::new(a, 1.1, t, 2.0));
        VehicleChain::from_params(params, 11.0)
    }

    #[test]
    fn reference_point_has_no_penalty() {
        let mut chain = three_vehicle_chain();
        chain
            .vehicles
            .push(Vehicle::automated(IdmParams::new(1.2, 1.5, 1.8, 2.0)));
        let problem = OptimizationProblem::new(chain, 3, ParamBox::default(), sigma()).unwrap();
        let e = objective(&problem.theta_hat, &problem).unwrap();
        assert_eq!(e.penalty, 0.0);
        assert_eq!(e.value, problem.alpha * e.gamma);
    }

    #[test]
    fn unit_sigma_step_costs_one_over_k() {
        let chain = three_vehicle_chain();
        let problem = OptimizationProblem::new(chain, 1, ParamBox::default(), sigma()).unwrap();
        let mut theta = problem.theta_hat;
        theta.headway += 0.57;
        assert!((problem.penalty(&theta) - 1.0 / 3.0).abs() < 1e-12);
        let mut inv_std = problem.clone();
        inv_std.weighting = PenaltyWeighting::InverseStd;
        assert!((inv_std.penalty(&theta) - 0.57 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn window_is_clipped_and_ordered() {
        let chain = VehicleChain::homogeneous(IdmParams::new(1.0, 1.5, 1.5, 2.0), 6, 11.0);
        let mut problem = OptimizationProblem::new(chain, 0, ParamBox::default(), sigma()).unwrap();
        let (members, pos) = problem.window_vehicles();
        assert_eq!(
            members,
            vec![
                WindowMember::Chain(0),
                WindowMember::Chain(1),
                WindowMember::Chain(2)
            ]
        );
        assert_eq!(pos, 0);
        problem.av_index = 5;
        let (members, pos) = problem.window_vehicles();
        assert_eq!(
            members,
            vec![WindowMember::Chain(4), WindowMember::Chain(5)]
        );
        assert_eq!(pos, 1);
        let aug = worst_case_augment(
            &problem,
            IdmParams::new(0.3, 3.0, 0.3, 2.0),
            Placement::Upstream,
        );
        let (members, pos) = aug.window_vehicles();
        assert_eq!(members[0], WindowMember::Fictitious(0));
        assert_eq!(pos, 2);
    }

    #[test]
    fn pruned_windows_never_hide_the_maximum() {
        let coeffs = [
            LinearCoeffs::new(-0.075, 0.091, 0.55),
            LinearCoeffs::new(-0.26, 0.10, 0.64),
            LinearCoeffs::new(-0.1, 0.05, 0.3),
            LinearCoeffs::new(-0.2, 0.08, 0.4),
        ];
        for pos in 0..4 {
            let gains = window_gains(&coeffs, pos, WindowSet::Containing).unwrap();
            let max = gains.iter().map(|w| w.gamma).fold(1.0, f64::max);
            let mut brute = 1.0f64;
            for i in 0..=pos {
                for j in pos..4 {
                    brute = brute.max(hinf_chain(&coeffs[i..=j]).unwrap().gamma);
                }
            }
            assert!((max - brute).abs() < 1e-12, "{max} vs {brute}");
            for w in &gains {
                let coeffs = &coeffs[w.first..=w.last];
                assert!(bounded_real_check(coeffs, max + 1e-6).unwrap());
            }
        }
    }

    #[test]
    fn unit_gain_fictitious_vehicle_leaves_dc_peaks_unchanged() {
        let chain = VehicleChain::from_params(
            [
                IdmParams::new(1.5, 1.5, 1.5, 2.0),
                IdmParams::new(1.4, 1.2, 1.7, 2.0),
            ],
            11.0,
        );
        let problem = OptimizationProblem::new(chain, 1, ParamBox::default(), sigma()).unwrap();
        let stable = IdmParams::new(2.5, 1.0, 2.5, 2.0);
        let aug = worst_case_augment(&problem, stable, Placement::Upstream);
        for theta in [problem.theta_hat, IdmParams::new(2.0, 1.0, 2.0, 2.0)] {
            let base = objective(&theta, &problem).unwrap();
            assert_eq!(base.gamma, 1.0);
            assert_eq!(objective(&theta, &aug).unwrap().gamma, 1.0);
        }
    }

    #[test]
    fn infeasible_candidates() {
        let chain = three_vehicle_chain();
        let bounds = ParamBox {
            accel: Interval::new(0.3, 1.0),
            ..ParamBox::default()
        };
        let problem = OptimizationProblem::new(chain, 1, bounds, sigma()).unwrap();
        let mut theta = problem.theta_hat;
        theta.accel = 2.0;
        assert!(matches!(
            objective(&theta, &problem),
            Err(OptimizeError::Infeasible(_))
        ));
    }

    #[test]
    fn invalid_problems() {
        let chain = three_vehicle_chain();
        assert!(OptimizationProblem::new(chain.clone(), 3, ParamBox::default(), sigma()).is_err());
        assert!(
            OptimizationProblem::new(chain.clone(), 0, ParamBox::default(), vec![1.0]).is_err()
        );
        assert!(
            OptimizationProblem::new(chain, 0, ParamBox::default(), vec![1.0, 0.0, 1.0]).is_err()
        );
    }
}
