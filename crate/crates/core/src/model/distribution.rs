//! Population distributions of behavioural parameters and truncated sampling.
//!
//! Log-normal laws are specified by the mean and standard deviation of the
//! log-normal variable itself (not of the underlying normal). The parameters
//! of the underlying normal follow from moment inversion:
//! `σ² = ln(1 + s²/m²)` and `μ = ln m − σ²/2`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, LogNormal as LogNormalCdf, Normal as NormalCdf};

use super::{IdmParams, Interval, ModelError, Param, ParamBox, DEFAULT_LENGTH, DEFAULT_V_MAX};

/// Sampling is refused when the truncation box keeps less than this fraction
/// of the probability mass.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Marginal law of a single parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Law {
    Normal {
        mean: f64,
        std: f64,
        bounds: Interval,
    },
    LogNormal {
        mean: f64,
        std: f64,
        bounds: Interval,
    },
    Fixed {
        value: f64,
    },
}

impl Law {
    pub fn mean(&self) -> f64 {
        match *self {
            Law::Normal { mean, .. } | Law::LogNormal { mean, .. } => mean,
            Law::Fixed { value } => value,
        }
    }

    pub fn std(&self) -> f64 {
        match *self {
            Law::Normal { std, .. } | Law::LogNormal { std, .. } => std,
            Law::Fixed { .. } => 0.0,
        }
    }

    pub fn bounds(&self) -> Interval {
        match *self {
            Law::Normal { bounds, .. } | Law::LogNormal { bounds, .. } => bounds,
            Law::Fixed { value } => Interval::new(value, value),
        }
    }

    /// Location and scale of the normal underlying a log-normal law.
    pub fn log_normal_underlying(mean: f64, std: f64) -> (f64, f64) {
        let var = (1.0 + (std / mean).powi(2)).ln();
        (mean.ln() - 0.5 * var, var.sqrt())
    }

    /// Probability mass of the untruncated law inside its truncation bounds.
    pub fn mass_in_bounds(&self) -> f64 {
        let degenerate = |value: f64, bounds: Interval| {
            if bounds.contains(value) {
                1.0
            } else {
                0.0
            }
        };
        match *self {
            Law::Fixed { .. } => 1.0,
            Law::Normal { mean, std, bounds } => {
                if std == 0.0 {
                    return degenerate(mean, bounds);
                }
                match NormalCdf::new(mean, std) {
                    Ok(d) => d.cdf(bounds.hi) - d.cdf(bounds.lo),
                    Err(_) => 0.0,
                }
            }
            Law::LogNormal { mean, std, bounds } => {
                if std == 0.0 {
                    return degenerate(mean, bounds);
                }
                let (mu, sigma) = Self::log_normal_underlying(mean, std);
                match LogNormalCdf::new(mu, sigma) {
                    Ok(d) => d.cdf(bounds.hi) - d.cdf(bounds.lo.max(0.0)),
                    Err(_) => 0.0,
                }
            }
        }
    }

    fn validate(&self, name: &'static str) -> Result<(), ModelError> {
        let ok = match *self {
            Law::Normal { mean, std, bounds } => {
                mean.is_finite() && std >= 0.0 && bounds.lo <= bounds.hi
            }
            Law::LogNormal { mean, std, bounds } => {
                mean > 0.0 && std >= 0.0 && bounds.lo <= bounds.hi
            }
            Law::Fixed { value } => value.is_finite() && value > 0.0,
        };
        if !ok {
            return Err(ModelError::InvalidDistribution { name });
        }
        let mass = self.mass_in_bounds();
        if mass < MIN_ACCEPTANCE {
            return Err(ModelError::SamplingInfeasible { name, mass });
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Law::Fixed { value } => value,
            Law::Normal { mean, std, bounds } => {
                if std == 0.0 {
                    return mean;
                }
                let d = Normal::new(mean, std).expect("validated normal law");
                loop {
                    let x = d.sample(rng);
                    if bounds.contains(x) {
                        return x;
                    }
                }
            }
            Law::LogNormal { mean, std, bounds } => {
                if std == 0.0 {
                    return mean;
                }
                let (mu, sigma) = Self::log_normal_underlying(mean, std);
                let d = LogNormal::new(mu, sigma).expect("validated log-normal law");
                loop {
                    let x = d.sample(rng);
                    if bounds.contains(x) {
                        return x;
                    }
                }
            }
        }
    }
}

/// Independent marginal laws for `(a, b, T, s0)` plus fixed vehicle data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDistribution {
    #[serde(rename = "a")]
    pub accel: Law,
    #[serde(rename = "b")]
    pub decel: Law,
    #[serde(rename = "T")]
    pub headway: Law,
    #[serde(rename = "s0")]
    pub min_gap: Law,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    #[serde(default = "default_length")]
    pub length: f64,
}

fn default_v_max() -> f64 {
    DEFAULT_V_MAX
}

fn default_length() -> f64 {
    DEFAULT_LENGTH
}

impl Default for ParamDistribution {
    /// Population fitted on NGSIM US101 morning-peak trajectories, truncated
    /// at the default physical bounds.
    fn default() -> Self {
        let theta = ParamBox::default();
        Self {
            accel: Law::LogNormal {
                mean: 0.77,
                std: 0.42,
                bounds: theta.accel,
            },
            decel: Law::LogNormal {
                mean: 1.1,
                std: 0.43,
                bounds: theta.decel,
            },
            headway: Law::Normal {
                mean: 1.5,
                std: 0.57,
                bounds: theta.headway,
            },
            min_gap: Law::Normal {
                mean: 2.0,
                std: 0.5,
                bounds: theta.min_gap,
            },
            v_max: DEFAULT_V_MAX,
            length: DEFAULT_LENGTH,
        }
    }
}

impl ParamDistribution {
    pub fn law(&self, p: Param) -> &Law {
        match p {
            Param::Accel => &self.accel,
            Param::Decel => &self.decel,
            Param::Headway => &self.headway,
            Param::MinGap => &self.min_gap,
        }
    }

    pub fn law_mut(&mut self, p: Param) -> &mut Law {
        match p {
            Param::Accel => &mut self.accel,
            Param::Decel => &mut self.decel,
            Param::Headway => &mut self.headway,
            Param::MinGap => &mut self.min_gap,
        }
    }

    /// Replaces the truncation interval of one law (no-op for fixed laws).
    pub fn with_bounds(mut self, p: Param, iv: Interval) -> Self {
        match self.law_mut(p) {
            Law::Normal { bounds, .. } | Law::LogNormal { bounds, .. } => *bounds = iv,
            Law::Fixed { .. } => {}
        }
        self
    }

    /// Replaces one law by a constant.
    pub fn with_fixed(mut self, p: Param, value: f64) -> Self {
        *self.law_mut(p) = Law::Fixed { value };
        self
    }

    /// Parameters at the mean of every marginal.
    pub fn mean_params(&self) -> IdmParams {
        IdmParams {
            accel: self.accel.mean(),
            decel: self.decel.mean(),
            headway: self.headway.mean(),
            min_gap: self.min_gap.mean(),
            v_max: self.v_max,
            length: self.length,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for p in Param::ALL {
            self.law(p).validate(p.symbol())?;
        }
        if !(self.v_max > 0.0 && self.length > 0.0) {
            return Err(ModelError::InvalidDistribution {
                name: "v_max/length",
            });
        }
        Ok(())
    }

    /// Fails unless every truncation interval lies inside the admissible box.
    pub fn validate_within(&self, theta: &ParamBox) -> Result<(), ModelError> {
        self.validate()?;
        for p in Param::ALL {
            let law = self.law(p);
            if !law.bounds().is_within(&theta.get(p)) {
                return Err(ModelError::OutOfBounds {
                    name: p.symbol(),
                    value: law.mean(),
                    lo: theta.get(p).lo,
                    hi: theta.get(p).hi,
                });
            }
        }
        Ok(())
    }
}

/// Draws `count` truncated parameter vectors using a caller-supplied RNG.
pub fn sample_params_with<R: Rng + ?Sized>(
    dist: &ParamDistribution,
    rng: &mut R,
    count: usize,
) -> Result<Vec<IdmParams>, ModelError> {
    if count == 0 {
        return Err(ModelError::EmptySample);
    }
    dist.validate()?;
    let out = (0..count)
        .map(|_| IdmParams {
            accel: dist.accel.sample(rng),
            decel: dist.decel.sample(rng),
            headway: dist.headway.sample(rng),
            min_gap: dist.min_gap.sample(rng),
            v_max: dist.v_max,
            length: dist.length,
        })
        .collect();
    Ok(out)
}

/// Draws `count` truncated parameter vectors; identical seeds give identical
/// sequences.
pub fn sample_params(
    dist: &ParamDistribution,
    seed: u64,
    count: usize,
) -> Result<Vec<IdmParams>, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_params_with(dist, &mut rng, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Mean of a truncated density by composite Simpson quadrature.
    fn truncated_mean(pdf: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let (mut m0, mut m1) = (0.0, 0.0);
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            m0 += w * pdf(x);
            m1 += w * x * pdf(x);
        }
        m1 / m0
    }

    fn normal_pdf(mu: f64, sigma: f64) -> impl Fn(f64) -> f64 {
        move |x| (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp()
    }

    fn log_normal_pdf(mean: f64, std: f64) -> impl Fn(f64) -> f64 {
        let (mu, sigma) = Law::log_normal_underlying(mean, std);
        move |x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                (-(x.ln() - mu).powi(2) / (2.0 * sigma * sigma)).exp() / x
            }
        }
    }

    #[test]
    fn degenerate_laws_return_the_mean() {
        let mut dist = ParamDistribution::default();
        for p in Param::ALL {
            match dist.law_mut(p) {
                Law::Normal { std, .. } | Law::LogNormal { std, .. } => *std = 0.0,
                Law::Fixed { .. } => {}
            }
        }
        let samples = sample_params(&dist, 7, 50).unwrap();
        for s in samples {
            assert_eq!(s.accel, 0.77);
            assert_eq!(s.decel, 1.1);
            assert_eq!(s.headway, 1.5);
            assert_eq!(s.min_gap, 2.0);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let dist = ParamDistribution::default();
        let a = sample_params(&dist, 11, 100).unwrap();
        let b = sample_params(&dist, 11, 100).unwrap();
        assert_eq!(a, b);
        let c = sample_params(&dist, 12, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_means_match_truncated_quadrature() {
        let dist = ParamDistribution::default();
        let samples = sample_params(&dist, 2024, 10_000).unwrap();
        let n = samples.len() as f64;
        let mean = |f: fn(&IdmParams) -> f64| samples.iter().map(f).sum::<f64>() / n;

        let expected_a = truncated_mean(log_normal_pdf(0.77, 0.42), 0.3, 3.0);
        let expected_b = truncated_mean(log_normal_pdf(1.1, 0.43), 0.3, 3.0);
        let expected_t = truncated_mean(normal_pdf(1.5, 0.57), 0.3, 3.0);
        let expected_s0 = truncated_mean(normal_pdf(2.0, 0.5), 0.5, 3.5);

        let rel = |x: f64, y: f64| ((x - y) / y).abs();
        assert!(rel(mean(|p| p.accel), expected_a) < 0.05);
        assert!(rel(mean(|p| p.decel), expected_b) < 0.05);
        assert!(rel(mean(|p| p.headway), expected_t) < 0.05);
        assert!(rel(mean(|p| p.min_gap), expected_s0) < 0.05);
    }

    #[test]
    fn narrowed_box_is_respected() {
        let dist = ParamDistribution::default()
            .with_bounds(Param::Accel, Interval::new(0.3, 1.0))
            .with_bounds(Param::Headway, Interval::new(0.3, 2.0));
        for p in sample_params(&dist, 3, 2000).unwrap() {
            assert!((0.3..=1.0).contains(&p.accel));
            assert!((0.3..=2.0).contains(&p.headway));
        }
    }

    #[test]
    fn negligible_mass_is_refused() {
        let dist =
            ParamDistribution::default().with_bounds(Param::Headway, Interval::new(2.95, 2.9501));
        assert!(matches!(
            sample_params(&dist, 1, 10),
            Err(ModelError::SamplingInfeasible { name: "T", .. })
        ));
        assert!(matches!(
            sample_params(&ParamDistribution::default(), 1, 0),
            Err(ModelError::EmptySample)
        ));
    }

    #[test]
    fn default_truncation_is_inside_theta() {
        ParamDistribution::default()
            .validate_within(&ParamBox::default())
            .unwrap();
        let wide = ParamDistribution::default().with_bounds(Param::Accel, Interval::new(0.1, 3.0));
        assert!(wide.validate_within(&ParamBox::default()).is_err());
    }
}
