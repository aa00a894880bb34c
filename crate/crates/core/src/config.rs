//! Versioned TOML scenario schema shared by every command.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::ContourRow;
use crate::linear::string_stability_coefficient;
use crate::model::{
    linearize, sample_params, IdmParams, LinearCoeffs, ModelError, ParamBox, ParamDistribution,
    Vehicle, VehicleChain, DEFAULT_V_MAX,
};
use crate::optimize::{
    sub_seed, ExperimentConfig, Fictitious, PenaltyWeighting, SaConfig, Window, WindowSet,
    DEFAULT_ALPHA, DEFAULT_FRACTIONS, DEFAULT_FREE,
};
use crate::ring::STRUCTURAL_TOL;
use crate::sim::{Disturbance, DEFAULT_DURATION, DEFAULT_HOLD, MAX_DT};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported schema_version {found}, expected {SCHEMA_VERSION}")]
    Version { found: u32 },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub distribution: ParamDistribution,
    /// Admissible parameter box Θ.
    #[serde(default)]
    pub bounds: ParamBox,
    #[serde(default)]
    pub chain: Option<ChainSpec>,
    #[serde(default)]
    pub disturbance: Vec<Disturbance>,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub optimization: Option<OptimizationSpec>,
    #[serde(default)]
    pub ring: RingSpec,
}

/// Vehicle string given by explicit parameters, a repeated vehicle, a
/// sample from the distribution, or raw linear coefficients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    #[serde(default)]
    pub vehicles: Vec<IdmParams>,
    /// Replicates the single entry of `vehicles`.
    pub repeat: Option<usize>,
    /// Number of vehicles sampled from the distribution.
    pub size: Option<usize>,
    #[serde(default)]
    pub coeffs: Vec<LinearCoeffs>,
    pub v_eq: Option<f64>,
    pub v_eq_ratio: Option<f64>,
    /// 1-based automated positions.
    #[serde(default)]
    pub automated: Vec<usize>,
    /// Share of automated vehicles placed at random behind vehicle 1.
    pub av_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSpec {
    pub duration: f64,
    /// Step amplitudes of a nonlinear sweep on vehicle 1.
    pub amplitudes: Vec<f64>,
    pub step_window: [f64; 2],
    /// Every `trajectory_stride`-th sample is written.
    pub trajectory_stride: usize,
    pub write_trajectory: bool,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            duration: DEFAULT_DURATION,
            amplitudes: Vec::new(),
            step_window: [5.0, 10.0],
            trajectory_stride: 10,
            write_trajectory: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    /// `(l, n)` pairs; empty means the whole chain.
    pub pairs: Vec<[usize; 2]>,
    pub contour: Option<ContourSpec>,
}

/// Grid of S over `(a, T)` with the other parameters fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourSpec {
    pub a: [f64; 2],
    #[serde(rename = "T")]
    pub headway: [f64; 2],
    pub steps: [usize; 2],
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_s0")]
    pub s0: f64,
    #[serde(default = "default_ratio")]
    pub v_eq_ratio: f64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
}

impl ContourSpec {
    /// `S` on the grid, `a`-major.
    pub fn grid(&self) -> Result<Vec<ContourRow>, ModelError> {
        let node = |range: [f64; 2], steps: usize, i: usize| {
            range[0] + (range[1] - range[0]) * i as f64 / (steps - 1) as f64
        };
        let v_eq = self.v_eq_ratio * self.v_max;
        let mut out = Vec::with_capacity(self.steps[0] * self.steps[1]);
        for i in 0..self.steps[0] {
            let a = node(self.a, self.steps[0], i);
            for j in 0..self.steps[1] {
                let t = node(self.headway, self.steps[1], j);
                let p = IdmParams::new(a, self.b, t, self.s0).with_v_max(self.v_max);
                let s = string_stability_coefficient(linearize(&p, v_eq)?);
                out.push(ContourRow { a, t, s });
            }
        }
        Ok(out)
    }
}

fn default_b() -> f64 {
    1.1
}
fn default_s0() -> f64 {
    2.0
}
fn default_ratio() -> f64 {
    1.0 / 3.0
}
fn default_v_max() -> f64 {
    DEFAULT_V_MAX
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizationMode {
    /// Sampled mixed-traffic experiment over seeds and fractions.
    #[default]
    Experiment,
    /// Tune the automated vehicles of `[chain]`.
    Chain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub t_up: Option<f64>,
    #[serde(default)]
    pub fictitious: Vec<Fictitious>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizationSpec {
    pub mode: OptimizationMode,
    pub seeds: Vec<u64>,
    pub fractions: Vec<f64>,
    pub vehicles: usize,
    pub v_eq_ratio: f64,
    pub sa: SaConfig,
    pub alpha: f64,
    pub window: Window,
    pub window_set: WindowSet,
    pub weighting: PenaltyWeighting,
    /// Upper bound override for T.
    pub t_up: Option<f64>,
    pub fictitious: Vec<Fictitious>,
    pub io_gain_weight: f64,
    pub prbs_amplitude: f64,
    pub prbs_hold: [f64; 2],
    pub prbs_duration: f64,
    pub duration: f64,
    /// Alternative settings run side by side on the same seeds.
    pub variants: Vec<Variant>,
}

impl Default for OptimizationSpec {
    fn default() -> Self {
        let exp = ExperimentConfig::default();
        Self {
            mode: OptimizationMode::default(),
            seeds: Vec::new(),
            fractions: DEFAULT_FRACTIONS.to_vec(),
            vehicles: exp.vehicles,
            v_eq_ratio: exp.v_eq_ratio,
            sa: SaConfig::default(),
            alpha: DEFAULT_ALPHA,
            window: Window::default(),
            window_set: WindowSet::default(),
            weighting: PenaltyWeighting::default(),
            t_up: None,
            fictitious: Vec::new(),
            io_gain_weight: 0.0,
            prbs_amplitude: exp.prbs_amplitude,
            prbs_hold: DEFAULT_HOLD,
            prbs_duration: exp.prbs_duration,
            duration: exp.duration,
            variants: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingSpec {
    /// Radius around 0 treated as the translation mode.
    pub tol: f64,
}

impl Default for RingSpec {
    fn default() -> Self {
        Self {
            tol: STRUCTURAL_TOL,
        }
    }
}

/// A chain resolved from its spec.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedChain {
    Vehicles(VehicleChain),
    Coeffs(Vec<LinearCoeffs>),
}

impl ResolvedChain {
    pub fn len(&self) -> usize {
        match self {
            ResolvedChain::Vehicles(c) => c.len(),
            ResolvedChain::Coeffs(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coeffs(&self) -> Result<Vec<LinearCoeffs>, ModelError> {
        match self {
            ResolvedChain::Vehicles(c) => c.coeffs(),
            ResolvedChain::Coeffs(c) => Ok(c.clone()),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Version {
                found: self.schema_version,
            });
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt <= MAX_DT) {
                return invalid(format!("dt = {dt} must lie in (0, {MAX_DT}]"));
            }
        }
        self.distribution.validate()?;
        if let Some(chain) = &self.chain {
            chain.validate()?;
        }
        let sim = &self.simulation;
        if sim.duration.is_nan() || sim.duration <= 0.0 || sim.trajectory_stride == 0 {
            return invalid("simulation duration and trajectory_stride must be positive");
        }
        if !(sim.step_window[0] >= 0.0 && sim.step_window[0] < sim.step_window[1]) {
            return invalid("simulation step_window must be increasing");
        }
        for &[l, n] in &self.analysis.pairs {
            if l >= n {
                return invalid(format!("analysis pair ({l}, {n}) needs l < n"));
            }
        }
        if let Some(c) = &self.analysis.contour {
            if c.steps[0] < 2 || c.steps[1] < 2 || !(c.a[0] < c.a[1] && c.headway[0] < c.headway[1])
            {
                return invalid("contour needs increasing ranges and at least 2 steps per axis");
            }
            if !(c.v_eq_ratio > 0.0 && c.v_eq_ratio < 1.0) {
                return invalid("contour v_eq_ratio must lie in (0, 1)");
            }
        }
        if let Some(opt) = &self.optimization {
            opt.validate()?;
        }
        if self.ring.tol.is_nan() || self.ring.tol < 0.0 {
            return invalid("ring tol must be nonnegative");
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(crate::sim::DEFAULT_DT)
    }

    /// Resolves `[chain]`, sampling with `seed` where required.
    pub fn resolve_chain(&self, seed: u64) -> Result<ResolvedChain, ConfigError> {
        let Some(spec) = &self.chain else {
            return invalid("the config has no [chain] section");
        };
        if !spec.coeffs.is_empty() {
            return Ok(ResolvedChain::Coeffs(spec.coeffs.clone()));
        }
        let params: Vec<IdmParams> = if let Some(size) = spec.size {
            sample_params(&self.distribution, sub_seed(seed, 0), size)?
        } else if let Some(repeat) = spec.repeat {
            vec![spec.vehicles[0]; repeat]
        } else {
            spec.vehicles.clone()
        };
        let v_max = params.first().map_or(self.distribution.v_max, |p| p.v_max);
        let v_eq = match (spec.v_eq, spec.v_eq_ratio) {
            (Some(v), None) => v,
            (None, Some(r)) => r * v_max,
            _ => unreachable!("validated"),
        };
        let mut vehicles: Vec<Vehicle> = params.into_iter().map(Vehicle::human).collect();
        let m = vehicles.len();
        let mut automated = spec.automated.clone();
        if let Some(f) = spec.av_fraction {
            let mut order: Vec<usize> = (2..=m).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(sub_seed(seed, 1)));
            let k = ((f * m as f64).round() as usize).min(m - 1);
            automated.extend_from_slice(&order[..k]);
        }
        for k in automated {
            if k == 0 || k > m {
                return invalid(format!("automated position {k} outside 1..={m}"));
            }
            vehicles[k - 1].automated = true;
        }
        let chain = VehicleChain::new(vehicles, v_eq);
        chain.validate()?;
        Ok(ResolvedChain::Vehicles(chain))
    }

    /// Experiment settings of one variant (or of the base spec).
    pub fn experiment(&self, variant: Option<&Variant>) -> Result<ExperimentConfig, ConfigError> {
        let Some(opt) = &self.optimization else {
            return invalid("the config has no [optimization] section");
        };
        let mut bounds = self.bounds;
        let mut fictitious = opt.fictitious.clone();
        let mut t_up = opt.t_up;
        if let Some(v) = variant {
            if v.t_up.is_some() {
                t_up = v.t_up;
            }
            fictitious.extend(v.fictitious.iter().copied());
        }
        if let Some(t) = t_up {
            bounds.headway.hi = t;
        }
        Ok(ExperimentConfig {
            vehicles: opt.vehicles,
            distribution: self.distribution,
            bounds,
            v_eq_ratio: opt.v_eq_ratio,
            prbs_amplitude: opt.prbs_amplitude,
            prbs_hold: opt.prbs_hold,
            prbs_duration: opt.prbs_duration,
            duration: opt.duration,
            dt: self.dt(),
            sa: opt.sa,
            alpha: opt.alpha,
            window: opt.window,
            window_set: opt.window_set,
            weighting: opt.weighting,
            free: DEFAULT_FREE.to_vec(),
            fictitious,
            io_gain_weight: opt.io_gain_weight,
        })
    }

    /// Seeds of the experiment, defaulting to the global seed.
    pub fn seeds(&self) -> Vec<u64> {
        match &self.optimization {
            Some(opt) if !opt.seeds.is_empty() => opt.seeds.clone(),
            _ => vec![self.seed],
        }
    }
}

impl ChainSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let sources = [
            !self.vehicles.is_empty() && self.repeat.is_none(),
            self.repeat.is_some(),
            self.size.is_some(),
            !self.coeffs.is_empty(),
        ];
        match sources.iter().filter(|s| **s).count() {
            0 => return invalid("[chain] is empty: give vehicles, repeat, size or coeffs"),
            1 => {}
            _ => return invalid("[chain] needs exactly one of vehicles, repeat, size or coeffs"),
        }
        if let Some(r) = self.repeat {
            if self.vehicles.len() != 1 || r == 0 {
                return invalid("repeat needs exactly one listed vehicle and a positive count");
            }
        }
        if self.size == Some(0) {
            return invalid("chain size must be positive");
        }
        if self.coeffs.is_empty() {
            if self.v_eq.is_some() == self.v_eq_ratio.is_some() {
                return invalid("[chain] needs exactly one of v_eq and v_eq_ratio");
            }
            if let Some(r) = self.v_eq_ratio {
                if !(r > 0.0 && r < 1.0) {
                    return invalid("v_eq_ratio must lie in (0, 1)");
                }
            }
            for p in &self.vehicles {
                p.validate()?;
            }
        }
        if let Some(f) = self.av_fraction {
            if !(0.0..1.0).contains(&f) {
                return invalid("av_fraction must lie in [0, 1)");
            }
        }
        Ok(())
    }
}

impl OptimizationSpec {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.vehicles < 2 {
            return invalid("optimization needs at least 2 vehicles");
        }
        if self.sa.budget == 0 {
            return invalid("SA budget must be at least 1");
        }
        if self.fractions.iter().any(|f| !(0.0..1.0).contains(f)) {
            return invalid("fractions must lie in [0, 1)");
        }
        if self.alpha.is_nan() || self.alpha < 0.0 {
            return invalid("alpha must be nonnegative");
        }
        if let Some(t) = self.t_up {
            if t.is_nan() || t <= 0.0 {
                return invalid("t_up must be positive");
            }
        }
        let mut names: Vec<&str> = self.variants.iter().map(|v| v.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1])
            || names.iter().any(|n| {
                n.is_empty()
                    || !n
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            })
        {
            return invalid("variant names must be unique and use [A-Za-z0-9_-]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1

[chain]
vehicles = [{ a = 0.87, b = 1.1, T = 1.5, s0 = 2.0 }]
repeat = 30
v_eq_ratio = 0.5
"#;

    #[test]
    fn minimal_config_resolves() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let ResolvedChain::Vehicles(chain) = cfg.resolve_chain(0).unwrap() else {
            panic!()
        };
        assert_eq!(chain.len(), 30);
        assert_eq!(chain.v_eq, 16.5);
        assert_eq!(cfg.dt(), 0.01);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        assert!(matches!(
            ScenarioConfig::from_toml(&text),
            Err(ConfigError::Parse(_))
        ));
        let text = MINIMAL.replace("repeat = 30", "repeat = 30\ncolour = \"red\"");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn version_is_checked() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(
            ScenarioConfig::from_toml(&text),
            Err(ConfigError::Version { found: 2 })
        ));
    }

    #[test]
    fn chain_sources_are_exclusive() {
        let text = MINIMAL.replace("repeat = 30", "repeat = 30\nsize = 4");
        assert!(matches!(
            ScenarioConfig::from_toml(&text),
            Err(ConfigError::Invalid(_))
        ));
        let empty = "schema_version = 1\n[chain]\nv_eq = 10.0\n";
        assert!(matches!(
            ScenarioConfig::from_toml(empty),
            Err(ConfigError::Invalid(_))
        ));
        let both = MINIMAL.replace("v_eq_ratio = 0.5", "v_eq_ratio = 0.5\nv_eq = 3.0");
        assert!(ScenarioConfig::from_toml(&both).is_err());
    }

    #[test]
    fn sampled_chain_with_automation() {
        let text =
            "schema_version = 1\n[chain]\nsize = 30\nv_eq_ratio = 0.3333\nav_fraction = 0.2\n";
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        let ResolvedChain::Vehicles(a) = cfg.resolve_chain(4).unwrap() else {
            panic!()
        };
        let ResolvedChain::Vehicles(b) = cfg.resolve_chain(4).unwrap() else {
            panic!()
        };
        assert_eq!(a, b);
        let avs = a.automated_indices();
        assert_eq!(avs.len(), 6);
        assert!(!avs.contains(&0));
    }

    #[test]
    fn coefficient_chain() {
        let text =
            "schema_version = 1\n[chain]\ncoeffs = [[-0.075, 0.091, 0.55], [-0.26, 0.10, 0.64]]\n";
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        assert_eq!(cfg.resolve_chain(0).unwrap().coeffs().unwrap().len(), 2);
    }

    #[test]
    fn experiment_variants() {
        let text = r#"
schema_version = 1
[optimization]
seeds = [1, 2]
fractions = [0.0, 0.1]
t_up = 3.0
sa = { budget = 100 }

[[optimization.variants]]
name = "wc_t5"
t_up = 5.0
fictitious = [{ params = { a = 0.3, b = 3.0, T = 0.3, s0 = 2.0 }, placement = "upstream" }]
"#;
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        let base = cfg.experiment(None).unwrap();
        assert_eq!(base.bounds.headway.hi, 3.0);
        assert_eq!(base.sa.budget, 100);
        assert_eq!(base.sa.cooling, 0.97);
        let opt = cfg.optimization.as_ref().unwrap();
        let wc = cfg.experiment(Some(&opt.variants[0])).unwrap();
        assert_eq!(wc.bounds.headway.hi, 5.0);
        assert_eq!(wc.fictitious.len(), 1);
        assert_eq!(cfg.seeds(), vec![1, 2]);
    }

    #[test]
    fn contour_changes_sign_along_a() {
        let text = "schema_version = 1\n[analysis.contour]\na = [0.3, 3.0]\nT = [0.5, 3.0]\nsteps = [271, 26]\n";
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        let grid = cfg.analysis.contour.unwrap().grid().unwrap();
        assert_eq!(grid.len(), 271 * 26);
        let row: Vec<&ContourRow> = grid.iter().filter(|r| (r.t - 1.6).abs() < 1e-9).collect();
        assert_eq!(row.len(), 271);
        let crossing = row
            .windows(2)
            .find(|w| w[0].s < 0.0 && w[1].s >= 0.0)
            .unwrap()[1]
            .a;
        assert!((0.9..1.3).contains(&crossing), "{crossing}");
        assert!(row.iter().filter(|r| r.a >= crossing).all(|r| r.s >= 0.0));
    }

    #[test]
    fn round_trip_through_toml() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let again = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }
}
