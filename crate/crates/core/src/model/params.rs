use serde::{Deserialize, Serialize};

use super::ModelError;

/// Behavioural parameters of one IDM driver/vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdmParams {
    /// Maximum tolerated acceleration (m/s²).
    #[serde(rename = "a")]
    pub accel: f64,
    /// Comfortable deceleration (m/s²).
    #[serde(rename = "b")]
    pub decel: f64,
    /// Safe time headway (s).
    #[serde(rename = "T")]
    pub headway: f64,
    /// Minimum stopping distance (m).
    #[serde(rename = "s0")]
    pub min_gap: f64,
    /// Desired free-flow speed (m/s).
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    /// Vehicle length (m).
    #[serde(default = "default_length")]
    pub length: f64,
}

pub const DEFAULT_V_MAX: f64 = 33.0;
pub const DEFAULT_LENGTH: f64 = 5.0;

fn default_v_max() -> f64 {
    DEFAULT_V_MAX
}

fn default_length() -> f64 {
    DEFAULT_LENGTH
}

impl IdmParams {
    /// Parameters with the default free-flow speed (33 m/s) and length (5 m).
    pub fn new(accel: f64, decel: f64, headway: f64, min_gap: f64) -> Self {
        Self {
            accel,
            decel,
            headway,
            min_gap,
            v_max: DEFAULT_V_MAX,
            length: DEFAULT_LENGTH,
        }
    }

    pub fn with_v_max(mut self, v_max: f64) -> Self {
        self.v_max = v_max;
        self
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Accel => self.accel,
            Param::Decel => self.decel,
            Param::Headway => self.headway,
            Param::MinGap => self.min_gap,
        }
    }

    pub fn set(&mut self, p: Param, value: f64) {
        match p {
            Param::Accel => self.accel = value,
            Param::Decel => self.decel = value,
            Param::Headway => self.headway = value,
            Param::MinGap => self.min_gap = value,
        }
    }

    /// Checks strict positivity of every field.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("a", self.accel),
            ("b", self.decel),
            ("T", self.headway),
            ("s0", self.min_gap),
            ("v_max", self.v_max),
            ("length", self.length),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Checks positivity and membership in the admissible box.
    pub fn validate_in(&self, bounds: &ParamBox) -> Result<(), ModelError> {
        self.validate()?;
        for p in Param::ALL {
            let iv = bounds.get(p);
            let value = self.get(p);
            if !iv.contains(value) {
                return Err(ModelError::OutOfBounds {
                    name: p.symbol(),
                    value,
                    lo: iv.lo,
                    hi: iv.hi,
                });
            }
        }
        Ok(())
    }
}

/// The tunable behavioural parameters (free-flow speed and length are fixed
/// vehicle properties).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    #[serde(rename = "a")]
    Accel,
    #[serde(rename = "b")]
    Decel,
    #[serde(rename = "T")]
    Headway,
    #[serde(rename = "s0")]
    MinGap,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::Accel, Param::Decel, Param::Headway, Param::MinGap];

    pub fn symbol(self) -> &'static str {
        match self {
            Param::Accel => "a",
            Param::Decel => "b",
            Param::Headway => "T",
            Param::MinGap => "s0",
        }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_within(&self, outer: &Interval) -> bool {
        self.lo >= outer.lo && self.hi <= outer.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(iv: Interval) -> Self {
        [iv.lo, iv.hi]
    }
}

/// Admissible parameter box Θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBox {
    #[serde(rename = "a")]
    pub accel: Interval,
    #[serde(rename = "b")]
    pub decel: Interval,
    #[serde(rename = "T")]
    pub headway: Interval,
    #[serde(rename = "s0")]
    pub min_gap: Interval,
}

impl Default for ParamBox {
    /// Physical bounds used for the NGSIM-calibrated population.
    fn default() -> Self {
        Self {
            accel: Interval::new(0.3, 3.0),
            decel: Interval::new(0.3, 3.0),
            headway: Interval::new(0.3, 3.0),
            min_gap: Interval::new(0.5, 3.5),
        }
    }
}

impl ParamBox {
    pub fn get(&self, p: Param) -> Interval {
        match p {
            Param::Accel => self.accel,
            Param::Decel => self.decel,
            Param::Headway => self.headway,
            Param::MinGap => self.min_gap,
        }
    }

    pub fn set(&mut self, p: Param, iv: Interval) {
        match p {
            Param::Accel => self.accel = iv,
            Param::Decel => self.decel = iv,
            Param::Headway => self.headway = iv,
            Param::MinGap => self.min_gap = iv,
        }
    }

    pub fn is_within(&self, outer: &ParamBox) -> bool {
        Param::ALL
            .iter()
            .all(|&p| self.get(p).is_within(&outer.get(p)))
    }

    pub fn contains(&self, params: &IdmParams) -> bool {
        Param::ALL
            .iter()
            .all(|&p| self.get(p).contains(params.get(p)))
    }
}

/// Position and speed of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleKinematics {
    pub position: f64,
    pub speed: f64,
}

impl VehicleKinematics {
    pub fn new(position: f64, speed: f64) -> Self {
        Self { position, speed }
    }
}

/// Partial derivatives of the acceleration law at equilibrium.
///
/// `f1 = ∂f/∂v`, `f2 = ∂f/∂Δx`, `f3 = ∂f/∂Δv`. A physically rational driver has
/// `f1 < 0`, `f2 > 0` and `f3 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct LinearCoeffs {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

impl LinearCoeffs {
    pub const fn new(f1: f64, f2: f64, f3: f64) -> Self {
        Self { f1, f2, f3 }
    }

    /// The sign conditions `f1 < 0, f2 > 0, f3 > 0`.
    pub fn is_rational(&self) -> bool {
        self.f1 < 0.0 && self.f2 > 0.0 && self.f3 > 0.0
    }
}

impl From<[f64; 3]> for LinearCoeffs {
    fn from(v: [f64; 3]) -> Self {
        LinearCoeffs::new(v[0], v[1], v[2])
    }
}

impl From<LinearCoeffs> for [f64; 3] {
    fn from(c: LinearCoeffs) -> Self {
        [c.f1, c.f2, c.f3]
    }
}
