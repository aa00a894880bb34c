use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Additive acceleration disturbance on one vehicle (1-based index).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Disturbance {
    /// `amplitude` during `[t_on, t_off)`.
    Step {
        vehicle: usize,
        amplitude: f64,
        t_on: f64,
        t_off: f64,
    },
    /// Pseudo-random binary sequence active during
    /// `[start, start + duration)`.
    Prbs {
        vehicle: usize,
        amplitude: f64,
        #[serde(default = "default_hold")]
        hold: [f64; 2],
        duration: f64,
        #[serde(default)]
        start: f64,
        seed: u64,
    },
}

pub const DEFAULT_HOLD: [f64; 2] = [2.0, 5.0];

fn default_hold() -> [f64; 2] {
    DEFAULT_HOLD
}

impl Disturbance {
    pub fn step(vehicle: usize, amplitude: f64, t_on: f64, t_off: f64) -> Self {
        Disturbance::Step {
            vehicle,
            amplitude,
            t_on,
            t_off,
        }
    }

    /// PRBS with default holds, starting at `t = 0`.
    pub fn prbs(vehicle: usize, amplitude: f64, duration: f64, seed: u64) -> Self {
        Disturbance::Prbs {
            vehicle,
            amplitude,
            hold: DEFAULT_HOLD,
            duration,
            start: 0.0,
            seed,
        }
    }

    pub fn vehicle(&self) -> usize {
        match *self {
            Disturbance::Step { vehicle, .. } | Disturbance::Prbs { vehicle, .. } => vehicle,
        }
    }

    /// End of the window during which the disturbance can be nonzero.
    pub fn active_until(&self) -> f64 {
        match *self {
            Disturbance::Step { t_off, .. } => t_off,
            Disturbance::Prbs {
                start, duration, ..
            } => start + duration,
        }
    }

    pub(crate) fn signal(&self) -> Signal {
        match *self {
            Disturbance::Step {
                amplitude,
                t_on,
                t_off,
                ..
            } => Signal::Step {
                amplitude,
                t_on,
                t_off,
            },
            Disturbance::Prbs {
                amplitude,
                hold,
                duration,
                start,
                seed,
                ..
            } => Signal::Prbs {
                start,
                signal: prbs(amplitude, (hold[0], hold[1]), duration, seed),
            },
        }
    }
}

pub(crate) enum Signal {
    Step {
        amplitude: f64,
        t_on: f64,
        t_off: f64,
    },
    Prbs {
        start: f64,
        signal: PrbsSignal,
    },
}

impl Signal {
    pub(crate) fn value(&self, t: f64) -> f64 {
        match self {
            Signal::Step {
                amplitude,
                t_on,
                t_off,
            } => {
                if t >= *t_on && t < *t_off {
                    *amplitude
                } else {
                    0.0
                }
            }
            Signal::Prbs { start, signal } => signal.value(t - start),
        }
    }
}

/// Piecewise-constant `±amplitude` signal on `[0, duration)` whose sign
/// flips at every segment boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct PrbsSignal {
    pub amplitude: f64,
    pub duration: f64,
    /// Start time of every segment; the first is 0.
    pub boundaries: Vec<f64>,
    /// Sign of the first segment.
    pub initial_positive: bool,
}

impl PrbsSignal {
    pub fn value(&self, t: f64) -> f64 {
        if !(t >= 0.0 && t < self.duration) {
            return 0.0;
        }
        let k = self.boundaries.partition_point(|&b| b <= t) - 1;
        let positive = self.initial_positive == (k % 2 == 0);
        if positive {
            self.amplitude
        } else {
            -self.amplitude
        }
    }

    /// Segment lengths; the last one is truncated at `duration`.
    pub fn holds(&self) -> Vec<f64> {
        self.boundaries
            .iter()
            .zip(self.boundaries.iter().skip(1).chain([&self.duration]))
            .map(|(a, b)| b - a)
            .collect()
    }

    /// Values at `t = k·dt` for `k·dt < duration`.
    pub fn sample(&self, dt: f64) -> Vec<f64> {
        let n = (self.duration / dt).ceil() as usize;
        (0..n).map(|k| self.value(k as f64 * dt)).collect()
    }
}

/// PRBS with hold lengths uniform in `hold_range`, deterministic per seed.
pub fn prbs(amplitude: f64, hold_range: (f64, f64), duration: f64, seed: u64) -> PrbsSignal {
    let (lo, hi) = hold_range;
    assert!(
        lo > 0.0 && lo <= hi && hi <= duration,
        "hold range must lie within (0, duration]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial_positive = rng.random_bool(0.5);
    let mut boundaries = vec![0.0];
    let mut t = 0.0;
    loop {
        t += if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        };
        if t >= duration {
            break;
        }
        boundaries.push(t);
    }
    PrbsSignal {
        amplitude,
        duration,
        boundaries,
        initial_positive,
    }
}
