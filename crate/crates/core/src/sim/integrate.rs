use log::debug;
use serde::{Deserialize, Serialize};

use super::disturbance::Signal;
use super::{Disturbance, SimError};
use crate::model::{acceleration_from_gap, ModelError, VehicleChain, VehicleKinematics};

/// Largest accepted integration step (s).
pub const MAX_DT: f64 = 0.05;

/// A speed reset to zero after an integration step. `vehicle` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampEvent {
    pub time: f64,
    pub vehicle: usize,
    pub speed: f64,
}

/// Sampled states of a simulated string. Row `k` of every per-vehicle array
/// is time `k·dt`; index 0 of the outer vectors is vehicle 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub v_eq: f64,
    pub time: Vec<f64>,
    pub position: Vec<Vec<f64>>,
    pub speed: Vec<Vec<f64>>,
    pub accel: Vec<Vec<f64>>,
    pub clamp_events: Vec<ClampEvent>,
}

impl Trajectory {
    pub fn vehicle_count(&self) -> usize {
        self.speed.len()
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// `ẏ_n(t) = v_n(t) − v_eq` for vehicle index `n` (0-based).
    pub fn speed_perturbation(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        self.speed[n].iter().map(move |v| v - self.v_eq)
    }

    pub fn final_speeds(&self) -> Vec<f64> {
        self.speed.iter().map(|s| *s.last().unwrap()).collect()
    }
}

/// RK4 from the exact equilibrium of `chain`.
pub fn simulate(
    chain: &VehicleChain,
    disturbances: &[Disturbance],
    duration: f64,
    dt: f64,
) -> Result<Trajectory, SimError> {
    let gaps = chain.equilibrium_gaps()?;
    let mut initial = Vec::with_capacity(chain.len());
    let mut ahead = 0.0;
    for (v, gap) in chain.vehicles.iter().zip(gaps) {
        ahead -= gap + v.params.length;
        initial.push(VehicleKinematics::new(ahead, chain.v_eq));
    }
    simulate_from(chain, &initial, disturbances, duration, dt)
}

/// RK4 from an arbitrary initial state. The virtual leader starts at
/// position 0 and keeps speed `v_eq`.
pub fn simulate_from(
    chain: &VehicleChain,
    initial: &[VehicleKinematics],
    disturbances: &[Disturbance],
    duration: f64,
    dt: f64,
) -> Result<Trajectory, SimError> {
    chain.validate()?;
    let m = chain.len();
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(SimError::InvalidStep { dt, max: MAX_DT });
    }
    if initial.len() != m {
        return Err(SimError::InitialStateMismatch {
            got: initial.len(),
            expected: m,
        });
    }
    let mut sources: Vec<Vec<Signal>> = (0..m).map(|_| Vec::new()).collect();
    for d in disturbances {
        let vehicle = d.vehicle();
        if vehicle == 0 || vehicle > m {
            return Err(SimError::InvalidTarget { vehicle, len: m });
        }
        if d.active_until() > duration {
            return Err(SimError::DurationTooShort {
                duration,
                needed: d.active_until(),
            });
        }
        sources[vehicle - 1].push(d.signal());
    }

    let steps = (duration / dt).round() as usize;
    let sys = System {
        chain,
        sources: &sources,
    };
    let lengths: Vec<f64> = chain.vehicles.iter().map(|v| v.params.length).collect();
    let mut gap = Vec::with_capacity(m);
    let mut ahead = 0.0;
    for (k, l) in initial.iter().zip(&lengths) {
        gap.push(ahead - k.position - l);
        ahead = k.position;
    }
    let mut v: Vec<f64> = initial.iter().map(|k| k.speed).collect();
    let mut traj = Trajectory {
        dt,
        v_eq: chain.v_eq,
        time: Vec::with_capacity(steps + 1),
        position: (0..m).map(|_| Vec::with_capacity(steps + 1)).collect(),
        speed: (0..m).map(|_| Vec::with_capacity(steps + 1)).collect(),
        accel: (0..m).map(|_| Vec::with_capacity(steps + 1)).collect(),
        clamp_events: Vec::new(),
    };

    let mut d = vec![0.0; m];
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let (mut r1, mut r2, mut r3, mut r4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut gs = vec![0.0; m];
    let mut vs = vec![0.0; m];
    for step in 0..=steps {
        let t = step as f64 * dt;
        // Disturbances are held at their mid-step value, which is exact
        // for switching times on the time grid.
        sys.disturbance(t + 0.5 * dt, &mut d);
        sys.accel(t, &gap, &v, &d, &mut k1, &mut r1)?;
        traj.time.push(t);
        let mut x = chain.v_eq * t;
        for n in 0..m {
            x -= gap[n] + lengths[n];
            traj.position[n].push(x);
            traj.speed[n].push(v[n]);
            traj.accel[n].push(k1[n]);
        }
        if step == steps {
            break;
        }

        let half = 0.5 * dt;
        stage(&gap, &v, &r1, &k1, half, &mut gs, &mut vs);
        sys.accel(t + half, &gs, &vs, &d, &mut k2, &mut r2)?;
        stage(&gap, &v, &r2, &k2, half, &mut gs, &mut vs);
        sys.accel(t + half, &gs, &vs, &d, &mut k3, &mut r3)?;
        stage(&gap, &v, &r3, &k3, dt, &mut gs, &mut vs);
        sys.accel(t + dt, &gs, &vs, &d, &mut k4, &mut r4)?;

        let t_next = t + dt;
        for n in 0..m {
            gap[n] += dt / 6.0 * (r1[n] + 2.0 * r2[n] + 2.0 * r3[n] + r4[n]);
            v[n] += dt / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
            if !(gap[n].is_finite() && v[n].is_finite()) {
                return Err(SimError::NumericalFailure { time: t_next });
            }
            if v[n] < 0.0 {
                traj.clamp_events.push(ClampEvent {
                    time: t_next,
                    vehicle: n + 1,
                    speed: v[n],
                });
                v[n] = 0.0;
            }
        }
    }
    if !traj.clamp_events.is_empty() {
        debug!("{} zero-speed clamp events", traj.clamp_events.len());
    }
    Ok(traj)
}

fn stage(g: &[f64], v: &[f64], rk: &[f64], ak: &[f64], h: f64, gs: &mut [f64], vs: &mut [f64]) {
    for n in 0..g.len() {
        gs[n] = g[n] + h * rk[n];
        vs[n] = v[n] + h * ak[n];
    }
}

struct System<'a> {
    chain: &'a VehicleChain,
    sources: &'a [Vec<Signal>],
}

impl System<'_> {
    fn disturbance(&self, t: f64, out: &mut [f64]) {
        for (o, src) in out.iter_mut().zip(self.sources) {
            *o = src.iter().map(|s| s.value(t)).sum();
        }
    }

    /// Accelerations and gap rates for net gaps `g` and speeds `v`.
    fn accel(
        &self,
        t: f64,
        g: &[f64],
        v: &[f64],
        d: &[f64],
        accel: &mut [f64],
        gap_rate: &mut [f64],
    ) -> Result<(), SimError> {
        let mut lead_v = self.chain.v_eq;
        for (n, vehicle) in self.chain.vehicles.iter().enumerate() {
            let a =
                acceleration_from_gap(v[n], g[n], lead_v - v[n], &vehicle.params).map_err(|e| {
                    match e {
                        ModelError::GapCollision { net_gap } => SimError::Collision {
                            time: t,
                            vehicle: n + 1,
                            net_gap,
                        },
                        other => other.into(),
                    }
                })?;
            accel[n] = a + d[n];
            gap_rate[n] = lead_v - v[n];
            lead_v = v[n];
        }
        Ok(())
    }
}
