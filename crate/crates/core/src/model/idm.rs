//! Intelligent Driver Model acceleration law, its equilibrium and its
//! linearization.

use super::{IdmParams, LinearCoeffs, ModelError, VehicleKinematics};

/// Desired dynamic gap `s* = s0 + max(0, vT − vΔv / (2√(ab)))`.
///
/// `rel_speed` is the leader speed minus the follower speed.
#[inline]
pub fn desired_gap(speed: f64, rel_speed: f64, p: &IdmParams) -> f64 {
    let dynamic = speed * p.headway - speed * rel_speed / (2.0 * (p.accel * p.decel).sqrt());
    p.min_gap + dynamic.max(0.0)
}

/// IDM acceleration as a function of own speed, net gap and relative speed.
#[inline]
pub fn acceleration_from_gap(
    speed: f64,
    net_gap: f64,
    rel_speed: f64,
    p: &IdmParams,
) -> Result<f64, ModelError> {
    if net_gap <= 0.0 {
        return Err(ModelError::GapCollision { net_gap });
    }
    let free = (speed / p.v_max).powi(4);
    let interaction = (desired_gap(speed, rel_speed, p) / net_gap).powi(2);
    Ok(p.accel * (1.0 - free - interaction))
}

/// IDM acceleration of `follower` behind `leader`.
pub fn idm_acceleration(
    follower: VehicleKinematics,
    leader: VehicleKinematics,
    p: &IdmParams,
) -> Result<f64, ModelError> {
    let net_gap = leader.position - follower.position - p.length;
    acceleration_from_gap(follower.speed, net_gap, leader.speed - follower.speed, p)
}

/// Net gap at which a vehicle travelling at `v_eq` behind a leader at the
/// same speed has zero acceleration: `(s0 + v_eq·T) / √(1 − (v_eq/v_max)⁴)`.
pub fn equilibrium_gap(v_eq: f64, p: &IdmParams) -> Result<f64, ModelError> {
    if !(v_eq >= 0.0 && v_eq < p.v_max) {
        return Err(ModelError::NoEquilibrium {
            v_eq,
            v_max: p.v_max,
        });
    }
    let free = 1.0 - (v_eq / p.v_max).powi(4);
    Ok((p.min_gap + v_eq * p.headway) / free.sqrt())
}

/// Analytic partial derivatives `(f1, f2, f3)` of the IDM at the equilibrium
/// with speed `v_eq`.
///
/// At `Δv = 0` the argument of the `max(0, ·)` in `s*` equals `v_eq·T > 0`, so
/// the kink is inactive and the law is smooth there.
pub fn linearize(p: &IdmParams, v_eq: f64) -> Result<LinearCoeffs, ModelError> {
    if v_eq <= 0.0 {
        return Err(ModelError::NoEquilibrium {
            v_eq,
            v_max: p.v_max,
        });
    }
    let gap = equilibrium_gap(v_eq, p)?;
    let s_star = p.min_gap + v_eq * p.headway;
    debug_assert!(
        v_eq * p.headway > 0.0,
        "desired-gap kink active at equilibrium"
    );

    let gap2 = gap * gap;
    let f1 = p.accel * (-4.0 * v_eq.powi(3) / p.v_max.powi(4) - 2.0 * s_star * p.headway / gap2);
    let f2 = 2.0 * p.accel * s_star * s_star / (gap2 * gap);
    let f3 = p.accel * s_star * v_eq / (gap2 * (p.accel * p.decel).sqrt());
    Ok(LinearCoeffs::new(f1, f2, f3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mean_params() -> IdmParams {
        IdmParams::new(0.77, 1.1, 1.5, 2.0)
    }

    /// Bisection on the acceleration law, independent of the closed form.
    fn bisect_gap(v: f64, p: &IdmParams) -> f64 {
        let accel = |gap: f64| acceleration_from_gap(v, gap, 0.0, p).unwrap();
        let (mut lo, mut hi) = (1e-6, 1.0);
        while accel(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if accel(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn standstill_at_min_gap_is_equilibrium() {
        let p = mean_params();
        let a = acceleration_from_gap(0.0, p.min_gap, 0.0, &p).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn free_flow_at_desired_speed() {
        let p = mean_params();
        let a = acceleration_from_gap(p.v_max, 1e12, 0.0, &p).unwrap();
        assert!(a.abs() < 1e-12);
    }

    #[test]
    fn equilibrium_gap_matches_bisection() {
        let p = mean_params();
        let gap = equilibrium_gap(16.5, &p).unwrap();
        let oracle = bisect_gap(16.5, &p);
        assert_relative_eq!(gap, oracle, max_relative = 1e-10);
        assert!(gap > p.min_gap + 16.5 * p.headway);
        let a = acceleration_from_gap(16.5, gap, 0.0, &p).unwrap();
        assert!(a.abs() < 1e-12);
    }

    #[test]
    fn equilibrium_gap_limits() {
        let p = mean_params();
        assert_eq!(equilibrium_gap(0.0, &p).unwrap(), p.min_gap);
        let v = 0.99 * p.v_max;
        let gap = equilibrium_gap(v, &p).unwrap();
        assert_relative_eq!(gap, bisect_gap(v, &p), max_relative = 1e-9);
        assert!(gap > 5.0 * (p.min_gap + v * p.headway));
        let v = 0.998 * p.v_max;
        assert!(equilibrium_gap(v, &p).unwrap() > 10.0 * (p.min_gap + v * p.headway));
        assert!(matches!(
            equilibrium_gap(p.v_max, &p),
            Err(ModelError::NoEquilibrium { .. })
        ));
    }

    #[test]
    fn collision_is_an_error() {
        let p = mean_params();
        let follower = VehicleKinematics::new(0.0, 10.0);
        let leader = VehicleKinematics::new(p.length, 10.0);
        assert!(matches!(
            idm_acceleration(follower, leader, &p),
            Err(ModelError::GapCollision { .. })
        ));
    }

    #[test]
    fn mean_vehicle_coefficients() {
        // Frozen from an independent NumPy evaluation of the same partials.
        let c = linearize(&mean_params(), 16.5).unwrap();
        assert_relative_eq!(c.f1, -0.092_624_610_591_900_32, max_relative = 1e-12);
        assert_relative_eq!(c.f2, 0.052_258_128_094_270_64, max_relative = 1e-12);
        assert_relative_eq!(c.f3, 0.483_816_253_661_644_1, max_relative = 1e-12);
    }

    fn central_difference(p: &IdmParams, v: f64) -> LinearCoeffs {
        let gap = equilibrium_gap(v, p).unwrap();
        let h = 1e-5;
        let f = |v: f64, gap: f64, dv: f64| acceleration_from_gap(v, gap, dv, p).unwrap();
        LinearCoeffs::new(
            (f(v + h, gap, 0.0) - f(v - h, gap, 0.0)) / (2.0 * h),
            (f(v, gap + h, 0.0) - f(v, gap - h, 0.0)) / (2.0 * h),
            (f(v, gap, h) - f(v, gap, -h)) / (2.0 * h),
        )
    }

    proptest! {
        #[test]
        fn analytic_partials_match_finite_differences(
            a in 0.3f64..3.0, b in 0.3f64..3.0, t in 0.3f64..3.0, s0 in 0.5f64..3.5,
            ratio in 0.05f64..0.95,
        ) {
            let p = IdmParams::new(a, b, t, s0);
            let v = ratio * p.v_max;
            let c = linearize(&p, v).unwrap();
            let fd = central_difference(&p, v);
            prop_assert!(((c.f1 - fd.f1) / c.f1).abs() < 1e-5);
            prop_assert!(((c.f2 - fd.f2) / c.f2).abs() < 1e-5);
            prop_assert!(((c.f3 - fd.f3) / c.f3).abs() < 1e-5);
            prop_assert!(c.is_rational());
        }

        #[test]
        fn equilibrium_is_a_fixed_point(
            a in 0.3f64..3.0, b in 0.3f64..3.0, t in 0.3f64..3.0, s0 in 0.5f64..3.5,
            ratio in 0.0f64..0.95,
        ) {
            let p = IdmParams::new(a, b, t, s0);
            let v = ratio * p.v_max;
            let gap = equilibrium_gap(v, &p).unwrap();
            let acc = acceleration_from_gap(v, gap, 0.0, &p).unwrap();
            prop_assert!(acc.abs() < 1e-12);
        }
    }
}
