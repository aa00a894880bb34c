//! Second-order transfer functions of one linearized vehicle.

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::model::LinearCoeffs;

/// 2×2 blocks of the open-chain state matrix for one vehicle, with state
/// `(Δy_n, ẏ_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMatrices {
    /// Coupling to the leader state.
    pub a_n0: Matrix2<f64>,
    /// Own dynamics.
    pub a_n1: Matrix2<f64>,
    /// Disturbance input column.
    pub b_v: [f64; 2],
}

pub fn build_block_matrices(c: LinearCoeffs) -> BlockMatrices {
    BlockMatrices {
        a_n0: Matrix2::new(0.0, 1.0, 0.0, c.f3),
        a_n1: Matrix2::new(0.0, -1.0, c.f2, c.f1 - c.f3),
        b_v: [0.0, 1.0],
    }
}

/// Which input/output pair a [`SecondOrderTf`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TfKind {
    /// Leader speed perturbation to own speed perturbation.
    GammaSpeed,
    /// Leader headway perturbation to own headway perturbation.
    GammaHeadway,
    /// Own disturbance to own headway perturbation.
    DisturbanceHeadway,
    /// Own disturbance to own speed perturbation.
    DisturbanceSpeed,
}

/// `N(s) / U(s)` with `U(s) = s² + s(f3 − f1) + f2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderTf {
    pub coeffs: LinearCoeffs,
    pub kind: TfKind,
}

impl SecondOrderTf {
    pub fn new(coeffs: LinearCoeffs, kind: TfKind) -> Self {
        Self { coeffs, kind }
    }

    pub fn numerator(&self, s: Complex64) -> Complex64 {
        let c = self.coeffs;
        match self.kind {
            TfKind::GammaSpeed | TfKind::GammaHeadway => s * c.f3 + c.f2,
            TfKind::DisturbanceHeadway => Complex64::new(-1.0, 0.0),
            TfKind::DisturbanceSpeed => s,
        }
    }

    pub fn denominator(&self, s: Complex64) -> Complex64 {
        let c = self.coeffs;
        s * s + s * (c.f3 - c.f1) + c.f2
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.numerator(s) / self.denominator(s)
    }

    /// `|G(jω)|`.
    pub fn gain(&self, omega: f64) -> f64 {
        self.eval(Complex64::new(0.0, omega)).norm()
    }

    pub fn poles(&self) -> [Complex64; 2] {
        poles(self.coeffs)
    }
}

/// Roots of `U(s)`, slowest (largest real part) first.
pub fn poles(c: LinearCoeffs) -> [Complex64; 2] {
    let p = c.f3 - c.f1;
    let disc = Complex64::new(p * p - 4.0 * c.f2, 0.0).sqrt();
    let r1 = (-p + disc) * 0.5;
    let r2 = (-p - disc) * 0.5;
    if r1.re >= r2.re {
        [r1, r2]
    } else {
        [r2, r1]
    }
}

/// `|Γ(jω)|` of the speed-to-speed transfer function.
#[inline]
pub fn gamma_gain(c: LinearCoeffs, omega: f64) -> f64 {
    let w2 = omega * omega;
    let num = w2 * c.f3 * c.f3 + c.f2 * c.f2;
    let re = c.f2 - w2;
    let im = c.f3 - c.f1;
    (num / (re * re + w2 * im * im)).sqrt()
}

/// `S = f1² − 2f1f3 − 2f2`; nonnegative iff the vehicle is strictly ℒ₂
/// string stable.
#[inline]
pub fn string_stability_coefficient(c: LinearCoeffs) -> f64 {
    c.f1 * c.f1 - 2.0 * c.f1 * c.f3 - 2.0 * c.f2
}

/// Exact H∞ norm of Γ and the frequency where it is attained.
///
/// With `Ω = ω²` the squared gain is stationary where
/// `f3²Ω² + 2f2²Ω + f2²S = 0`, which has a positive root only when `S < 0`.
pub fn hinf_second_order(c: LinearCoeffs) -> (f64, f64) {
    let s = string_stability_coefficient(c);
    if s >= 0.0 {
        return (1.0, 0.0);
    }
    let f2sq = c.f2 * c.f2;
    let f3sq = c.f3 * c.f3;
    let omega_sq = if f3sq > 0.0 {
        (-f2sq + (f2sq * f2sq - f3sq * f2sq * s).sqrt()) / f3sq
    } else {
        -0.5 * s
    };
    let omega = omega_sq.sqrt();
    (gamma_gain(c, omega).max(1.0), omega)
}

/// Largest singular value of the 2×2 map from leader `(Δy, ẏ)` to own
/// `(Δy, ẏ)` at frequency ω.
pub fn mimo_sigma_max(c: LinearCoeffs, omega: f64) -> f64 {
    let w2 = omega * omega;
    let (n_slope, n_const, d_lin, d_const) = mimo_terms(c);
    ((w2 * n_slope + n_const) / (w2 * w2 + w2 * d_lin + d_const)).sqrt()
}

fn mimo_terms(c: LinearCoeffs) -> (f64, f64, f64, f64) {
    let p = c.f3 - c.f1;
    (
        1.0 + c.f3 * c.f3,
        c.f1 * c.f1 + c.f2 * c.f2,
        p * p - 2.0 * c.f2,
        c.f2 * c.f2,
    )
}

/// Supremum over ω of [`mimo_sigma_max`] and its frequency.
pub fn mimo_hinf(c: LinearCoeffs) -> (f64, f64) {
    let (alpha, beta, gamma, delta) = mimo_terms(c);
    let q = alpha * delta - beta * gamma;
    let mut best = (mimo_sigma_max(c, 0.0), 0.0);
    if q > 0.0 {
        let omega_sq = (-beta + (beta * beta + alpha * q).sqrt()) / alpha;
        if omega_sq > 0.0 {
            let omega = omega_sq.sqrt();
            let g = mimo_sigma_max(c, omega);
            if g > best.0 {
                best = (g, omega);
            }
        }
    }
    best
}

/// The sufficient condition for strict MIMO string stability,
/// `f1 = 0` and `−2f2 − 1 ≥ 0`.
pub fn mimo_sufficient_condition(c: LinearCoeffs) -> bool {
    c.f1 == 0.0 && -2.0 * c.f2 - 1.0 >= 0.0
}

/// Real poles test `(f3 − f1)² − 4f2 ≥ 0`.
pub fn linf_step_monotone(c: LinearCoeffs) -> bool {
    debug_assert!(c.f3 <= 0.0 || -c.f2 / c.f3 < 0.0);
    let p = c.f3 - c.f1;
    p * p - 4.0 * c.f2 >= 0.0
}

/// Exact test for a nonnegative impulse response of Γ (equivalently a
/// monotone step response): real poles and the zero `−f2/f3` no larger than
/// the slowest pole.
pub fn impulse_response_nonnegative(c: LinearCoeffs) -> bool {
    if !linf_step_monotone(c) {
        return false;
    }
    if c.f3 == 0.0 {
        return c.f2 >= 0.0;
    }
    let slow = poles(c)[0].re;
    -c.f2 / c.f3 <= slow
}

/// Impulse response of Γ at time `t ≥ 0`.
pub fn gamma_impulse_response(c: LinearCoeffs, t: f64) -> f64 {
    let p = c.f3 - c.f1;
    let disc = p * p - 4.0 * c.f2;
    if disc > 0.0 {
        let root = disc.sqrt();
        let r1 = 0.5 * (-p + root);
        let r2 = 0.5 * (-p - root);
        ((c.f3 * r1 + c.f2) * (r1 * t).exp() - (c.f3 * r2 + c.f2) * (r2 * t).exp()) / (r1 - r2)
    } else if disc < 0.0 {
        let alpha = -0.5 * p;
        let beta = 0.5 * (-disc).sqrt();
        (alpha * t).exp()
            * (c.f3 * (beta * t).cos() + (c.f2 + c.f3 * alpha) / beta * (beta * t).sin())
    } else {
        let r = -0.5 * p;
        (r * t).exp() * (c.f3 + (c.f3 * r + c.f2) * t)
    }
}

/// ℒ∞-induced (peak-to-peak) norm of Γ, the ℒ₁ norm of its impulse
/// response, by adaptive Simpson quadrature.
///
/// Requires both poles in the open left half-plane.
pub fn linf_induced_norm(c: LinearCoeffs) -> f64 {
    let [slow, _] = poles(c);
    let decay = -slow.re;
    assert!(decay > 0.0, "impulse response does not decay");
    let horizon = 40.0 / decay;
    let mut segment = horizon / 400.0;
    if slow.im.abs() > 0.0 {
        segment = segment.min(std::f64::consts::PI / slow.im.abs());
    }
    let count = (horizon / segment).ceil() as usize;
    let f = |t: f64| gamma_impulse_response(c, t).abs();
    (0..count)
        .map(|k| {
            let a = k as f64 * segment;
            adaptive_simpson(&f, a, a + segment, 1e-13, 40)
        })
        .sum()
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix2;
    use proptest::prelude::*;

    const FIG2_FIRST: LinearCoeffs = LinearCoeffs::new(-0.075, 0.091, 0.55);
    const FIG2_SECOND: LinearCoeffs = LinearCoeffs::new(-0.26, 0.10, 0.64);

    fn dense_max(g: impl Fn(f64) -> f64) -> f64 {
        (0..=200_000)
            .map(|k| 10f64.powf(-4.0 + 7.0 * k as f64 / 200_000.0))
            .map(&g)
            .fold(g(0.0), f64::max)
    }

    prop_compose! {
        fn rational_coeffs()(f1 in -2.0f64..-0.01, f2 in 0.01f64..1.0, f3 in 0.01f64..2.0)
            -> LinearCoeffs {
            LinearCoeffs::new(f1, f2, f3)
        }
    }

    #[test]
    fn block_layout() {
        let b = build_block_matrices(LinearCoeffs::new(-1.0, 1.0, 1.0));
        assert_eq!(b.a_n1, Matrix2::new(0.0, -1.0, 1.0, -2.0));
        assert_eq!(b.a_n0, Matrix2::new(0.0, 1.0, 0.0, 1.0));
        assert_eq!(b.b_v, [0.0, 1.0]);
    }

    #[test]
    fn block_eigenvalues_are_the_poles() {
        let c = FIG2_FIRST;
        let eig = build_block_matrices(c).a_n1.complex_eigenvalues();
        let mut found: Vec<_> = eig.iter().copied().collect();
        found.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        let mut expected = poles(c).to_vec();
        expected.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        for (x, y) in found.iter().zip(&expected) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn gain_limits() {
        assert_eq!(gamma_gain(FIG2_FIRST, 0.0), 1.0);
        assert!(gamma_gain(FIG2_FIRST, 1e9) < 1e-8);
    }

    #[test]
    fn figure_two_gains() {
        let (g1, w1) = hinf_second_order(FIG2_FIRST);
        assert!((g1 - 1.06).abs() < 0.005, "{g1}");
        assert!(w1 > 0.0);
        assert_relative_eq!(
            g1,
            dense_max(|w| gamma_gain(FIG2_FIRST, w)),
            max_relative = 1e-6
        );
        let (g2, _) = hinf_second_order(FIG2_SECOND);
        assert!((g2 - 1.0).abs() < 0.005, "{g2}");
    }

    #[test]
    fn s_coefficient_direct() {
        assert_eq!(
            string_stability_coefficient(LinearCoeffs::new(-1.0, 0.0, 0.0)),
            1.0
        );
    }

    #[test]
    fn idm_s_coefficients() {
        use crate::model::{linearize, IdmParams};
        let unstable = linearize(&IdmParams::new(0.47, 1.1, 1.5, 2.0), 16.5).unwrap();
        assert!((string_stability_coefficient(unstable) + 0.018).abs() < 0.002);
        let stable = linearize(&IdmParams::new(1.55, 1.7, 0.8, 2.0), 16.5).unwrap();
        assert!((string_stability_coefficient(stable) - 0.0038).abs() < 0.0008);
        let mean = linearize(&IdmParams::new(0.77, 1.1, 1.5, 2.0), 16.5).unwrap();
        assert_relative_eq!(
            string_stability_coefficient(mean),
            -0.006_31,
            max_relative = 1e-2
        );
    }

    #[test]
    fn mimo_at_zero_frequency() {
        let c = FIG2_FIRST;
        let expected = (1.0 + c.f1 * c.f1 / (c.f2 * c.f2)).sqrt();
        assert_relative_eq!(mimo_sigma_max(c, 0.0), expected, max_relative = 1e-14);
    }

    #[test]
    fn mimo_hinf_matches_sweep() {
        for c in [FIG2_FIRST, FIG2_SECOND, LinearCoeffs::new(-2.0, 0.1, 1.0)] {
            let (g, _) = mimo_hinf(c);
            assert_relative_eq!(g, dense_max(|w| mimo_sigma_max(c, w)), max_relative = 1e-6);
        }
    }

    #[test]
    fn step_monotone_direct() {
        assert!(linf_step_monotone(LinearCoeffs::new(-2.0, 0.1, 1.0)));
        assert!(!linf_step_monotone(LinearCoeffs::new(-0.1, 0.5, 0.3)));
    }

    /// Unit-step response by RK4 on the controllable canonical form.
    fn step_response(c: LinearCoeffs, dt: f64, horizon: f64) -> Vec<f64> {
        let p = c.f3 - c.f1;
        let deriv = |x: [f64; 2]| [x[1], 1.0 - c.f2 * x[0] - p * x[1]];
        let mut x = [0.0, 0.0];
        let steps = (horizon / dt) as usize;
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let k1 = deriv(x);
            let k2 = deriv([x[0] + 0.5 * dt * k1[0], x[1] + 0.5 * dt * k1[1]]);
            let k3 = deriv([x[0] + 0.5 * dt * k2[0], x[1] + 0.5 * dt * k2[1]]);
            let k4 = deriv([x[0] + dt * k3[0], x[1] + dt * k3[1]]);
            for i in 0..2 {
                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            out.push(c.f2 * x[0] + c.f3 * x[1]);
        }
        out
    }

    fn max_overshoot(y: &[f64]) -> f64 {
        y.iter().fold(0.0f64, |m, &v| m.max(v - 1.0))
    }

    #[test]
    fn real_poles_with_early_zero_give_monotone_step() {
        for c in [LinearCoeffs::new(-2.0, 0.1, 1.0), FIG2_SECOND] {
            assert!(linf_step_monotone(c) && impulse_response_nonnegative(c));
            let y = step_response(c, 1e-3, 200.0);
            assert!(y.windows(2).all(|w| w[1] >= w[0] - 1e-12));
            assert!(max_overshoot(&y) < 1e-9);
        }
    }

    #[test]
    fn real_poles_alone_do_not_prevent_overshoot() {
        use crate::model::{linearize, IdmParams};
        let c = linearize(&IdmParams::new(0.87, 1.1, 1.5, 2.0), 16.5).unwrap();
        assert!(linf_step_monotone(c));
        assert!(string_stability_coefficient(c) >= 0.0 && c.f3 * c.f3 >= 2.0 * c.f2);
        assert!(!impulse_response_nonnegative(c));
        let y = step_response(c, 1e-3, 300.0);
        assert!(max_overshoot(&y) > 1e-3);
        assert!(linf_induced_norm(c) > 1.005);
    }

    #[test]
    fn impulse_response_integrates_to_dc_gain() {
        for c in [
            FIG2_FIRST,
            FIG2_SECOND,
            LinearCoeffs::new(-0.3, 0.0225, 0.0),
        ] {
            let signed: f64 = (0..200_000)
                .map(|k| gamma_impulse_response(c, (k as f64 + 0.5) * 0.01) * 0.01)
                .sum();
            assert_relative_eq!(signed, 1.0, max_relative = 1e-4);
        }
    }

    #[test]
    fn headway_and_speed_gains_coincide() {
        let speed = SecondOrderTf::new(FIG2_FIRST, TfKind::GammaSpeed);
        let headway = SecondOrderTf::new(FIG2_FIRST, TfKind::GammaHeadway);
        for k in 0..100 {
            let w = 0.01 * k as f64;
            assert_eq!(speed.gain(w), headway.gain(w));
            assert_relative_eq!(
                speed.gain(w),
                gamma_gain(FIG2_FIRST, w),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn disturbance_components_match_resolvent() {
        use nalgebra::Complex;
        let c = FIG2_SECOND;
        let a = build_block_matrices(c).a_n1.map(|x| Complex::new(x, 0.0));
        for w in [0.05, 0.3, 2.0] {
            let s = Complex64::new(0.0, w);
            let m = Matrix2::identity() * s - a;
            let x = m.try_inverse().unwrap() * nalgebra::Vector2::new(Complex::ZERO, Complex::ONE);
            let gh = SecondOrderTf::new(c, TfKind::DisturbanceHeadway).eval(s);
            let gv = SecondOrderTf::new(c, TfKind::DisturbanceSpeed).eval(s);
            assert!((x[0] - gh).norm() < 1e-12 && (x[1] - gv).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn closed_form_matches_sweep(c in rational_coeffs()) {
            let (g, w) = hinf_second_order(c);
            let sweep = dense_max(|w| gamma_gain(c, w));
            prop_assert!(((g - sweep) / sweep).abs() < 1e-6);
            prop_assert!((gamma_gain(c, w) - g).abs() < 1e-12 || w == 0.0);
        }

        #[test]
        fn unit_gain_iff_nonnegative_s(c in rational_coeffs()) {
            let (g, _) = hinf_second_order(c);
            prop_assert!(g >= 1.0);
            prop_assert_eq!(g == 1.0, string_stability_coefficient(c) >= 0.0);
        }

        #[test]
        fn mimo_dominates_siso(c in rational_coeffs(), w in 0.0f64..10.0) {
            prop_assert!(mimo_sigma_max(c, w) >= gamma_gain(c, w) * (1.0 - 1e-12));
        }

        #[test]
        fn mimo_condition_is_infeasible(c in rational_coeffs()) {
            prop_assert!(!mimo_sufficient_condition(c));
        }

        #[test]
        fn block_matrix_is_hurwitz(c in rational_coeffs()) {
            for ev in build_block_matrices(c).a_n1.complex_eigenvalues().iter() {
                prop_assert!(ev.re < 0.0);
            }
        }

        #[test]
        fn nonnegative_impulse_gives_unit_peak_to_peak_gain(c in rational_coeffs()) {
            prop_assume!(impulse_response_nonnegative(c));
            prop_assert!((linf_induced_norm(c) - 1.0).abs() < 1e-3);
        }
    }
}
