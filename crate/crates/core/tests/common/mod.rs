//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use hetflow::model::{acceleration_from_gap, equilibrium_gap, IdmParams, LinearCoeffs};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Γ(jω) from the rational form `(f3 s + f2) / (s² + (f3 − f1)s + f2)`.
pub fn gamma_at(c: LinearCoeffs, omega: f64) -> Complex64 {
    let s = Complex64::new(0.0, omega);
    (s * c.f3 + c.f2) / (s * s + s * (c.f3 - c.f1) + c.f2)
}

/// Maximum of `|∏Γ(jω)|` over `points` log-spaced frequencies in
/// `[1e-4, 1e3]` rad/s, and ω = 0.
pub fn sweep_product_max(coeffs: &[LinearCoeffs], points: usize) -> f64 {
    let mut best = 1.0f64;
    for k in 0..points {
        let w = 10f64.powf(-4.0 + 7.0 * k as f64 / (points - 1) as f64);
        let g: f64 = coeffs.iter().map(|&c| gamma_at(c, w).norm()).product();
        best = best.max(g);
    }
    best
}

/// Central finite differences of the IDM law at equilibrium with respect to
/// own speed, net gap and relative speed.
pub fn fd_linearize(p: &IdmParams, v_eq: f64) -> LinearCoeffs {
    let s_eq = equilibrium_gap(v_eq, p).unwrap();
    let acc = |v: f64, s: f64, dv: f64| acceleration_from_gap(v, s, dv, p).unwrap();
    let hv = 1e-4 * v_eq;
    let hs = 1e-4 * s_eq;
    let f1 = (acc(v_eq + hv, s_eq, 0.0) - acc(v_eq - hv, s_eq, 0.0)) / (2.0 * hv);
    let f2 = (acc(v_eq, s_eq + hs, 0.0) - acc(v_eq, s_eq - hs, 0.0)) / (2.0 * hs);
    let f3 = (acc(v_eq, s_eq, hv) - acc(v_eq, s_eq, -hv)) / (2.0 * hv);
    LinearCoeffs::new(f1, f2, f3)
}

/// Roots of `s² + (f3 − f1 − ζf3)s + f2(1 − ζ)` for every m-th root of unity ζ.
pub fn ring_roots(c: LinearCoeffs, m: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(2 * m);
    for k in 0..m {
        let zeta = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / m as f64);
        let p = -zeta * c.f3 + (c.f3 - c.f1);
        let q = (-zeta + 1.0) * c.f2;
        let disc = (p * p - q * 4.0).sqrt();
        out.push((-p + disc) / 2.0);
        out.push((-p - disc) / 2.0);
    }
    out
}

/// Largest singular value of `(jωI − A1)⁻¹A0` from explicit 2×2 complex
/// algebra.
pub fn mimo_sigma_oracle(c: LinearCoeffs, omega: f64) -> f64 {
    let s = Complex64::new(0.0, omega);
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    // jωI − A1 with A1 = [[0, −1], [f2, f1 − f3]].
    let m = [[s, one], [-one * c.f2, s - (c.f1 - c.f3)]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let inv = [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ];
    // A0 = [[0, 1], [0, f3]].
    let a0 = [[zero, one], [zero, one * c.f3]];
    let mut g = [[zero; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = inv[i][0] * a0[0][j] + inv[i][1] * a0[1][j];
        }
    }
    // H = GᴴG, Hermitian.
    let mut h = [[zero; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            h[i][j] = g[0][i].conj() * g[0][j] + g[1][i].conj() * g[1][j];
        }
    }
    let tr = (h[0][0] + h[1][1]).re;
    let det = (h[0][0] * h[1][1] - h[0][1] * h[1][0]).re;
    (0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt())).sqrt()
}

/// Largest distance in a greedy nearest pairing of two root multisets.
pub fn max_root_mismatch(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut pool = b.to_vec();
    let mut worst = 0.0f64;
    for x in a {
        let (k, d) = pool
            .iter()
            .enumerate()
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        worst = worst.max(d);
        pool.swap_remove(k);
    }
    worst
}

/// IDM parameters drawn uniformly from the admissible box, with an
/// equilibrium speed between 5 % and 95 % of v_max.
pub fn random_idm(rng: &mut ChaCha8Rng) -> (IdmParams, f64) {
    let p = IdmParams::new(
        rng.random_range(0.3..3.0),
        rng.random_range(0.3..3.0),
        rng.random_range(0.3..3.0),
        rng.random_range(0.5..3.5),
    );
    let v_eq = rng.random_range(0.05..0.95) * p.v_max;
    (p, v_eq)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Prints one criterion line and returns whether it passed.
pub fn report(id: &str, pass: bool, detail: impl std::fmt::Display) -> bool {
    println!(
        "{} criterion {id}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}
