//! H∞ norm of products of speed-to-speed transfer functions via the
//! Hamiltonian imaginary-axis test on a cascaded realization.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::transfer::{gamma_gain, hinf_second_order, poles};
use super::LinearError;
use crate::model::LinearCoeffs;

/// Input entering the first block of a [`Cascade`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadeInput {
    /// Speed perturbation of the vehicle ahead of the first block.
    LeaderSpeed,
    /// Acceleration disturbance on the first vehicle.
    Disturbance,
}

/// State-space realization `(A, b, c)` of a vehicle string whose output is
/// the speed perturbation of its last vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    pub coeffs: Vec<LinearCoeffs>,
    pub input: CascadeInput,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

impl Cascade {
    pub fn new(coeffs: &[LinearCoeffs], input: CascadeInput) -> Result<Self, LinearError> {
        if coeffs.is_empty() {
            return Err(LinearError::EmptyChain);
        }
        let n = 2 * coeffs.len();
        let mut a = DMatrix::zeros(n, n);
        for (k, cf) in coeffs.iter().enumerate() {
            let r = 2 * k;
            a[(r, r + 1)] = -1.0;
            a[(r + 1, r)] = cf.f2;
            a[(r + 1, r + 1)] = cf.f1 - cf.f3;
            if k > 0 {
                a[(r, r - 1)] = 1.0;
                a[(r + 1, r - 1)] = cf.f3;
            }
        }
        let mut b = DVector::zeros(n);
        match input {
            CascadeInput::LeaderSpeed => {
                b[0] = 1.0;
                b[1] = coeffs[0].f3;
            }
            CascadeInput::Disturbance => b[1] = 1.0,
        }
        let mut c = DVector::zeros(n);
        c[n - 1] = 1.0;
        Ok(Self {
            coeffs: coeffs.to_vec(),
            input,
            a,
            b,
            c,
        })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Every block has `f3 − f1 > 0` and `f2 > 0`, so the block-triangular
    /// state matrix is Hurwitz.
    pub fn is_stable(&self) -> bool {
        self.coeffs.iter().all(|c| c.f3 - c.f1 > 0.0 && c.f2 > 0.0)
    }

    /// `|c(jωI − A)⁻¹b|` from the closed-form factors.
    pub fn gain(&self, omega: f64) -> f64 {
        let tail: f64 = self.coeffs[1..]
            .iter()
            .map(|&c| gamma_gain(c, omega))
            .product();
        let head = match self.input {
            CascadeInput::LeaderSpeed => gamma_gain(self.coeffs[0], omega),
            CascadeInput::Disturbance => {
                let c = self.coeffs[0];
                let s = Complex64::new(0.0, omega);
                (s / (s * s + s * (c.f3 - c.f1) + c.f2)).norm()
            }
        };
        head * tail
    }

    /// `c(sI − A)⁻¹b` by a dense complex solve.
    pub fn frequency_response(&self, s: Complex64) -> Option<Complex64> {
        let n = self.order();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let rhs = self.b.map(|x| Complex64::new(x, 0.0));
        let x = m.lu().solve(&rhs)?;
        Some(x[n - 1])
    }

    /// `[[A, bbᵀ/γ], [−cᵀc/γ, −Aᵀ]]`.
    pub fn hamiltonian(&self, gamma: f64) -> DMatrix<f64> {
        let n = self.order();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&self.a);
        h.view_mut((0, n), (n, n))
            .copy_from(&(&self.b * self.b.transpose() / gamma));
        h.view_mut((n, 0), (n, n))
            .copy_from(&(-(&self.c * self.c.transpose()) / gamma));
        h.view_mut((n, n), (n, n)).copy_from(&(-self.a.transpose()));
        h
    }

    /// Nonnegative frequencies where the Hamiltonian at level `gamma` has
    /// eigenvalues on the imaginary axis.
    pub fn crossing_frequencies(&self, gamma: f64) -> Result<Vec<f64>, LinearError> {
        let h = self.hamiltonian(gamma);
        let eig = eigenvalues(h)?;
        let mut freqs: Vec<f64> = eig
            .iter()
            .filter(|l| is_imaginary(**l))
            .map(|l| l.im.abs())
            .collect();
        freqs.sort_by(f64::total_cmp);
        freqs.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * b.max(1.0));
        Ok(freqs)
    }
}

const IMAGINARY_TOL: f64 = 1e-8;

fn is_imaginary(l: Complex64) -> bool {
    l.re.abs() <= IMAGINARY_TOL * l.norm().max(1.0)
}

/// Eigenvalues by Francis QR. The unshifted iteration can cycle on the
/// paired spectra of Hamiltonians; on failure the matrix is replaced by an
/// orthogonally similar one drawn from a fixed seed.
pub(crate) fn eigenvalues(m: DMatrix<f64>) -> Result<Vec<Complex64>, LinearError> {
    let order = m.nrows();
    let max_iter = 30 * order.max(1);
    if let Some(schur) = Schur::try_new(m.clone(), f64::EPSILON, max_iter) {
        return Ok(schur.complex_eigenvalues().iter().copied().collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(order as u64);
    for _ in 0..RETRIES {
        let z = DMatrix::from_fn(order, order, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = z.qr().q();
        let rotated = q.transpose() * &m * &q;
        if let Some(schur) = Schur::try_new(rotated, f64::EPSILON, max_iter) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(LinearError::EigenFailure { order })
}

const RETRIES: usize = 8;

/// Search settings of [`hinf_chain_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HinfOptions {
    /// Lower edge of the initial frequency grid (rad/s).
    pub omega_min: f64,
    /// Upper edge of the initial frequency grid (rad/s).
    pub omega_max: f64,
    /// Points in the initial log-spaced grid.
    pub grid_points: usize,
    /// Relative tolerance of the level-set iteration.
    pub rel_tol: f64,
    /// Cap on level-set iterations.
    pub max_iter: usize,
}

impl Default for HinfOptions {
    fn default() -> Self {
        Self {
            omega_min: 1e-4,
            omega_max: 1e3,
            grid_points: 64,
            rel_tol: 1e-10,
            max_iter: 50,
        }
    }
}

/// H∞ norm of `Γ_1(jω)···Γ_k(jω)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfChainGain {
    pub coeffs: Vec<LinearCoeffs>,
    pub gamma: f64,
    pub peak_freq: f64,
}

pub fn hinf_chain(coeffs: &[LinearCoeffs]) -> Result<TfChainGain, LinearError> {
    hinf_chain_with(coeffs, &HinfOptions::default())
}

/// Level-set iteration on the Hamiltonian of the cascaded realization,
/// followed by a golden-section polish of the peak.
pub fn hinf_chain_with(
    coeffs: &[LinearCoeffs],
    opts: &HinfOptions,
) -> Result<TfChainGain, LinearError> {
    let sys = Cascade::new(coeffs, CascadeInput::LeaderSpeed)?;
    if !sys.is_stable() {
        return Err(LinearError::InfiniteGain);
    }
    let (mut gamma, mut peak) = peak_norm(&sys, opts)?;
    // The gain at DC is exactly one for every factor.
    if gamma < 1.0 {
        gamma = 1.0;
        peak = 0.0;
    }
    Ok(TfChainGain {
        coeffs: coeffs.to_vec(),
        gamma,
        peak_freq: peak,
    })
}

/// H∞ norm and peak frequency of an arbitrary stable cascade.
pub fn peak_norm(sys: &Cascade, opts: &HinfOptions) -> Result<(f64, f64), LinearError> {
    let mut best = (sys.gain(0.0), 0.0);
    let consider = |w: f64, best: &mut (f64, f64)| {
        let g = sys.gain(w);
        if g > best.0 {
            *best = (g, w);
        }
    };
    let n = opts.grid_points.max(2);
    let (lo, hi) = (opts.omega_min.ln(), opts.omega_max.ln());
    for k in 0..n {
        consider(
            (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp(),
            &mut best,
        );
    }
    for &c in &sys.coeffs {
        consider(hinf_second_order(c).1, &mut best);
        consider(poles(c)[0].norm(), &mut best);
        consider(c.f2.sqrt(), &mut best);
    }

    for _ in 0..opts.max_iter {
        let level = best.0 * (1.0 + 2.0 * opts.rel_tol);
        let freqs = sys.crossing_frequencies(level)?;
        if freqs.is_empty() {
            break;
        }
        let before = best.0;
        consider(0.5 * freqs[0], &mut best);
        for pair in freqs.windows(2) {
            consider((pair[0] * pair[1]).sqrt(), &mut best);
        }
        for &w in &freqs {
            consider(w, &mut best);
        }
        if best.0 <= before * (1.0 + opts.rel_tol) {
            break;
        }
    }

    if best.1 > 0.0 {
        let (w, g) = golden_max(|w| sys.gain(w), best.1 / 1.25, best.1 * 1.25, 100);
        if g > best.0 {
            best = (g, w);
        }
    }
    Ok(best)
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
pub(crate) fn golden_max(
    f: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    iters: usize,
) -> (f64, f64) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Bounded-real test: true iff the H∞ norm of the speed-to-speed product is
/// strictly below `gamma_bound`.
pub fn bounded_real_check(coeffs: &[LinearCoeffs], gamma_bound: f64) -> Result<bool, LinearError> {
    if !(gamma_bound > 0.0 && gamma_bound.is_finite()) {
        return Err(LinearError::InvalidBound { value: gamma_bound });
    }
    let sys = Cascade::new(coeffs, CascadeInput::LeaderSpeed)?;
    if !sys.is_stable() {
        return Err(LinearError::InfiniteGain);
    }
    Ok(sys.crossing_frequencies(gamma_bound)?.is_empty())
}
