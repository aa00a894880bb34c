//! Closed (ring-road) vehicle systems: the block-circulant state matrix and
//! its spectral stability test.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linear::{eigenvalues, LinearError};
use crate::model::LinearCoeffs;

/// Largest ring handled by the dense eigensolver.
pub const MAX_DENSE_RING: usize = 512;

/// Default radius around the origin treated as the translation mode.
pub const STRUCTURAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RingError {
    #[error("a ring needs at least 2 vehicles, got {m}")]
    TooFewVehicles { m: usize },
    #[error("heterogeneous ring of {m} vehicles exceeds the dense limit of {max}")]
    TooLarge { m: usize, max: usize },
    #[error(transparent)]
    Linear(#[from] LinearError),
}

/// Ring of `m` vehicles where vehicle 1 follows vehicle `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingSystem {
    pub coeffs: Vec<LinearCoeffs>,
    pub a_c: DMatrix<f64>,
}

impl RingSystem {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.coeffs.windows(2).all(|w| w[0] == w[1])
    }
}

/// Assembles the `2m × 2m` block-circulant state matrix with state
/// `(Δy_1, ẏ_1, …, Δy_m, ẏ_m)`.
pub fn ring_matrix(coeffs: &[LinearCoeffs]) -> Result<RingSystem, RingError> {
    let m = coeffs.len();
    if m < 2 {
        return Err(RingError::TooFewVehicles { m });
    }
    let n = 2 * m;
    let mut a = DMatrix::zeros(n, n);
    for (k, c) in coeffs.iter().enumerate() {
        let r = 2 * k;
        let leader_speed = if k == 0 { n - 1 } else { r - 1 };
        a[(r, r + 1)] = -1.0;
        a[(r + 1, r)] = c.f2;
        a[(r + 1, r + 1)] = c.f1 - c.f3;
        a[(r, leader_speed)] = 1.0;
        a[(r + 1, leader_speed)] = c.f3;
    }
    Ok(RingSystem {
        coeffs: coeffs.to_vec(),
        a_c: a,
    })
}

/// Eigenvalues of a ring split into the structural translation mode and the
/// remaining spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct RingSpectrum {
    pub eigenvalues: Vec<Complex64>,
    pub structural: Vec<Complex64>,
    pub tol: f64,
}

impl RingSpectrum {
    /// Every non-structural eigenvalue has a strictly negative real part.
    pub fn is_stable(&self) -> bool {
        self.eigenvalues.iter().all(|l| l.re < 0.0)
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn rows(&self) -> Vec<EigenRow> {
        let tagged = self
            .structural
            .iter()
            .map(|l| (l, true))
            .chain(self.eigenvalues.iter().map(|l| (l, false)));
        tagged
            .enumerate()
            .map(|(index, (l, structural))| EigenRow {
                index,
                re: l.re,
                im: l.im,
                structural,
            })
            .collect()
    }
}

/// One eigenvalue as written to CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenRow {
    pub index: usize,
    pub re: f64,
    pub im: f64,
    pub structural: bool,
}

/// Spectrum of the ring, by dense eigensolver up to [`MAX_DENSE_RING`]
/// vehicles and by the closed-form factorization for larger homogeneous
/// rings.
pub fn ring_spectrum(sys: &RingSystem, tol: f64) -> Result<RingSpectrum, RingError> {
    let m = sys.len();
    let all = if m <= MAX_DENSE_RING {
        eigenvalues(sys.a_c.clone())?
    } else if sys.is_homogeneous() {
        homogeneous_ring_roots(sys.coeffs[0], m)?
    } else {
        return Err(RingError::TooLarge {
            m,
            max: MAX_DENSE_RING,
        });
    };
    let (structural, eigenvalues) = all.into_iter().partition(|l| l.norm() <= tol);
    Ok(RingSpectrum {
        eigenvalues,
        structural,
        tol,
    })
}

pub fn ring_asymptotically_stable(sys: &RingSystem, tol: f64) -> Result<bool, RingError> {
    Ok(ring_spectrum(sys, tol)?.is_stable())
}

/// Roots of the `m` quadratic factors
/// `s² − s(f1 + f3 z_k) − f2 z_k` with `z_k = e^{2ikπ/m} − 1`.
pub fn homogeneous_ring_roots(c: LinearCoeffs, m: usize) -> Result<Vec<Complex64>, RingError> {
    if m < 2 {
        return Err(RingError::TooFewVehicles { m });
    }
    let mut roots = Vec::with_capacity(2 * m);
    for k in 0..m {
        let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / m as f64) - 1.0;
        let lin = c.f1 + c.f3 * z;
        let root = (lin * lin + 4.0 * c.f2 * z).sqrt();
        roots.push((lin + root) * 0.5);
        roots.push((lin - root) * 0.5);
    }
    Ok(roots)
}
