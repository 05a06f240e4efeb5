use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for deciding whether a time lies on the ξ lattice.
const LATTICE_TOL: f64 = 1e-9;

/// Discretization of the surface domain (ξ, η) ∈ [0, Ξ] × [0, 1].
///
/// ξ is time-to-maturity, truncated at `xi_max` with flat extrapolation
/// beyond; η is the quality index. Grid points are ξ_i = i·Δξ and
/// η_k = k/n_eta, so indicator comparisons such as L ≤ η_k are exact.
/// `beta` and `beta_prime` are the weight exponents of the two nested
/// weighted norms carried by the grid (0 < β < β′).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub xi_max: f64,
    pub n_xi: usize,
    pub n_eta: usize,
    pub beta: f64,
    pub beta_prime: f64,
}

impl SurfaceGrid {
    pub fn new(xi_max: f64, n_xi: usize, n_eta: usize, beta: f64, beta_prime: f64) -> Result<Self> {
        if !(xi_max > 0.0) || !xi_max.is_finite() {
            return Err(Error::Grid(format!("xi_max must be positive, got {xi_max}")));
        }
        if n_xi < 2 {
            return Err(Error::Grid(format!("n_xi must be >= 2, got {n_xi}")));
        }
        if n_eta < 1 {
            return Err(Error::Grid(format!("n_eta must be >= 1, got {n_eta}")));
        }
        if !(beta > 0.0 && beta < beta_prime) || !beta_prime.is_finite() {
            return Err(Error::Grid(format!(
                "weight exponents must satisfy 0 < beta < beta_prime, got beta={beta}, beta_prime={beta_prime}"
            )));
        }
        Ok(Self { xi_max, n_xi, n_eta, beta, beta_prime })
    }

    /// ξ step Δξ = Ξ / n_xi. This is also the engine's time step.
    #[inline]
    pub fn dx(&self) -> f64 {
        self.xi_max / self.n_xi as f64
    }

    /// η step 1 / n_eta.
    #[inline]
    pub fn d_eta(&self) -> f64 {
        1.0 / self.n_eta as f64
    }

    #[inline]
    pub fn xi(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    #[inline]
    pub fn eta(&self, k: usize) -> f64 {
        k as f64 / self.n_eta as f64
    }

    /// Number of ξ nodes (n_xi + 1).
    #[inline]
    pub fn xi_points(&self) -> usize {
        self.n_xi + 1
    }

    /// Number of η nodes (n_eta + 1).
    #[inline]
    pub fn eta_points(&self) -> usize {
        self.n_eta + 1
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.xi_points() * self.eta_points()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, k: usize) -> usize {
        i * self.eta_points() + k
    }

    /// Maps a time onto the ξ lattice, rejecting off-lattice values.
    pub fn lattice_steps(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) {
            return Err(Error::Usage(format!("time must be >= 0, got {t}")));
        }
        let dx = self.dx();
        let steps = (t / dx).round();
        if (t - steps * dx).abs() > LATTICE_TOL * dx.max(t) {
            return Err(Error::Usage(format!(
                "time {t} is not a multiple of the xi step {dx}"
            )));
        }
        Ok(steps as usize)
    }

    /// Maps a quality level onto the η lattice, rejecting off-grid values.
    pub fn eta_index(&self, eta: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Usage(format!("eta must lie in [0, 1], got {eta}")));
        }
        let k = (eta * self.n_eta as f64).round();
        if (eta - k / self.n_eta as f64).abs() > LATTICE_TOL {
            return Err(Error::Usage(format!(
                "eta {eta} is not on the eta grid (step {})",
                self.d_eta()
            )));
        }
        Ok(k as usize)
    }

    /// True when both grids share every discretization parameter.
    pub fn same_as(&self, other: &SurfaceGrid) -> bool {
        self == other
    }
}
