use crate::error::{Error, Result};
use crate::function_space::surface::HbSurface;

/// The four squared components of the weighted surface norm
///
///   ‖h‖² = |h(0,0)|² + ∫|∂_ξ h(ξ,0)|² e^{βξ} dξ
///        + ∫|∂_η h(0,η)|² dη + ∫∫|∂_{ξη} h|² dη e^{βξ} dξ,
///
/// evaluated with the hybrid difference stencil and trapezoid quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBreakdown {
    pub point_term: f64,
    pub xi_term: f64,
    pub eta_term: f64,
    pub mixed_term: f64,
    pub total: f64,
}

impl NormBreakdown {
    fn assemble(point_term: f64, xi_term: f64, eta_term: f64, mixed_term: f64) -> Self {
        let total = (point_term + xi_term + eta_term + mixed_term).sqrt();
        Self { point_term, xi_term, eta_term, mixed_term, total }
    }

    pub fn sum_of_terms(&self) -> f64 {
        self.point_term + self.xi_term + self.eta_term + self.mixed_term
    }
}

/// Discrete weighted norm of a surface with weight e^{exponent·ξ}.
///
/// `exponent` is usually the grid's β or β′, but any positive value is
/// accepted for convergence probes. Deterministic for identical inputs.
pub fn hb_norm(h: &HbSurface, exponent: f64) -> Result<NormBreakdown> {
    if !(exponent > 0.0) || !exponent.is_finite() {
        return Err(Error::Usage(format!(
            "norm exponent must be positive and finite, got {exponent}"
        )));
    }
    let g = *h.grid();
    let dx = g.dx();
    let de = g.d_eta();

    let point_term = h.at(0, 0) * h.at(0, 0);

    let dxi = h.d_xi();
    let mut xi_term = 0.0;
    for i in 0..g.xi_points() {
        let w = trapezoid_weight(i, g.n_xi, dx) * (exponent * g.xi(i)).exp();
        let v = dxi.at(i, 0);
        xi_term += w * v * v;
    }

    let deta = h.d_eta();
    let mut eta_term = 0.0;
    for k in 0..g.eta_points() {
        let v = deta.at(0, k);
        eta_term += trapezoid_weight(k, g.n_eta, de) * v * v;
    }

    let dmix = dxi.d_eta();
    let mut mixed_term = 0.0;
    for i in 0..g.xi_points() {
        let wx = trapezoid_weight(i, g.n_xi, dx) * (exponent * g.xi(i)).exp();
        let mut inner = 0.0;
        for k in 0..g.eta_points() {
            let v = dmix.at(i, k);
            inner += trapezoid_weight(k, g.n_eta, de) * v * v;
        }
        mixed_term += wx * inner;
    }

    Ok(NormBreakdown::assemble(point_term, xi_term, eta_term, mixed_term))
}

/// Convenience: the norm at the grid's β exponent.
pub fn hb_norm_beta(h: &HbSurface) -> f64 {
    hb_norm(h, h.grid().beta).expect("grid beta is positive").total
}

/// Convenience: the norm at the grid's β′ exponent.
pub fn hb_norm_beta_prime(h: &HbSurface) -> f64 {
    hb_norm(h, h.grid().beta_prime).expect("grid beta_prime is positive").total
}

#[inline]
pub(crate) fn trapezoid_weight(i: usize, n: usize, step: f64) -> f64 {
    if i == 0 || i == n {
        0.5 * step
    } else {
        step
    }
}
