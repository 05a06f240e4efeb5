use crate::coefficients::registry::LossState;
use crate::error::{Error, Result};
use crate::function_space::{stencil_1d, trapezoid_weight, HbSurface};

/// Negative-density tolerance, relative to the short-end scale. Values in
/// [-tol, 0) are clamped to zero; anything below is a model error.
const NEG_DENSITY_TOL: f64 = 1e-8;

/// Loss-jump intensity recovered from the short end of the spread curve.
///
/// `total_rate` is λ(t, L_t) = h(0, L_t) − h(0, 1); `density[k]` samples
/// the compensator density −∂_η h(0, L_t + η_k) on the η grid, clamped at
/// zero, with h(0, ·) held flat at h(0, 1) beyond quality one. The
/// trapezoid integral of the density telescopes exactly to `total_rate`
/// (before clamping), so sampled jump sizes are consistent with the rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LossIntensity {
    pub total_rate: f64,
    pub density: Vec<f64>,
    d_eta: f64,
}

impl LossIntensity {
    /// Trapezoid integral of the clamped density.
    pub fn integrated_density(&self) -> f64 {
        let n = self.density.len() - 1;
        self.density
            .iter()
            .enumerate()
            .map(|(k, q)| trapezoid_weight(k, n, self.d_eta) * q)
            .sum()
    }

    /// Inverse-CDF sample of a loss size for uniform `u` ∈ [0, 1): the
    /// cumulative is piecewise linear over cells, so the draw lands by
    /// linear interpolation inside the bracketing cell.
    pub fn sample_size(&self, u: f64) -> f64 {
        let n = self.density.len() - 1;
        let mut cum = vec![0.0; n + 1];
        for k in 0..n {
            cum[k + 1] = cum[k] + 0.5 * self.d_eta * (self.density[k] + self.density[k + 1]);
        }
        let total = cum[n];
        if total <= 0.0 {
            return 0.0;
        }
        let target = u.clamp(0.0, 1.0) * total;
        let mut k = 0;
        while k < n && cum[k + 1] < target {
            k += 1;
        }
        let cell = cum[k + 1] - cum[k];
        if cell <= 0.0 {
            return k as f64 * self.d_eta;
        }
        (k as f64 + (target - cum[k]) / cell) * self.d_eta
    }
}

/// Recovers the loss compensator from the prevailing spread curve.
///
/// Requires h(0, ·) non-increasing in η beyond the current loss level up
/// to the clamping tolerance; a genuinely increasing stretch means the
/// implied jump measure would be negative and is rejected.
pub fn loss_intensity(h: &HbSurface, loss: &LossState) -> Result<LossIntensity> {
    loss.validate()?;
    let g = h.grid();
    let ep = g.eta_points();
    let d_eta = g.d_eta();

    // Nodal samples of y ↦ h(0, L + y), flat beyond quality one.
    let mut s = vec![0.0; ep];
    for (k, v) in s.iter_mut().enumerate() {
        *v = h.short_end_at(loss.level + g.eta(k));
    }
    let scale = h
        .short_end()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = NEG_DENSITY_TOL * scale;

    let mut density = vec![0.0; ep];
    stencil_1d(&s, d_eta, &mut density);
    for (k, d) in density.iter_mut().enumerate() {
        *d = -*d;
        if *d < -tol {
            return Err(Error::Model(format!(
                "spread curve not monotone in quality: implied jump density {d:.3e} at loss offset {}",
                g.eta(k)
            )));
        }
        if *d < 0.0 {
            *d = 0.0;
        }
    }

    let r_free = h.short_end()[g.n_eta];
    let mut total_rate = s[0] - r_free;
    if total_rate < -tol {
        return Err(Error::Model(format!(
            "spread curve not monotone in quality: negative total intensity {total_rate:.3e}"
        )));
    }
    if total_rate < 0.0 {
        total_rate = 0.0;
    }

    Ok(LossIntensity { total_rate, density, d_eta })
}
