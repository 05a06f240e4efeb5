use serde::{Deserialize, Serialize};

/// Numerical acceptance budgets. The continuous-time conditions are
/// exact; the discretization needs explicit allowances, collected here
/// so every check reports the budget it ran under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceProfile {
    /// Max |drift residual| accepted by drift-check sweeps.
    pub drift_tol: f64,
    /// Martingale-test bias allowance per unit time step: budget = coeff · dt.
    pub bias_coeff: f64,
    /// Empirical positivity allowance, relative to ‖h₀‖_∞.
    pub positivity_eps_rel: f64,
    /// Pathwise monotonicity slack on bond prices.
    pub monotonicity_tol: f64,
    /// Relative tail size accepted when auditing coefficient decay at Ξ.
    pub tail_rel_tol: f64,
}

impl ToleranceProfile {
    pub fn default_profile() -> Self {
        Self {
            drift_tol: 1e-3,
            bias_coeff: 0.05,
            positivity_eps_rel: 1e-6,
            monotonicity_tol: 1e-9,
            // Decay at the horizon is not enforced by default: constant
            // coefficient families are legitimate on a truncated grid.
            tail_rel_tol: 1.0,
        }
    }

    pub fn strict() -> Self {
        Self {
            drift_tol: 2e-4,
            bias_coeff: 0.02,
            positivity_eps_rel: 1e-8,
            monotonicity_tol: 1e-12,
            tail_rel_tol: 0.05,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default_profile()),
            "strict" => Some(Self::strict()),
            _ => None,
        }
    }
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self::default_profile()
    }
}
