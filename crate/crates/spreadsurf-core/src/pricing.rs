//! Bond prices, discounted-price martingale tests, and single-tranche
//! CDO leg valuation on simulated ensembles.

use serde::{Deserialize, Serialize};

use crate::engine::{PathState, SimulationEnsemble};
use crate::error::{Error, Result};
use crate::function_space::HbSurface;
use crate::mpp::JumpKind;
use crate::stats::mean_stderr;

/// A Monte Carlo price with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

impl PriceEstimate {
    fn from_samples(samples: &[f64]) -> Self {
        let (value, stderr) = mean_stderr(samples);
        Self { value, stderr, n_paths: samples.len() }
    }

    /// A deterministic value (quadrature, closed form).
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, n_paths: 0 }
    }
}

/// Single-tranche CDO terms: detachment points, premium dates, swap rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrancheSpec {
    pub x1: f64,
    pub x2: f64,
    pub dates: Vec<f64>,
    pub kappa: f64,
}

impl TrancheSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.x1 && self.x1 <= self.x2 && self.x2 <= 1.0) {
            return Err(Error::Usage(format!(
                "detachment points must satisfy 0 <= x1 <= x2 <= 1, got ({}, {})",
                self.x1, self.x2
            )));
        }
        if self.dates.len() < 2 {
            return Err(Error::Usage("tranche needs at least T0 and one payment date".into()));
        }
        if self.dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Usage("tranche dates must be strictly increasing".into()));
        }
        if !self.kappa.is_finite() {
            return Err(Error::Usage("kappa must be finite".into()));
        }
        Ok(())
    }

    /// Payment dates T1..Tn (T0 starts the protection window only).
    pub fn payment_dates(&self) -> &[f64] {
        &self.dates[1..]
    }
}

/// Tranche payout H(x) = (x2 − x)⁺ − (x1 − x)⁺: the outstanding notional
/// of the tranche (x1, x2] once the pool has lost x.
pub fn tranche_payout(x: f64, x1: f64, x2: f64) -> f64 {
    (x2 - x).max(0.0) - (x1 - x).max(0.0)
}

/// Pre-default bond price P(t, T, η) read off a path state: the default
/// indicator times exp of minus the trapezoid integral of the surface's
/// η-slice over [0, T − t].
pub fn bond_price(state: &PathState, maturity: f64, eta: f64) -> Result<f64> {
    let g = state.surface.grid();
    if maturity < state.t - 1e-12 {
        return Err(Error::Usage(format!(
            "maturity {maturity} is before the valuation time {}",
            state.t
        )));
    }
    let steps = g.lattice_steps((maturity - state.t).max(0.0))?;
    let k = g.eta_index(eta)?;
    if state.loss.level > eta {
        return Ok(0.0);
    }
    Ok((-slice_integral(&state.surface, steps, k)).exp())
}

/// Trapezoid ∫₀^{m·Δξ} h(ξ, η_k) dξ.
pub(crate) fn slice_integral(surface: &HbSurface, m: usize, k: usize) -> f64 {
    let g = surface.grid();
    let ep = g.eta_points();
    let v = surface.values();
    let mut acc = 0.0;
    for i in 0..m {
        acc += v[i * ep + k] + v[(i + 1) * ep + k];
    }
    0.5 * g.dx() * acc
}

/// Outcome of the discounted-bond martingale test against the t = 0
/// price. The pass budget is 3 standard errors plus a scheme-bias
/// allowance proportional to the time step; both lines are reported.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MartingaleTestReport {
    pub maturity: f64,
    pub eta: f64,
    pub estimate: PriceEstimate,
    pub reference: f64,
    pub mc_budget: f64,
    pub bias_budget: f64,
    pub z_score: f64,
    pub pass: bool,
}

/// Monte Carlo mean of D_T·1{L_T ≤ η} against the initial bond price
/// P(0, T, η). Under the no-arbitrage drift the two agree within the
/// estimator noise; with a mis-set drift they separate.
pub fn martingale_test(
    ensemble: &SimulationEnsemble,
    maturity: f64,
    eta: f64,
    bias_coeff: f64,
) -> Result<MartingaleTestReport> {
    ensemble.require_complete()?;
    let snap = ensemble.snapshot_index(maturity)?;
    ensemble.grid.eta_index(eta)?;
    let samples: Vec<f64> = ensemble
        .completed()
        .map(|p| {
            let s = &p.snapshots[snap];
            if s.loss_level <= eta {
                s.log_discount.exp()
            } else {
                0.0
            }
        })
        .collect();
    let estimate = PriceEstimate::from_samples(&samples);
    let reference = bond_price(
        &PathState::initial(ensemble.initial_surface.clone()),
        maturity,
        eta,
    )?;
    let mc_budget = 3.0 * estimate.stderr;
    let bias_budget = bias_coeff * ensemble.grid.dx();
    let err = (estimate.value - reference).abs();
    let z_score = if estimate.stderr > 0.0 {
        (estimate.value - reference) / estimate.stderr
    } else if err == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(MartingaleTestReport {
        maturity,
        eta,
        estimate,
        reference,
        mc_budget,
        bias_budget,
        z_score,
        pass: err <= mc_budget + bias_budget,
    })
}

/// The two legs and the net value of a single-tranche CDO on a simulated
/// ensemble: the investor receives κ·H(L_{T_i}) at the payment dates and
/// pays H(L_{t-}) − H(L_t) at every loss event in (T0, Tn].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StcdoValuation {
    pub premium_leg: PriceEstimate,
    pub protection_leg: PriceEstimate,
    pub value: PriceEstimate,
}

pub fn stcdo_value(ensemble: &SimulationEnsemble, tranche: &TrancheSpec) -> Result<StcdoValuation> {
    tranche.validate()?;
    ensemble.require_complete()?;
    let pay_snaps: Vec<usize> = tranche
        .payment_dates()
        .iter()
        .map(|t| ensemble.snapshot_index(*t))
        .collect::<Result<_>>()?;
    let (t0, tn) = (tranche.dates[0], *tranche.dates.last().expect("validated"));

    let n = ensemble.completed().count();
    let mut premium = Vec::with_capacity(n);
    let mut protection = Vec::with_capacity(n);
    let mut net = Vec::with_capacity(n);
    for p in ensemble.completed() {
        let mut prem = 0.0;
        for snap in &pay_snaps {
            let s = &p.snapshots[*snap];
            prem += s.log_discount.exp() * tranche.kappa * tranche_payout(s.loss_level, tranche.x1, tranche.x2);
        }
        let mut prot = 0.0;
        for ev in &p.events {
            if ev.kind == JumpKind::Loss && ev.time > t0 && ev.time <= tn {
                let dh = tranche_payout(ev.loss_before, tranche.x1, tranche.x2)
                    - tranche_payout(ev.loss_after, tranche.x1, tranche.x2);
                prot += ev.log_discount.exp() * dh;
            }
        }
        premium.push(prem);
        protection.push(prot);
        net.push(prem - prot);
    }
    Ok(StcdoValuation {
        premium_leg: PriceEstimate::from_samples(&premium),
        protection_leg: PriceEstimate::from_samples(&protection),
        value: PriceEstimate::from_samples(&net),
    })
}

/// Premium leg priced without simulation, through the bond representation
/// E[D_T H(L_T)] = ∫_{(x1, x2]} P(0, T, y) dy (the payout is an integral
/// of quality indicators, and each discounted indicator is priced by its
/// bond). Trapezoid over the η grid clipped to the tranche.
pub fn stcdo_premium_by_bonds(initial_surface: &HbSurface, tranche: &TrancheSpec) -> Result<PriceEstimate> {
    tranche.validate()?;
    let g = initial_surface.grid();
    let mut total = 0.0;
    for t in tranche.payment_dates() {
        let steps = g.lattice_steps(*t)?;
        let price_at = |k: usize| (-slice_integral(initial_surface, steps, k)).exp();
        total += tranche.kappa * clipped_trapezoid(g.n_eta, price_at, tranche.x1, tranche.x2);
    }
    Ok(PriceEstimate::exact(total))
}

/// ∫_{(a, b]} f(y) dy for a nodal function on the η grid (nodes k/n),
/// values linear between nodes, with exact endpoint clipping.
fn clipped_trapezoid(n_eta: usize, node: impl Fn(usize) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let d = 1.0 / n_eta as f64;
    let val = |y: f64| -> f64 {
        let pos = (y * n_eta as f64).clamp(0.0, n_eta as f64);
        let k = (pos.floor() as usize).min(n_eta - 1);
        let w = pos - k as f64;
        node(k) * (1.0 - w) + node(k + 1) * w
    };
    let mut acc = 0.0;
    let mut lo = a;
    // walk whole cells between the clipped ends
    let first_node = (a / d).ceil() as usize;
    let last_node = (b / d).floor() as usize;
    if first_node as f64 * d > b {
        return 0.5 * (b - a) * (val(a) + val(b));
    }
    if (first_node as f64 * d) > lo {
        acc += 0.5 * (first_node as f64 * d - lo) * (val(lo) + node(first_node.min(n_eta)));
        lo = first_node as f64 * d;
    }
    let mut k = first_node;
    while (k + 1) <= last_node && (k + 1) <= n_eta {
        acc += 0.5 * d * (node(k) + node(k + 1));
        k += 1;
        lo = k as f64 * d;
    }
    if b > lo {
        acc += 0.5 * (b - lo) * (val(lo) + val(b));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::LossState;
    use crate::function_space::SurfaceGrid;
    use approx::assert_abs_diff_eq;

    fn grid() -> SurfaceGrid {
        SurfaceGrid::new(5.0, 130, 20, 0.5, 1.0).unwrap()
    }

    #[test]
    fn tranche_payout_matches_hand_values() {
        assert_abs_diff_eq!(tranche_payout(0.0, 0.3, 0.7), 0.4, epsilon = 1e-15);
        assert_eq!(tranche_payout(1.0, 0.3, 0.7), 0.0);
        assert_eq!(tranche_payout(0.5, 0.3, 0.3), 0.0);
        assert_abs_diff_eq!(tranche_payout(0.5, 0.3, 0.7), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn post_default_bond_is_worthless() {
        let g = grid();
        let mut state = PathState::initial(HbSurface::constant(g, 0.05).unwrap());
        state.loss = LossState::at_level(0.6).unwrap();
        assert_eq!(bond_price(&state, 2.0, 0.5).unwrap(), 0.0);
        assert!(bond_price(&state, 2.0, 0.6).unwrap() > 0.0);
    }

    #[test]
    fn zero_rate_bond_is_par() {
        let g = grid();
        let state = PathState::initial(HbSurface::zeros(g));
        assert_eq!(bond_price(&state, 3.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn flat_rate_bond_is_exact_exponential() {
        let g = grid();
        let c = 0.04;
        let state = PathState::initial(HbSurface::constant(g, c).unwrap());
        for t in [1.0, 2.0, 5.0] {
            // trapezoid is exact on constants
            assert_abs_diff_eq!(
                bond_price(&state, t, 0.5).unwrap(),
                (-c * t).exp(),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn maturity_before_valuation_is_rejected() {
        let g = grid();
        let mut state = PathState::initial(HbSurface::zeros(g));
        state.t = 1.0;
        assert!(matches!(bond_price(&state, 0.5, 1.0), Err(Error::Usage(_))));
    }

    #[test]
    fn clipped_trapezoid_handles_whole_and_partial_cells() {
        // f(y) = y on a 10-node grid: ∫_a^b y dy = (b² − a²)/2 exactly
        // (piecewise-linear integrand, trapezoid exact).
        let f = |k: usize| k as f64 / 10.0;
        for (a, b) in [(0.0, 1.0), (0.3, 0.7), (0.25, 0.65), (0.3, 0.3)] {
            let exact = 0.5 * (b * b - a * a);
            assert_abs_diff_eq!(clipped_trapezoid(10, f, a, b), exact, epsilon = 1e-14);
        }
    }

    #[test]
    fn by_bonds_premium_converges_at_second_order_in_eta() {
        let tranche = TrancheSpec { x1: 0.25, x2: 0.68, dates: vec![0.0, 1.0, 2.0], kappa: 1.0 };
        let premium = |n_eta: usize| {
            let g = SurfaceGrid::new(2.0, 52, n_eta, 0.5, 1.0).unwrap();
            let h = HbSurface::from_fn(g, |_, eta| 0.02 + 0.2 * (1.0 - eta) * (1.0 - eta)).unwrap();
            stcdo_premium_by_bonds(&h, &tranche).unwrap().value
        };
        let reference = premium(1600);
        let e1 = (premium(25) - reference).abs();
        let e2 = (premium(50) - reference).abs();
        let order = (e1 / e2).log2();
        assert!(order >= 1.8, "observed order {order} ({e1:.2e} -> {e2:.2e})");
    }

    #[test]
    fn degenerate_tranche_prices_to_zero_by_bonds() {
        let g = grid();
        let h = HbSurface::from_fn(g, |_, eta| 0.02 + 0.2 * (1.0 - eta)).unwrap();
        let tranche = TrancheSpec { x1: 0.4, x2: 0.4, dates: vec![0.0, 1.0, 2.0], kappa: 0.05 };
        assert_eq!(stcdo_premium_by_bonds(&h, &tranche).unwrap().value, 0.0);
    }
}
