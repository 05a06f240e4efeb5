//! Checkers for the model's sufficient conditions: positivity
//! preservation of the coefficient registry, empirical positivity and
//! quality-monotonicity of simulated ensembles, and audits of the
//! standing assumptions behind the existence theory.

use serde::{Deserialize, Serialize};

use crate::calibration::fnv1a64;
use crate::coefficients::{FactorVolatility, LossJumpSpec, MarketJumpSpec};
use crate::engine::{ModelConfig, SimulationEnsemble};
use crate::error::{Error, Result};
use crate::function_space::{hb_norm, HbSurface, SurfaceGrid};
use crate::mpp::{RngStream, StreamLabel};
use crate::profiles::ToleranceProfile;
use crate::sampler::SurfaceSampler;

/// Cap on stored violations per report; the count of samples and the
/// pass flag are exact regardless.
const MAX_STORED_VIOLATIONS: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    /// Hash of the offending input, for reproduction.
    pub fingerprint: u64,
    pub location: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition_id: String,
    pub sample_count: usize,
    pub violations: Vec<Violation>,
    pub passed: bool,
}

impl ConditionReport {
    fn new(condition_id: &str, sample_count: usize, mut violations: Vec<Violation>) -> Self {
        violations.truncate(MAX_STORED_VIOLATIONS);
        let passed = violations.is_empty();
        Self { condition_id: condition_id.into(), sample_count, violations, passed }
    }
}

fn surface_fingerprint(h: &HbSurface) -> u64 {
    let bytes: Vec<u8> = h.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    fnv1a64(&bytes)
}

/// Checks the pointwise sufficient conditions for positivity
/// preservation on sampled non-negative surfaces with forced zeros:
///
/// * `cond-sigma`: every σʲ(h) vanishes where h vanishes,
/// * `inv-2`: h + γ(h, x) + δ(h, y) stays non-negative,
/// * `inv-3` / `inv-4`: γ and δ vanish where h vanishes.
///
/// Returns one report per condition.
pub fn check_positivity_conditions(
    grid: SurfaceGrid,
    vol: &FactorVolatility,
    mjump: &MarketJumpSpec,
    ljump: &LossJumpSpec,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<ConditionReport>> {
    let sampler = SurfaceSampler::new(grid);
    let mut rng = RngStream::new(seed, 0, StreamLabel::Wiener).rng();
    let zero_tol = 1e-12;

    let mut v_sigma = Vec::new();
    let mut v_inv2 = Vec::new();
    let mut v_gamma = Vec::new();
    let mut v_delta = Vec::new();

    // Loss sizes probed on the η lattice, like the drift quadrature.
    let delta_nodes: Vec<f64> = (0..grid.eta_points()).map(|m| grid.eta(m)).collect();

    for _ in 0..n_samples {
        let (h, zeros) = sampler.nonneg_with_zeros(&mut rng, 3);
        let fp = surface_fingerprint(&h);

        for j in 0..vol.n_factors() {
            let s = vol.sigma(&h, j)?;
            for (i, k) in &zeros {
                let v = s.at(*i, *k);
                if v.abs() > zero_tol {
                    v_sigma.push(Violation {
                        fingerprint: fp,
                        location: format!("factor {j} at (xi={}, eta={})", grid.xi(*i), grid.eta(*k)),
                        magnitude: v,
                    });
                }
            }
        }

        let gammas: Vec<(String, HbSurface)> = if mjump.is_empty() {
            vec![("no market jump".into(), HbSurface::zeros(grid))]
        } else {
            mjump
                .marks
                .iter()
                .map(|mp| Ok((format!("mark {}", mp.mark), mjump.gamma(&h, mp.mark)?)))
                .collect::<Result<_>>()?
        };
        let deltas: Vec<(String, HbSurface)> = if ljump.is_empty() {
            vec![("no loss jump".into(), HbSurface::zeros(grid))]
        } else {
            delta_nodes
                .iter()
                .map(|x| Ok((format!("size {x}"), ljump.delta(&h, *x)?)))
                .collect::<Result<_>>()?
        };

        for (gdesc, gsurf) in &gammas {
            if !mjump.is_empty() {
                for (i, k) in &zeros {
                    let v = gsurf.at(*i, *k);
                    if v.abs() > zero_tol {
                        v_gamma.push(Violation {
                            fingerprint: fp,
                            location: format!("{gdesc} at (xi={}, eta={})", grid.xi(*i), grid.eta(*k)),
                            magnitude: v,
                        });
                    }
                }
            }
            for (ddesc, dsurf) in &deltas {
                // pointwise minimum of h + gamma + delta
                let mut worst = f64::INFINITY;
                let mut at = (0usize, 0usize);
                for i in 0..grid.xi_points() {
                    for k in 0..grid.eta_points() {
                        let v = h.at(i, k) + gsurf.at(i, k) + dsurf.at(i, k);
                        if v < worst {
                            worst = v;
                            at = (i, k);
                        }
                    }
                }
                if worst < -zero_tol {
                    v_inv2.push(Violation {
                        fingerprint: fp,
                        location: format!(
                            "{gdesc}, {ddesc} at (xi={}, eta={})",
                            grid.xi(at.0),
                            grid.eta(at.1)
                        ),
                        magnitude: worst,
                    });
                }
            }
        }

        if !ljump.is_empty() {
            for (ddesc, dsurf) in &deltas {
                for (i, k) in &zeros {
                    let v = dsurf.at(*i, *k);
                    if v.abs() > zero_tol {
                        v_delta.push(Violation {
                            fingerprint: fp,
                            location: format!("{ddesc} at (xi={}, eta={})", grid.xi(*i), grid.eta(*k)),
                            magnitude: v,
                        });
                    }
                }
            }
        }
    }

    Ok(vec![
        ConditionReport::new("cond-sigma", n_samples, v_sigma),
        ConditionReport::new("inv-2", n_samples, v_inv2),
        ConditionReport::new("inv-3", n_samples, v_gamma),
        ConditionReport::new("inv-4", n_samples, v_delta),
    ])
}

/// Smallest surface value over every path, step and grid point of an
/// ensemble, with the pass threshold −ε_grid (a discretization
/// allowance relative to the initial surface's sup).
pub fn empirical_positivity(
    ensemble: &SimulationEnsemble,
    profile: &ToleranceProfile,
) -> (f64, ConditionReport) {
    let eps = profile.positivity_eps_rel * ensemble.initial_surface.max_abs();
    let mut violations = Vec::new();
    for (p, rec) in ensemble.paths.iter().enumerate() {
        if let Some(rec) = rec {
            if rec.min_surface < -eps {
                violations.push(Violation {
                    fingerprint: p as u64,
                    location: format!("path {p}"),
                    magnitude: rec.min_surface,
                });
            }
        }
    }
    let min = ensemble.min_surface_value();
    (
        min,
        ConditionReport::new("empirical-positivity", ensemble.n_paths(), violations),
    )
}

/// Counts pathwise violations of P(t, T, η₁) ≤ P(t, T, η₂) + tol at every
/// snapshot, for η₁ ≤ η₂. Prices are read from the ensemble's bond
/// probes, so the run must have probed (T, η) for every η in the pairs.
pub fn check_monotonicity(
    ensemble: &SimulationEnsemble,
    maturity: f64,
    eta_pairs: &[(f64, f64)],
    profile: &ToleranceProfile,
) -> Result<ConditionReport> {
    ensemble.require_complete()?;
    let tol = profile.monotonicity_tol;
    let mut probe_idx = Vec::with_capacity(eta_pairs.len());
    for (lo, hi) in eta_pairs {
        if lo > hi {
            return Err(Error::Usage(format!("eta pair ({lo}, {hi}) is not ordered")));
        }
        probe_idx.push((
            ensemble.probe_index(maturity, *lo)?,
            ensemble.probe_index(maturity, *hi)?,
        ));
    }
    let mut violations = Vec::new();
    let mut checks = 0usize;
    for (p, rec) in ensemble.completed().enumerate() {
        for (s, snap) in rec.snapshots.iter().enumerate() {
            if snap.t > maturity + 1e-12 {
                continue;
            }
            for ((ilo, ihi), (lo, hi)) in probe_idx.iter().zip(eta_pairs) {
                let (plo, phi) = (snap.probe_prices[*ilo], snap.probe_prices[*ihi]);
                if plo.is_nan() || phi.is_nan() {
                    continue;
                }
                checks += 1;
                if plo > phi + tol {
                    violations.push(Violation {
                        fingerprint: p as u64,
                        location: format!("path {p}, snapshot {s}, etas ({lo}, {hi})"),
                        magnitude: plo - phi,
                    });
                }
            }
        }
    }
    Ok(ConditionReport::new("monotonicity", checks, violations))
}

/// Audits the standing assumptions that are decidable on the grid:
/// declared factor bounds against sampled sups, square-summability of
/// the factor constants, jump-measure finiteness, tail decay of the
/// coefficient surfaces at the horizon, and the (automatically finite)
/// discrete integrability conditions.
pub fn audit_assumptions(
    cfg: &ModelConfig,
    n_samples: usize,
    seed: u64,
    profile: &ToleranceProfile,
) -> Result<Vec<ConditionReport>> {
    let grid = cfg.grid;
    let sampler = SurfaceSampler::new(grid);
    let mut rng = RngStream::new(seed, 0, StreamLabel::Wiener).rng();
    let mut reports = Vec::new();

    let sigma_bounds = cfg.volatility.declared_constants(&grid);
    let sum_sq: f64 = sigma_bounds.iter().map(|c| c * c).sum();
    reports.push(ConditionReport::new(
        "factor-bounds-square-summable (finite factor list)",
        1,
        if sum_sq.is_finite() {
            vec![]
        } else {
            vec![Violation { fingerprint: 0, location: "sum of squared factor bounds".into(), magnitude: sum_sq }]
        },
    ));

    let gamma_bound = cfg.market_jumps.declared_bound(&grid);
    let delta_bound = cfg.loss_jumps.declared_bound(&grid);
    let mut v_sigma = Vec::new();
    let mut v_gamma = Vec::new();
    let mut v_delta = Vec::new();
    let mut v_tail = Vec::new();
    for _ in 0..n_samples {
        let h = sampler.smooth(&mut rng, 1.0);
        let fp = surface_fingerprint(&h);
        for (j, bound) in sigma_bounds.iter().enumerate() {
            let s = cfg.volatility.sigma(&h, j)?;
            let n = hb_norm(&s, grid.beta_prime)?.total;
            if n > bound * (1.0 + 1e-9) {
                v_sigma.push(Violation {
                    fingerprint: fp,
                    location: format!("factor {j}: sampled norm {n:.4} > declared {bound:.4}"),
                    magnitude: n - bound,
                });
            }
            let tail = s.at(grid.n_xi, 0).abs();
            if tail > profile.tail_rel_tol * s.max_abs().max(1e-300) * (1.0 + 1e-12) {
                v_tail.push(Violation {
                    fingerprint: fp,
                    location: format!("factor {j} tail at xi_max"),
                    magnitude: tail,
                });
            }
        }
        for mp in &cfg.market_jumps.marks {
            let s = cfg.market_jumps.gamma(&h, mp.mark)?;
            let n = hb_norm(&s, grid.beta_prime)?.total;
            if n > gamma_bound * (1.0 + 1e-9) {
                v_gamma.push(Violation {
                    fingerprint: fp,
                    location: format!("gamma at mark {}: sampled norm {n:.4} > declared {gamma_bound:.4}", mp.mark),
                    magnitude: n - gamma_bound,
                });
            }
        }
        if !cfg.loss_jumps.is_empty() {
            for m in [0usize, grid.n_eta / 2, grid.n_eta] {
                let x = grid.eta(m);
                let s = cfg.loss_jumps.delta(&h, x)?;
                let n = hb_norm(&s, grid.beta_prime)?.total;
                if n > delta_bound * (1.0 + 1e-9) {
                    v_delta.push(Violation {
                        fingerprint: fp,
                        location: format!("delta at size {x}: sampled norm {n:.4} > declared {delta_bound:.4}"),
                        magnitude: n - delta_bound,
                    });
                }
            }
        }
    }
    reports.push(ConditionReport::new("factor-norm-bounds (sampled sup)", n_samples, v_sigma));
    reports.push(ConditionReport::new("market-jump-norm-bound (sampled sup)", n_samples, v_gamma));
    reports.push(ConditionReport::new("loss-jump-norm-bound (sampled sup)", n_samples, v_delta));
    reports.push(ConditionReport::new("coefficient-tail-decay (probed)", n_samples, v_tail));

    let mass = cfg.market_jumps.total_mass();
    reports.push(ConditionReport::new(
        "jump-measure-finite",
        1,
        if mass.is_finite() && mass >= 0.0 {
            vec![]
        } else {
            vec![Violation { fingerprint: 0, location: "market jump total mass".into(), magnitude: mass }]
        },
    ));

    reports.push(ConditionReport::new(
        "local-integrability (satisfied by discretization)",
        0,
        vec![],
    ));

    // Directional-difference probe of h ↦ Σ_j Dσʲ(h)σʲ(h): a Lipschitz
    // ratio sweep. Probed, not certified; only blow-ups count as
    // violations.
    let mut v_lip = Vec::new();
    if cfg.volatility.n_factors() > 0 {
        let mut prev: Option<(HbSurface, HbSurface)> = None;
        for _ in 0..n_samples.min(64) {
            let h = sampler.smooth(&mut rng, 1.0);
            let f = dsigma_sigma(&cfg.volatility, &h)?;
            if let Some((h0, f0)) = &prev {
                let dh = hb_norm(&h.sub(h0)?, grid.beta)?.total;
                if dh > 1e-9 {
                    let df = hb_norm(&f.sub(f0)?, grid.beta)?.total;
                    let ratio = df / dh;
                    if !ratio.is_finite() || ratio > 1e8 {
                        v_lip.push(Violation {
                            fingerprint: surface_fingerprint(&h),
                            location: "directional-difference ratio".into(),
                            magnitude: ratio,
                        });
                    }
                }
            }
            prev = Some((h, f));
        }
    }
    reports.push(ConditionReport::new(
        "sigma-dsigma-lipschitz (probed, not verified)",
        n_samples.min(64),
        v_lip,
    ));

    Ok(reports)
}

/// Finite-difference Σ_j Dσʲ(h)[σʲ(h)] used by the Lipschitz probe.
fn dsigma_sigma(vol: &FactorVolatility, h: &HbSurface) -> Result<HbSurface> {
    let eps = 1e-5;
    let mut out = HbSurface::zeros(*h.grid());
    for j in 0..vol.n_factors() {
        let s = vol.sigma(h, j)?;
        let bumped = vol.sigma(&h.axpy(eps, &s)?, j)?;
        out = out.add(&bumped.sub(&s)?.scale(1.0 / eps))?;
    }
    Ok(out)
}
