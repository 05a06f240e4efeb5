use crate::coefficients::{
    diffusion_and_market_drift, drift_alpha, loss_drift_from_kernel, loss_intensity,
    loss_kernel_nodes, market_jump_compensator, mortality_drift, LossState,
};
use crate::engine::config::{DriftMode, ModelConfig, ModelMode};
use crate::error::{Error, Result};
use crate::function_space::HbSurface;
use crate::mpp::{JumpEvent, JumpKind};

/// One path's running state: time, surface, loss level and accumulated
/// log discount −∫₀^t r_s(0,1) ds (trapezoid). Survival-mode runs also
/// carry −∫₀^t r_s(0, η_k) ds per η node: the survival surface discounts
/// each cohort at its own hazard, not at the risk-free short rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub t: f64,
    pub surface: HbSurface,
    pub loss: LossState,
    pub log_discount: f64,
    pub log_survival: Option<Vec<f64>>,
}

impl PathState {
    pub fn initial(surface: HbSurface) -> Self {
        Self {
            t: 0.0,
            surface,
            loss: LossState::initial(),
            log_discount: 0.0,
            log_survival: None,
        }
    }

    /// The risk-free short rate r_t(0, 1).
    #[inline]
    pub fn short_rate(&self) -> f64 {
        self.surface.at(0, self.surface.grid().n_eta)
    }

    pub fn discount(&self) -> f64 {
        self.log_discount.exp()
    }
}

/// Per-event bookkeeping produced while stepping, with the discount at
/// the event time accrued at the step's left-endpoint short rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub kind: JumpKind,
    pub mark: f64,
    pub loss_before: f64,
    pub loss_after: f64,
    pub log_discount: f64,
}

enum DriftCache {
    /// Drift surface is the same every step.
    Static(HbSurface),
    /// α¹ + α² and the loss kernel nodes are static; α³ is reassembled
    /// from the prevailing intensity each step.
    SemiStatic { base: HbSurface, kernel: Vec<HbSurface> },
    /// Fully state-dependent: recomputed from scratch.
    Dynamic,
}

/// The mild-solution splitting stepper:
///
///   r_{t+dt} = S_dt [ r_t + α(L_{t-}, r_t)·dt + Σ_j σʲ(r_t)·dWʲ ]
///              + Σ_market γ(·, x) + Σ_loss δ(·, x)
///
/// with the shift exact on the lattice (dt is locked to Δξ) and jump
/// coefficients evaluated at the pre-jump surface. State-independent
/// coefficient surfaces are precomputed once.
pub struct Stepper<'a> {
    cfg: &'a ModelConfig,
    drift_cache: DriftCache,
    sigma_cache: Option<Vec<HbSurface>>,
    gamma_cache: Option<Vec<HbSurface>>,
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &'a ModelConfig) -> Result<Self> {
        let grid = cfg.grid;
        let probe = HbSurface::zeros(grid);
        let static_vol = !cfg.volatility.state_dependent();
        let static_mkt = !cfg.market_jumps.state_dependent();
        let static_loss = !cfg.loss_jumps.state_dependent();

        let sigma_cache = if static_vol {
            let mut v = Vec::with_capacity(cfg.volatility.n_factors());
            for j in 0..cfg.volatility.n_factors() {
                v.push(cfg.volatility.sigma(&probe, j)?);
            }
            Some(v)
        } else {
            None
        };
        let gamma_cache = if static_mkt && !cfg.market_jumps.is_empty() {
            let mut v = Vec::with_capacity(cfg.market_jumps.marks.len());
            for mp in &cfg.market_jumps.marks {
                v.push(cfg.market_jumps.gamma(&probe, mp.mark)?);
            }
            Some(v)
        } else {
            None
        };

        let drift_cache = match cfg.drift {
            DriftMode::Zero => DriftCache::Static(HbSurface::zeros(grid)),
            DriftMode::NoArbitrage => match cfg.mode {
                ModelMode::Mortality => {
                    // The survival drift condition holds for compensated
                    // jumps; raw events are applied below, so the
                    // compensator is folded into the drift here.
                    if static_vol && static_mkt {
                        let alpha = mortality_drift(&probe, &cfg.volatility, &cfg.market_jumps)?
                            .sub(&market_jump_compensator(&probe, &cfg.market_jumps)?)?;
                        DriftCache::Static(alpha)
                    } else {
                        DriftCache::Dynamic
                    }
                }
                ModelMode::Credit => {
                    if static_vol && static_mkt && cfg.loss_jumps.is_empty() {
                        DriftCache::Static(diffusion_and_market_drift(
                            &probe,
                            &cfg.volatility,
                            &cfg.market_jumps,
                        )?)
                    } else if static_vol && static_mkt && static_loss {
                        DriftCache::SemiStatic {
                            base: diffusion_and_market_drift(&probe, &cfg.volatility, &cfg.market_jumps)?,
                            kernel: loss_kernel_nodes(&probe, &cfg.loss_jumps)?,
                        }
                    } else {
                        DriftCache::Dynamic
                    }
                }
            },
        };

        Ok(Self { cfg, drift_cache, sigma_cache, gamma_cache })
    }

    fn drift(&self, state: &PathState) -> Result<Option<HbSurface>> {
        match &self.drift_cache {
            DriftCache::Static(_) => Ok(None),
            DriftCache::SemiStatic { base, kernel } => {
                let intensity = loss_intensity(&state.surface, &state.loss)?;
                if intensity.total_rate > 0.0 {
                    Ok(Some(base.add(&loss_drift_from_kernel(kernel, &intensity, &state.loss))?))
                } else {
                    Ok(Some(base.clone()))
                }
            }
            DriftCache::Dynamic => match self.cfg.mode {
                ModelMode::Mortality => Ok(Some(
                    mortality_drift(&state.surface, &self.cfg.volatility, &self.cfg.market_jumps)?
                        .sub(&market_jump_compensator(&state.surface, &self.cfg.market_jumps)?)?,
                )),
                ModelMode::Credit => Ok(Some(drift_alpha(
                    &state.loss,
                    &state.surface,
                    &self.cfg.volatility,
                    &self.cfg.market_jumps,
                    &self.cfg.loss_jumps,
                )?)),
            },
        }
    }

    /// Advances one lattice step; `events` are the jump events in
    /// (t, t + dt], already ordered by time; `dw` the J Wiener
    /// increments for this step.
    pub fn step_mild(
        &self,
        state: &PathState,
        dt: f64,
        events: &[JumpEvent],
        dw: &[f64],
    ) -> Result<PathState> {
        Ok(self.step_core(state, dt, events, dw)?.0)
    }

    /// `step_mild` plus the per-event records and the surface minimum
    /// after the step.
    pub fn step_core(
        &self,
        state: &PathState,
        dt: f64,
        events: &[JumpEvent],
        dw: &[f64],
    ) -> Result<(PathState, Vec<EventRecord>, f64)> {
        let grid = self.cfg.grid;
        let dx = grid.dx();
        if (dt - dx).abs() > 1e-9 * dx {
            return Err(Error::Usage(format!(
                "step size {dt} must equal the xi step {dx}"
            )));
        }
        if dw.len() != self.cfg.volatility.n_factors() {
            return Err(Error::Usage(format!(
                "expected {} Wiener increments, got {}",
                self.cfg.volatility.n_factors(),
                dw.len()
            )));
        }

        let dynamic_drift = self.drift(state)?;
        let drift_values = match (&self.drift_cache, &dynamic_drift) {
            (DriftCache::Static(s), _) => s.values(),
            (_, Some(s)) => s.values(),
            _ => unreachable!("dynamic drift computed above"),
        };

        let dyn_sigmas: Vec<HbSurface> = if self.sigma_cache.is_none() {
            (0..self.cfg.volatility.n_factors())
                .map(|j| self.cfg.volatility.sigma(&state.surface, j))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let sigma_slices: Vec<&[f64]> = match &self.sigma_cache {
            Some(c) => c.iter().map(|s| s.values()).collect(),
            None => dyn_sigmas.iter().map(|s| s.values()).collect(),
        };

        // Reaction at the left endpoint, then exact transport, fused;
        // the kernel tracks min/max so no extra surface passes are
        // needed for diagnostics and the blow-up check.
        let mut out = vec![0.0; grid.len()];
        let (mut lo, mut hi) = fused_transport_step(
            state.surface.values(),
            drift_values,
            &sigma_slices,
            dw,
            dt,
            grid.eta_points(),
            grid.n_xi,
            &mut out,
        );
        let mut surface = HbSurface::from_values_unchecked(grid, out);

        // Jumps at their exact times, coefficients at the pre-jump surface.
        let left_short_rate = state.short_rate();
        let mut loss = state.loss;
        let mut records = Vec::with_capacity(events.len());
        for ev in events {
            debug_assert!(ev.time > state.t && ev.time <= state.t + dt + 1e-12);
            let log_discount_at = state.log_discount - (ev.time - state.t) * left_short_rate;
            match ev.kind {
                JumpKind::Market => {
                    let gam = match &self.gamma_cache {
                        Some(cache) => {
                            let idx = self
                                .cfg
                                .market_jumps
                                .marks
                                .iter()
                                .position(|mp| mp.mark == ev.mark)
                                .ok_or_else(|| {
                                    Error::Usage(format!("market event mark {} not in spec", ev.mark))
                                })?;
                            cache[idx].clone()
                        }
                        None => self.cfg.market_jumps.gamma(&surface, ev.mark)?,
                    };
                    surface = surface.add(&gam)?;
                    records.push(EventRecord {
                        time: ev.time,
                        kind: ev.kind,
                        mark: ev.mark,
                        loss_before: loss.level,
                        loss_after: loss.level,
                        log_discount: log_discount_at,
                    });
                }
                JumpKind::Loss => {
                    if self.cfg.mode == ModelMode::Mortality {
                        return Err(Error::Usage("loss events are not defined in mortality mode".into()));
                    }
                    let before = loss.level;
                    let size = ev.mark.min(1.0 - before);
                    if size <= 0.0 {
                        continue;
                    }
                    let delta = self.cfg.loss_jumps.delta(&surface, size)?;
                    surface = surface.add(&delta)?;
                    loss = LossState { level_pre: before, level: before + size };
                    records.push(EventRecord {
                        time: ev.time,
                        kind: ev.kind,
                        mark: size,
                        loss_before: before,
                        loss_after: loss.level,
                        log_discount: log_discount_at,
                    });
                }
            }
        }

        if !events.is_empty() {
            lo = surface.min_value();
            hi = surface.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        let min_value = lo;
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Numerical(format!(
                "surface blow-up at t={:.6}",
                state.t + dt
            )));
        }

        let new_short_rate = surface.at(0, grid.n_eta);
        let log_discount = state.log_discount - 0.5 * dt * (left_short_rate + new_short_rate);
        let log_survival = if self.cfg.mode == ModelMode::Mortality {
            let ep = grid.eta_points();
            let prev = state
                .log_survival
                .clone()
                .unwrap_or_else(|| vec![0.0; ep]);
            let old_row = &state.surface.values()[..ep];
            let new_row = &surface.values()[..ep];
            Some(
                prev.iter()
                    .zip(old_row.iter().zip(new_row))
                    .map(|(acc, (a, b))| acc - 0.5 * dt * (a + b))
                    .collect(),
            )
        } else {
            None
        };
        let settled = LossState { level: loss.level, level_pre: loss.level };
        Ok((
            PathState { t: state.t + dt, surface, loss: settled, log_discount, log_survival },
            records,
            min_value,
        ))
    }
}

/// out[i, k] = src[s, k] + dt·drift[s, k] + Σ_j dw_j·σ_j[s, k] with
/// s = min(i + 1, n_xi): the reaction update evaluated at the source row
/// of the exact one-step transport. Returns (min, max) of the output.
#[allow(clippy::too_many_arguments)]
fn fused_transport_step(
    src: &[f64],
    drift: &[f64],
    sigmas: &[&[f64]],
    dw: &[f64],
    dt: f64,
    ep: usize,
    n_xi: usize,
    out: &mut [f64],
) -> (f64, f64) {
    let shifted = ep; // one ξ row
    let len = (n_xi + 1) * ep;
    let interior = len - shifted;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    macro_rules! emit {
        ($i:expr, $v:expr) => {{
            let v = $v;
            lo = lo.min(v);
            hi = hi.max(v);
            out[$i] = v;
        }};
    }
    match sigmas.len() {
        0 => {
            for i in 0..interior {
                emit!(i, src[i + shifted] + dt * drift[i + shifted]);
            }
            for i in interior..len {
                emit!(i, src[i] + dt * drift[i]);
            }
        }
        1 => {
            let (s0, z0) = (sigmas[0], dw[0]);
            for i in 0..interior {
                emit!(i, src[i + shifted] + dt * drift[i + shifted] + z0 * s0[i + shifted]);
            }
            for i in interior..len {
                emit!(i, src[i] + dt * drift[i] + z0 * s0[i]);
            }
        }
        _ => {
            for i in 0..interior {
                let mut acc = src[i + shifted] + dt * drift[i + shifted];
                for (s, z) in sigmas.iter().zip(dw) {
                    acc += z * s[i + shifted];
                }
                emit!(i, acc);
            }
            for i in interior..len {
                let mut acc = src[i] + dt * drift[i];
                for (s, z) in sigmas.iter().zip(dw) {
                    acc += z * s[i];
                }
                emit!(i, acc);
            }
        }
    }
    (lo, hi)
}
