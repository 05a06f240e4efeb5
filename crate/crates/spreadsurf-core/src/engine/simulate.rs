use crate::engine::config::{BondProbe, ModelConfig, ModelMode};
use crate::engine::stepper::{EventRecord, PathState, Stepper};
use crate::error::{Error, Result};
use crate::function_space::{HbSurface, SurfaceGrid};
use crate::mpp::{
    loss_events_in_window, market_jump_times, wiener_increments, JumpEvent, RngStream, StreamLabel,
};
use crate::pricing::bond_price;

/// One recorded state of one path at a requested output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub loss_level: f64,
    pub log_discount: f64,
    /// Bond prices for the configured probes; NaN once t exceeds the
    /// probe's maturity.
    pub probe_prices: Vec<f64>,
    /// Per-η survival accumulators −∫₀^t r_s(0, η_k) ds (mortality runs).
    pub log_survival: Option<Vec<f64>>,
    pub surface: Option<HbSurface>,
}

impl Snapshot {
    pub fn discount(&self) -> f64 {
        self.log_discount.exp()
    }
}

/// A completed path: snapshots in output-time order, the jump event log,
/// and running diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<EventRecord>,
    pub min_surface: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathFailure {
    pub path: usize,
    pub time: f64,
    pub reason: String,
}

/// All paths of one simulation run. Failed paths are reported, not
/// silently dropped; pricing refuses ensembles with failures.
#[derive(Debug, Clone)]
pub struct SimulationEnsemble {
    pub grid: SurfaceGrid,
    pub seed: u64,
    pub initial_surface: HbSurface,
    pub output_times: Vec<f64>,
    pub probes: Vec<BondProbe>,
    pub paths: Vec<Option<PathRecord>>,
    pub failures: Vec<PathFailure>,
}

impl SimulationEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn completed(&self) -> impl Iterator<Item = &PathRecord> {
        self.paths.iter().filter_map(|p| p.as_ref())
    }

    pub fn require_complete(&self) -> Result<()> {
        if let Some(f) = self.failures.first() {
            return Err(Error::Numerical(format!(
                "{} of {} paths failed; first failure: path {} at t={:.6}: {}",
                self.failures.len(),
                self.n_paths(),
                f.path,
                f.time,
                f.reason
            )));
        }
        Ok(())
    }

    /// Index of an output time in the snapshot vectors.
    pub fn snapshot_index(&self, t: f64) -> Result<usize> {
        self.output_times
            .iter()
            .position(|s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or_else(|| Error::Usage(format!("{t} is not one of the run's output times")))
    }

    /// Index of a probe in the per-snapshot probe price vectors.
    pub fn probe_index(&self, maturity: f64, eta: f64) -> Result<usize> {
        self.probes
            .iter()
            .position(|p| (p.maturity - maturity).abs() <= 1e-9 && (p.eta - eta).abs() <= 1e-9)
            .ok_or_else(|| Error::Usage(format!("no probe at (maturity={maturity}, eta={eta})")))
    }

    /// Smallest surface value seen anywhere in the run (every step, every
    /// path, every grid point).
    pub fn min_surface_value(&self) -> f64 {
        self.completed()
            .map(|p| p.min_surface)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Runs the full ensemble. Path `p` draws from streams keyed by
/// (seed, p, label), so the result is bit-identical for any `threads`;
/// the worker split only changes who computes which path.
pub fn simulate(cfg: &ModelConfig, threads: usize) -> Result<SimulationEnsemble> {
    cfg.validate()?;
    let initial = cfg.initial()?;
    let stepper = Stepper::new(cfg)?;
    let output_steps: Vec<usize> = cfg
        .output_times
        .iter()
        .map(|t| cfg.grid.lattice_steps(*t).expect("validated output time"))
        .collect();

    let n = cfg.n_paths;
    let mut slots: Vec<Option<std::result::Result<PathRecord, PathFailure>>> = Vec::new();
    slots.resize_with(n, || None);

    let workers = threads.max(1).min(n);
    if workers == 1 {
        for (p, slot) in slots.iter_mut().enumerate() {
            *slot = Some(run_path(cfg, &stepper, &initial, &output_steps, p));
        }
    } else {
        let results: Vec<Vec<(usize, std::result::Result<PathRecord, PathFailure>)>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| {
                        let stepper = &stepper;
                        let initial = &initial;
                        let output_steps = &output_steps;
                        scope.spawn(move || {
                            (w..n)
                                .step_by(workers)
                                .map(|p| (p, run_path(cfg, stepper, initial, output_steps, p)))
                                .collect()
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            });
        for chunk in results {
            for (p, r) in chunk {
                slots[p] = Some(r);
            }
        }
    }

    let mut paths = Vec::with_capacity(n);
    let mut failures = Vec::new();
    for (p, slot) in slots.into_iter().enumerate() {
        match slot.expect("every path ran") {
            Ok(rec) => paths.push(Some(rec)),
            Err(mut f) => {
                f.path = p;
                failures.push(f);
                paths.push(None);
            }
        }
    }
    Ok(SimulationEnsemble {
        grid: cfg.grid,
        seed: cfg.seed,
        initial_surface: initial,
        output_times: cfg.output_times.clone(),
        probes: cfg.probes.clone(),
        paths,
        failures,
    })
}

fn run_path(
    cfg: &ModelConfig,
    stepper: &Stepper,
    initial: &HbSurface,
    output_steps: &[usize],
    p: usize,
) -> std::result::Result<PathRecord, PathFailure> {
    let fail = |time: f64, e: Error| PathFailure { path: p, time, reason: e.to_string() };

    let mut rng_w = RngStream::new(cfg.seed, p as u64, StreamLabel::Wiener).rng();
    let mut rng_l = RngStream::new(cfg.seed, p as u64, StreamLabel::LossJumps).rng();
    let mut rng_m = RngStream::new(cfg.seed, p as u64, StreamLabel::MarketJumps).rng();

    let market = market_jump_times(&cfg.market_jumps, cfg.horizon, &mut rng_m);
    let mut market_cursor = 0usize;

    let dt = cfg.grid.dx();
    let n_steps = cfg.n_steps();
    let mut state = PathState::initial(initial.clone());
    let mut min_surface = initial.min_value();
    let mut snapshots = Vec::with_capacity(output_steps.len());
    let mut events = Vec::new();

    if output_steps.first() == Some(&0) {
        snapshots.push(take_snapshot(cfg, &state));
    }

    for step in 0..n_steps {
        let t0 = state.t;
        let t1 = t0 + dt;

        let mut window: Vec<JumpEvent> = Vec::new();
        while market_cursor < market.len() && market[market_cursor].time <= t1 + 1e-12 {
            if market[market_cursor].time > t0 {
                window.push(market[market_cursor]);
            }
            market_cursor += 1;
        }
        if cfg.mode == ModelMode::Credit {
            let loss_events =
                loss_events_in_window(&state.surface, &state.loss, cfg.rate_bound, t0, t1, &mut rng_l)
                    .map_err(|e| fail(t0, e))?;
            window.extend(loss_events);
        }
        window.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite event times"));

        let dw = wiener_increments(&cfg.volatility, dt, &mut rng_w);
        let (next, recs, step_min) = stepper
            .step_core(&state, dt, &window, &dw)
            .map_err(|e| fail(t1, e))?;
        min_surface = min_surface.min(step_min);
        events.extend(recs);
        state = next;

        if output_steps.contains(&(step + 1)) {
            snapshots.push(take_snapshot(cfg, &state));
        }
    }

    Ok(PathRecord {
        snapshots,
        events,
        min_surface,
        final_loss: state.loss.level,
    })
}

fn take_snapshot(cfg: &ModelConfig, state: &PathState) -> Snapshot {
    let probe_prices = cfg
        .probes
        .iter()
        .map(|p| {
            if p.maturity >= state.t - 1e-12 {
                bond_price(state, p.maturity, p.eta).unwrap_or(f64::NAN)
            } else {
                f64::NAN
            }
        })
        .collect();
    Snapshot {
        t: state.t,
        loss_level: state.loss.level,
        log_discount: state.log_discount,
        probe_prices,
        log_survival: state.log_survival.clone(),
        surface: cfg.store_surfaces.then(|| state.surface.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoeffFamily, FactorVolatility, LossJumpSpec, MarketJumpSpec};
    use crate::engine::config::{DriftMode, InitialSurfaceSpec};
    use approx::assert_abs_diff_eq;

    fn flat_config() -> ModelConfig {
        ModelConfig {
            grid: SurfaceGrid::new(2.0, 104, 20, 0.5, 1.0).unwrap(),
            volatility: FactorVolatility::none(),
            market_jumps: MarketJumpSpec::none(),
            loss_jumps: LossJumpSpec::none(),
            initial_surface: InitialSurfaceSpec::Flat { level: 0.03 },
            horizon: 1.0,
            n_paths: 4,
            seed: 7,
            rate_bound: 0.0,
            mode: ModelMode::Credit,
            drift: DriftMode::NoArbitrage,
            output_times: vec![0.5, 1.0],
            probes: vec![BondProbe { maturity: 1.0, eta: 1.0 }],
            store_surfaces: true,
        }
    }

    #[test]
    fn zero_coefficient_flat_model_is_constant_and_exactly_discounted() {
        let cfg = flat_config();
        let ens = simulate(&cfg, 1).unwrap();
        ens.require_complete().unwrap();
        for p in ens.completed() {
            for (j, s) in p.snapshots.iter().enumerate() {
                let t = cfg.output_times[j];
                let surf = s.surface.as_ref().unwrap();
                assert_eq!(surf.max_abs(), 0.03);
                assert_eq!(surf.min_value(), 0.03);
                // trapezoid on a constant short rate is exact
                assert_abs_diff_eq!(s.discount(), (-0.03 * t).exp(), epsilon = 1e-14);
                assert_eq!(s.loss_level, 0.0);
            }
            assert!(p.events.is_empty());
        }
    }

    #[test]
    fn same_seed_is_bit_identical_and_thread_count_invariant() {
        let mut cfg = flat_config();
        cfg.volatility = FactorVolatility::single(1.0, CoeffFamily::Constant { level: 0.015 });
        cfg.initial_surface = InitialSurfaceSpec::Separable {
            base_level: 0.02,
            base_bump: 0.01,
            base_decay: 0.5,
            spread_level: 0.15,
            spread_decay: 0.0,
            spread_power: 1,
        };
        cfg.rate_bound = 1.0;
        cfg.n_paths = 16;
        let a = simulate(&cfg, 1).unwrap();
        let b = simulate(&cfg, 1).unwrap();
        let c = simulate(&cfg, 4).unwrap();
        for (x, y) in a.paths.iter().zip(b.paths.iter()) {
            assert_eq!(x, y);
        }
        for (x, y) in a.paths.iter().zip(c.paths.iter()) {
            assert_eq!(x, y, "thread count changed the ensemble");
        }
    }

    #[test]
    fn deterministic_intensity_survival_matches_closed_form() {
        // Zero volatility, no jump feedback: the surface is transported
        // deterministically and the crossing indicator 1{L_t <= eta} has
        // the deterministic intensity lambda(t, eta) = r0(t, eta) - r0(t, 1).
        let mut cfg = flat_config();
        cfg.initial_surface = InitialSurfaceSpec::Separable {
            base_level: 0.02,
            base_bump: 0.0,
            base_decay: 0.0,
            spread_level: 0.25,
            spread_decay: 0.0,
            spread_power: 1,
        };
        cfg.horizon = 2.0;
        cfg.output_times = vec![2.0];
        cfg.probes = vec![];
        cfg.rate_bound = 1.0;
        cfg.n_paths = 10_000;
        cfg.store_surfaces = false;
        let ens = simulate(&cfg, 1).unwrap();
        ens.require_complete().unwrap();
        let eta: f64 = 0.7;
        let lambda: f64 = 0.25 * (1.0 - eta); // time-constant by construction
        let survival_exact = (-lambda * 2.0).exp();
        let samples: Vec<f64> = ens
            .completed()
            .map(|p| if p.snapshots[0].loss_level <= eta { 1.0 } else { 0.0 })
            .collect();
        let (mean, se) = crate::stats::mean_stderr(&samples);
        assert!(
            (mean - survival_exact).abs() <= 3.0 * se + 1e-3,
            "survival {mean:.4} vs {survival_exact:.4} (se {se:.4})"
        );
    }

    #[test]
    fn mortality_mode_survival_is_a_martingale_under_its_drift() {
        // The survival-surface drift condition (compensated jumps) makes
        // exp(−∫ r_s(0, η) ds) match the initial curve's survival factor
        // in expectation, per quality level.
        use crate::coefficients::{MarkPoint, MarketJumpSpec};
        let grid = SurfaceGrid::new(3.0, 156, 10, 0.5, 1.0).unwrap();
        let cfg = ModelConfig {
            grid,
            volatility: FactorVolatility::single(
                1.0,
                CoeffFamily::ExponentialDecay { scale: 0.004, rate: 1.0 },
            ),
            market_jumps: MarketJumpSpec::new(
                vec![MarkPoint { mark: 1.0, weight: 0.5 }],
                CoeffFamily::MarkScaled { scale: 0.006, rate: 1.5 },
            ),
            loss_jumps: LossJumpSpec::none(),
            initial_surface: InitialSurfaceSpec::Separable {
                base_level: 0.01,
                base_bump: 0.008,
                base_decay: 0.0,
                spread_level: 0.015,
                spread_decay: 0.2,
                spread_power: 1,
            },
            horizon: 2.0,
            n_paths: 4000,
            seed: 5,
            rate_bound: 0.0,
            mode: ModelMode::Mortality,
            drift: DriftMode::NoArbitrage,
            output_times: vec![2.0],
            probes: vec![],
            store_surfaces: false,
        };
        let ens = simulate(&cfg, 1).unwrap();
        ens.require_complete().unwrap();
        let initial = PathState::initial(ens.initial_surface.clone());
        for k in [0usize, 5, 10] {
            let eta = grid.eta(k);
            let reference = crate::pricing::bond_price(&initial, 2.0, eta).unwrap();
            let samples: Vec<f64> = ens
                .completed()
                .map(|p| p.snapshots[0].log_survival.as_ref().unwrap()[k].exp())
                .collect();
            let (mean, se) = crate::stats::mean_stderr(&samples);
            assert!(
                (mean - reference).abs() <= 3.0 * se + 0.05 * grid.dx(),
                "eta={eta}: survival {mean:.5} vs {reference:.5} (se {se:.1e})"
            );
        }
    }

    #[test]
    fn failures_are_reported_with_path_context() {
        let mut cfg = flat_config();
        // Positive intensity with a zero thinning bound is an invalid run.
        cfg.initial_surface = InitialSurfaceSpec::Separable {
            base_level: 0.02,
            base_bump: 0.0,
            base_decay: 0.0,
            spread_level: 0.2,
            spread_decay: 0.0,
            spread_power: 1,
        };
        cfg.rate_bound = 0.0;
        let ens = simulate(&cfg, 1).unwrap();
        assert_eq!(ens.failures.len(), cfg.n_paths);
        assert!(ens.require_complete().is_err());
        assert!(ens.failures[0].reason.contains("thinning bound"));
    }
}
