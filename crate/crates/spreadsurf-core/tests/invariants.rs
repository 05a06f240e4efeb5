//! Cross-module invariants that need simulation or sampling machinery:
//! the compensator identity of the simulated loss process, the strong
//! convergence of the stepper, pathwise price bounds, the loss-drift
//! norm bound, and negative controls for the validation checkers.

use rand::Rng;
use spreadsurf_core::{
    bond_price, check_monotonicity, check_positivity_conditions, coefficients, drift_alpha,
    empirical_positivity, hb_norm, simulate, BondProbe, CoeffFamily, DriftMode, FactorVolatility,
    HbSurface, InitialSurfaceSpec, JumpEvent, LossJumpSpec, LossState, MarkPoint, MarketJumpSpec,
    ModelConfig, ModelMode, PathState, RngStream, Stepper, StreamLabel, SurfaceGrid,
    SurfaceSampler, ToleranceProfile,
};

fn base_config(grid: SurfaceGrid) -> ModelConfig {
    ModelConfig {
        grid,
        volatility: FactorVolatility::none(),
        market_jumps: MarketJumpSpec::none(),
        loss_jumps: LossJumpSpec::none(),
        initial_surface: InitialSurfaceSpec::Flat { level: 0.03 },
        horizon: 1.0,
        n_paths: 100,
        seed: 77,
        rate_bound: 1.0,
        mode: ModelMode::Credit,
        drift: DriftMode::NoArbitrage,
        output_times: vec![],
        probes: vec![],
        store_surfaces: false,
    }
}

#[test]
fn compensator_identity_of_the_simulated_loss_process() {
    // For the simulated L and a fixed eta, 1{L_t <= eta} + int_0^t
    // 1{L_s <= eta} lambda(s, eta) ds has expectation one. With a
    // transported deterministic surface, lambda(s, eta) is explicit.
    let grid = SurfaceGrid::new(3.0, 78, 10, 0.5, 1.0).unwrap();
    let spread = 0.3f64;
    let mut cfg = base_config(grid);
    cfg.initial_surface = InitialSurfaceSpec::Separable {
        base_level: 0.02,
        base_bump: 0.0,
        base_decay: 0.0,
        spread_level: spread,
        spread_decay: 0.0,
        spread_power: 1,
    };
    cfg.horizon = 2.0;
    cfg.n_paths = 4000;
    cfg.output_times = vec![2.0];
    let ens = simulate(&cfg, 1).unwrap();
    ens.require_complete().unwrap();

    let t_end = 2.0;
    for eta in [0.4, 0.7] {
        let lambda = spread * (1.0 - eta); // constant in time here
        let stats: Vec<f64> = ens
            .completed()
            .map(|p| {
                // reconstruct the crossing time of eta from the event log
                let mut level = 0.0;
                let mut crossing = f64::INFINITY;
                for ev in &p.events {
                    level += ev.mark;
                    if level > eta {
                        crossing = ev.time;
                        break;
                    }
                }
                let indicator = if crossing > t_end { 1.0 } else { 0.0 };
                let integral = lambda * crossing.min(t_end);
                indicator + integral
            })
            .collect();
        let (mean, se) = spreadsurf_core::stats::mean_stderr(&stats);
        assert!(
            (mean - 1.0).abs() <= 3.0 * se + 1e-3,
            "eta={eta}: compensated indicator mean {mean:.4} (se {se:.4})"
        );
    }
}

#[test]
fn stepper_strong_convergence_is_at_least_order_point_four() {
    // Couple the Brownian paths across dt refinements (the coarse
    // increments are sums of the fine ones) and compare terminal
    // surfaces on the common lattice against the finest resolution.
    let n_eta = 8usize;
    let levels = [16usize, 32, 64, 128];
    let n_paths = 48usize;
    let make_cfg = |n_xi: usize| {
        let mut cfg = base_config(SurfaceGrid::new(1.0, n_xi, n_eta, 0.5, 1.0).unwrap());
        cfg.volatility =
            FactorVolatility::single(1.0, CoeffFamily::ProportionalCapped { scale: 0.4, cap: 0.6 });
        cfg.initial_surface = InitialSurfaceSpec::Separable {
            base_level: 0.03,
            base_bump: 0.02,
            base_decay: 0.8,
            spread_level: 0.2,
            spread_decay: 0.3,
            spread_power: 1,
        };
        cfg
    };
    let fine_cfg = make_cfg(*levels.last().unwrap());
    let fine_steps = *levels.last().unwrap();

    // per path: finest Brownian increments
    let mut errors = vec![0.0f64; levels.len() - 1];
    for p in 0..n_paths {
        let mut rng = RngStream::new(909, p as u64, StreamLabel::Wiener).rng();
        let dz: Vec<f64> = (0..fine_steps)
            .map(|_| (1.0 / fine_steps as f64).sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();

        let terminal = |n_xi: usize| -> HbSurface {
            let cfg = make_cfg(n_xi);
            let stepper = Stepper::new(&cfg).unwrap();
            let mut state = PathState::initial(cfg.initial().unwrap());
            let ratio = fine_steps / n_xi;
            let dt = cfg.grid.dx();
            for step in 0..n_xi {
                let dw: f64 = dz[step * ratio..(step + 1) * ratio].iter().sum();
                state = stepper.step_mild(&state, dt, &[], &[dw]).unwrap();
            }
            state.surface
        };

        let reference = terminal(fine_steps);
        for (li, n_xi) in levels[..levels.len() - 1].iter().enumerate() {
            let coarse = terminal(*n_xi);
            let stride = fine_steps / n_xi;
            let mut err = 0.0f64;
            for i in 0..=*n_xi {
                for k in 0..=n_eta {
                    err = err.max((coarse.at(i, k) - reference.at(i * stride, k)).abs());
                }
            }
            errors[li] += err / n_paths as f64;
        }
    }
    let o1 = (errors[0] / errors[1]).log2();
    let o2 = (errors[1] / errors[2]).log2();
    assert!(
        o1 >= 0.4 && o2 >= 0.4,
        "observed strong orders {o1:.2}, {o2:.2} (errors {errors:?})"
    );
    let _ = fine_cfg;
}

#[test]
fn pathwise_price_bounds_and_maturity_consistency() {
    let grid = SurfaceGrid::new(2.0, 52, 10, 0.5, 1.0).unwrap();
    let mut cfg = base_config(grid);
    cfg.volatility = FactorVolatility::single(1.0, CoeffFamily::ProportionalCapped { scale: 0.3, cap: 5.0 });
    cfg.initial_surface = InitialSurfaceSpec::Separable {
        base_level: 0.02,
        base_bump: 0.01,
        base_decay: 0.5,
        spread_level: 0.25,
        spread_decay: 0.0,
        spread_power: 1,
    };
    cfg.n_paths = 300;
    cfg.output_times = vec![0.5, 1.0];
    cfg.store_surfaces = true;
    let ens = simulate(&cfg, 1).unwrap();
    ens.require_complete().unwrap();
    for rec in ens.completed() {
        for snap in &rec.snapshots {
            let state = PathState {
                t: snap.t,
                surface: snap.surface.clone().unwrap(),
                loss: LossState::at_level(snap.loss_level).unwrap(),
                log_discount: snap.log_discount,
                log_survival: None,
            };
            for eta in [0.3, 0.7, 1.0] {
                // 0 <= D_t P(t, T, eta) <= 1 along the whole path
                let p = bond_price(&state, 1.0, eta).unwrap();
                let dp = snap.log_discount.exp() * p;
                assert!((0.0..=1.0 + 1e-12).contains(&dp), "discounted price {dp}");
                // P(T, T, eta) is exactly the survival indicator
                let at_maturity = bond_price(&state, snap.t, eta).unwrap();
                let indicator = if snap.loss_level <= eta { 1.0 } else { 0.0 };
                assert_eq!(at_maturity, indicator);
            }
        }
    }
}

#[test]
fn loss_drift_norm_bound_probe_is_finite_and_stable() {
    // ||alpha3(h)|| <= N_hat * max_x ||eps(h, x)|| * ||h|| with eps the
    // loss kernel; the empirical N_hat must exist and not drift when
    // the sample doubles.
    let grid = SurfaceGrid::new(2.0, 48, 10, 0.5, 1.0).unwrap();
    let ljump = LossJumpSpec::new(CoeffFamily::ExponentialDecay { scale: 0.05, rate: 0.8 });
    let none_v = FactorVolatility::none();
    let none_m = MarketJumpSpec::none();
    let sampler = SurfaceSampler::new(grid);
    let mut rng = RngStream::new(606, 0, StreamLabel::Wiener).rng();
    let loss = LossState::initial();

    let mut ratios = Vec::new();
    for _ in 0..600 {
        let h = sampler.spread(&mut rng);
        let alpha3 = drift_alpha(&loss, &h, &none_v, &none_m, &ljump).unwrap();
        let n_h = hb_norm(&h, grid.beta).unwrap().total;
        // max over the x lattice of ||delta e^{-I delta}||_beta
        let mut max_eps = 0.0f64;
        for m in 0..grid.eta_points() {
            let d = ljump.delta(&h, grid.eta(m)).unwrap();
            let eps = d.multiply(&d.integral_op().scale(-1.0).exp_surface().unwrap()).unwrap();
            max_eps = max_eps.max(hb_norm(&eps, grid.beta).unwrap().total);
        }
        let n_a = hb_norm(&alpha3, grid.beta).unwrap().total;
        if n_h > 1e-12 && max_eps > 1e-12 {
            ratios.push(n_a / (max_eps * n_h));
        }
    }
    let n_hat_half = ratios[..300].iter().fold(0.0f64, |m, r| m.max(*r));
    let n_hat_full = ratios.iter().fold(0.0f64, |m, r| m.max(*r));
    assert!(n_hat_full.is_finite() && n_hat_full > 0.0);
    assert!(
        (n_hat_full - n_hat_half) / n_hat_half < 0.10,
        "alpha3 bound constant unstable: {n_hat_half:.4} -> {n_hat_full:.4}"
    );
}

#[test]
fn zero_coefficient_flat_martingale_estimate_is_deterministic() {
    let grid = SurfaceGrid::new(2.0, 52, 10, 0.5, 1.0).unwrap();
    let mut cfg = base_config(grid);
    cfg.output_times = vec![1.0];
    cfg.n_paths = 16;
    let ens = simulate(&cfg, 1).unwrap();
    let r = spreadsurf_core::martingale_test(&ens, 1.0, 1.0, 0.05).unwrap();
    assert_eq!(r.estimate.stderr, 0.0);
    assert!((r.estimate.value - r.reference).abs() < 1e-14);
    assert!(r.pass);
}

#[test]
fn no_default_stcdo_has_zero_protection_and_closed_form_premium() {
    // Flat short end in eta: zero loss intensity, so the tranche never
    // erodes; the premium leg is kappa (x2 - x1) sum_i D_{T_i} exactly,
    // path by path.
    let grid = SurfaceGrid::new(2.0, 52, 10, 0.5, 1.0).unwrap();
    let mut cfg = base_config(grid);
    cfg.volatility = FactorVolatility::single(1.0, CoeffFamily::Constant { level: 0.02 });
    cfg.initial_surface = InitialSurfaceSpec::Separable {
        base_level: 0.03,
        base_bump: 0.01,
        base_decay: 0.6,
        spread_level: 0.0,
        spread_decay: 0.0,
        spread_power: 1,
    };
    cfg.n_paths = 500;
    cfg.horizon = 2.0;
    cfg.output_times = vec![0.5, 1.0, 1.5, 2.0];
    let ens = simulate(&cfg, 1).unwrap();
    ens.require_complete().unwrap();
    let tranche = spreadsurf_core::TrancheSpec {
        x1: 0.3,
        x2: 0.7,
        dates: vec![0.5, 1.0, 1.5, 2.0],
        kappa: 0.05,
    };
    let v = spreadsurf_core::stcdo_value(&ens, &tranche).unwrap();
    assert_eq!(v.protection_leg.value, 0.0);
    assert_eq!(v.protection_leg.stderr, 0.0);
    // payment dates are T1..Tn; T0 only opens the protection window
    let discount_sums: Vec<f64> = ens
        .completed()
        .map(|p| p.snapshots[1..].iter().map(|s| s.discount()).sum())
        .collect();
    let (mean_d, _) = spreadsurf_core::stats::mean_stderr(&discount_sums);
    let expect = 0.05 * 0.4 * mean_d;
    assert!(
        (v.premium_leg.value - expect).abs() < 1e-12,
        "{} vs {expect}",
        v.premium_leg.value
    );
}

#[test]
fn loss_paths_are_non_decreasing_and_capped() {
    let grid = SurfaceGrid::new(2.0, 52, 10, 0.5, 1.0).unwrap();
    let mut cfg = base_config(grid);
    cfg.initial_surface = InitialSurfaceSpec::Separable {
        base_level: 0.02,
        base_bump: 0.0,
        base_decay: 0.0,
        spread_level: 1.5, // busy loss process
        spread_decay: 0.0,
        spread_power: 1,
    };
    cfg.rate_bound = 2.0;
    cfg.n_paths = 300;
    cfg.horizon = 2.0;
    cfg.output_times = vec![0.5, 1.0, 1.5, 2.0];
    let ens = simulate(&cfg, 1).unwrap();
    ens.require_complete().unwrap();
    let mut saw_jump = false;
    for rec in ens.completed() {
        let mut level = 0.0;
        for ev in &rec.events {
            assert!(ev.mark > 0.0);
            assert!((ev.loss_before - level).abs() < 1e-12);
            assert!(ev.loss_after >= ev.loss_before);
            level = ev.loss_after;
            saw_jump = true;
        }
        assert!(level <= 1.0 + 1e-12);
        let mut prev = 0.0;
        for snap in &rec.snapshots {
            assert!(snap.loss_level >= prev - 1e-15);
            prev = snap.loss_level;
        }
        assert!((rec.final_loss - level).abs() < 1e-12);
    }
    assert!(saw_jump, "the busy config should produce loss jumps");
}

#[test]
fn negative_gamma_config_loses_positivity_empirically() {
    let grid = SurfaceGrid::new(2.0, 52, 10, 0.5, 1.0).unwrap();
    let mut cfg = base_config(grid);
    cfg.market_jumps = MarketJumpSpec::new(
        vec![MarkPoint { mark: 1.0, weight: 2.0 }],
        CoeffFamily::Constant { level: -0.05 },
    );
    cfg.initial_surface = InitialSurfaceSpec::Separable {
        base_level: 0.02,
        base_bump: 0.0,
        base_decay: 0.0,
        spread_level: 0.1,
        spread_decay: 0.0,
        spread_power: 1,
    };
    cfg.n_paths = 200;
    let ens = simulate(&cfg, 1).unwrap();
    ens.require_complete().unwrap();
    let (min, report) = empirical_positivity(&ens, &ToleranceProfile::default_profile());
    assert!(min < 0.0, "negative jumps should push the surface negative, min {min}");
    assert!(!report.passed);
    assert!(!report.violations.is_empty());
}

#[test]
fn monotonicity_checker_detects_an_increasing_quality_surface() {
    // A surface increasing in eta prices lower-quality bonds above
    // higher-quality ones; no-arbitrage alone does not rule this out,
    // and the checker must see it. The ensemble is built by hand: such
    // a curve cannot even feed the loss intensity.
    let grid = SurfaceGrid::new(2.0, 52, 10, 0.5, 1.0).unwrap();
    let increasing = HbSurface::from_fn(grid, |_, eta| 0.02 + 0.2 * eta).unwrap();
    let state = PathState::initial(increasing.clone());
    let probes = vec![
        BondProbe { maturity: 1.0, eta: 0.3 },
        BondProbe { maturity: 1.0, eta: 0.7 },
    ];
    let snapshot = spreadsurf_core::Snapshot {
        t: 0.0,
        loss_level: 0.0,
        log_discount: 0.0,
        probe_prices: probes
            .iter()
            .map(|p| bond_price(&state, p.maturity, p.eta).unwrap())
            .collect(),
        log_survival: None,
        surface: None,
    };
    let ens = spreadsurf_core::SimulationEnsemble {
        grid,
        seed: 0,
        initial_surface: increasing,
        output_times: vec![0.0],
        probes,
        paths: vec![Some(spreadsurf_core::PathRecord {
            snapshots: vec![snapshot],
            events: vec![],
            min_surface: 0.02,
            final_loss: 0.0,
        })],
        failures: vec![],
    };
    let report =
        check_monotonicity(&ens, 1.0, &[(0.3, 0.7)], &ToleranceProfile::default_profile()).unwrap();
    assert!(!report.passed, "increasing-in-eta surface must violate monotonicity");
    assert_eq!(report.violations.len(), 1);

    // An equal pair can never violate, even here.
    let same =
        check_monotonicity(&ens, 1.0, &[(0.3, 0.3)], &ToleranceProfile::default_profile()).unwrap();
    assert!(same.passed);
}

#[test]
fn positivity_checker_is_deterministic_given_the_seed() {
    let grid = SurfaceGrid::new(2.0, 40, 10, 0.5, 1.0).unwrap();
    let mjump = MarketJumpSpec::new(
        vec![MarkPoint { mark: 1.0, weight: 0.4 }],
        CoeffFamily::Constant { level: -0.03 },
    );
    let run = || {
        let reports = check_positivity_conditions(
            grid,
            &FactorVolatility::none(),
            &mjump,
            &LossJumpSpec::none(),
            60,
            1234,
        )
        .unwrap();
        serde_json::to_string(&reports).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn forced_market_event_applies_the_cached_coefficient() {
    // step_mild with an explicit event list exercises the public event
    // interface directly.
    let grid = SurfaceGrid::new(2.0, 52, 10, 0.5, 1.0).unwrap();
    let mut cfg = base_config(grid);
    cfg.market_jumps = MarketJumpSpec::new(
        vec![MarkPoint { mark: 2.0, weight: 0.4 }],
        CoeffFamily::MarkScaled { scale: 0.01, rate: 0.0 },
    );
    cfg.drift = DriftMode::Zero;
    let stepper = Stepper::new(&cfg).unwrap();
    let h = HbSurface::constant(grid, 0.05).unwrap();
    let state = PathState::initial(h.clone());
    let dt = grid.dx();
    let ev = JumpEvent { time: 0.3 * dt, kind: spreadsurf_core::JumpKind::Market, mark: 2.0 };
    let next = stepper.step_mild(&state, dt, &[ev], &[]).unwrap();
    // gamma = 0.01 * mark = 0.02 everywhere
    assert_eq!(next.surface, HbSurface::constant(grid, 0.07).unwrap());
    let _ = coefficients::loss_intensity(&next.surface, &next.loss).unwrap();
}
