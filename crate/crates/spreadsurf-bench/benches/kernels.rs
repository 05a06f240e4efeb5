use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use spreadsurf_core::{
    drift_alpha, hb_norm, simulate, wiener_increments, CoeffFamily, DriftMode, FactorVolatility,
    HbSurface, InitialSurfaceSpec, LossJumpSpec, LossState, MarkPoint, MarketJumpSpec, ModelConfig,
    ModelMode, PathState, RngStream, Stepper, StreamLabel, SurfaceGrid,
};

fn grid() -> SurfaceGrid {
    SurfaceGrid::new(5.0, 260, 20, 0.5, 1.0).unwrap()
}

fn spread_surface(g: SurfaceGrid) -> HbSurface {
    HbSurface::from_fn(g, |xi, eta| {
        0.02 + 0.01 * (-0.4 * xi).exp() + 0.22 * (1.0 - eta) * (-0.1 * xi).exp()
    })
    .unwrap()
}

fn martingale_config() -> ModelConfig {
    ModelConfig {
        grid: grid(),
        volatility: FactorVolatility::single(1.0, CoeffFamily::Constant { level: 0.02 }),
        market_jumps: MarketJumpSpec::none(),
        loss_jumps: LossJumpSpec::none(),
        initial_surface: InitialSurfaceSpec::Separable {
            base_level: 0.02,
            base_bump: 0.01,
            base_decay: 0.4,
            spread_level: 0.22,
            spread_decay: 0.0,
            spread_power: 1,
        },
        horizon: 5.0,
        n_paths: 16,
        seed: 1,
        rate_bound: 0.5,
        mode: ModelMode::Credit,
        drift: DriftMode::NoArbitrage,
        output_times: vec![5.0],
        probes: vec![],
        store_surfaces: false,
    }
}

fn bench_norm(c: &mut Criterion) {
    let g = grid();
    let h = spread_surface(g);
    c.bench_function("hb_norm 261x21", |b| b.iter(|| hb_norm(&h, g.beta).unwrap().total));
}

fn bench_drift(c: &mut Criterion) {
    let g = grid();
    let h = spread_surface(g);
    let loss = LossState::initial();
    let vol = FactorVolatility::single(1.0, CoeffFamily::ExponentialDecay { scale: 0.015, rate: 0.8 });
    let mjump = MarketJumpSpec::new(
        vec![MarkPoint { mark: 0.5, weight: 0.25 }, MarkPoint { mark: 1.5, weight: 0.15 }],
        CoeffFamily::MarkScaled { scale: 0.012, rate: 1.2 },
    );
    let no_l = LossJumpSpec::none();
    c.bench_function("drift_alpha diffusive+jumps 261x21", |b| {
        b.iter(|| drift_alpha(&loss, &h, &vol, &mjump, &no_l).unwrap())
    });
    let with_l = LossJumpSpec::new(CoeffFamily::ExponentialDecay { scale: 0.04, rate: 0.6 });
    c.bench_function("drift_alpha with loss kernel 261x21", |b| {
        b.iter(|| drift_alpha(&loss, &h, &vol, &mjump, &with_l).unwrap())
    });
}

fn bench_step(c: &mut Criterion) {
    let cfg = martingale_config();
    let stepper = Stepper::new(&cfg).unwrap();
    let state = PathState::initial(cfg.initial().unwrap());
    let dt = cfg.grid.dx();
    let mut rng = RngStream::new(1, 0, StreamLabel::Wiener).rng();
    c.bench_function("step_mild static 261x21", |b| {
        b.iter_batched(
            || wiener_increments(&cfg.volatility, dt, &mut rng),
            |dw| stepper.step_mild(&state, dt, &[], &dw).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_simulate(c: &mut Criterion) {
    let cfg = martingale_config();
    c.bench_function("simulate 16 paths x 260 steps", |b| b.iter(|| simulate(&cfg, 1).unwrap()));
}

criterion_group!(benches, bench_norm, bench_drift, bench_step, bench_simulate);
criterion_main!(benches);
