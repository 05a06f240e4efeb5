use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use spreadsurf_core::{
    audit_assumptions, check_monotonicity, check_positivity_conditions, drift_alpha,
    empirical_positivity, martingale_test, simulate, stcdo_premium_by_bonds, stcdo_value,
    ConditionReport, DriftMode, Error, HbSurface, LossState, ModelMode, ResidualEvaluator, Result,
    SimulationEnsemble, ToleranceProfile,
};

use crate::manifest::{config_hash, run_id, RunManifest, Timing};
use crate::runfile::{InstrumentSpec, RunFile};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub struct RunContext {
    pub run: RunFile,
    pub config_path: PathBuf,
    pub config_hash: String,
    pub run_id: String,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub profile: ToleranceProfile,
    pub profile_name: String,
    artifacts: Vec<String>,
    started: Instant,
    started_unix_ms: u128,
}

impl RunContext {
    pub fn prepare(
        config: &Path,
        out: &Path,
        seed: Option<u64>,
        paths: Option<usize>,
        threads: usize,
        profile_name: &str,
    ) -> Result<Self> {
        let (mut run, raw) = RunFile::load(config)?;
        if let Some(s) = seed {
            run.model.seed = s;
        }
        if let Some(p) = paths {
            run.model.n_paths = p;
            run.model.validate()?;
        }
        let profile = ToleranceProfile::by_name(profile_name).ok_or_else(|| {
            Error::Usage(format!(
                "unknown tolerance profile '{profile_name}' (expected 'default' or 'strict')"
            ))
        })?;
        let hash = config_hash(&raw)?;
        let id = run_id(&hash, run.model.seed);
        let out_dir = out.join(&id);
        std::fs::create_dir_all(&out_dir)?;
        Ok(Self {
            run,
            config_path: config.to_path_buf(),
            config_hash: hash,
            run_id: id,
            out_dir,
            threads,
            profile,
            profile_name: profile_name.to_string(),
            artifacts: Vec::new(),
            started: Instant::now(),
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
        })
    }

    fn write_artifact(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.out_dir.join(name), contents)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        self.write_artifact(name, &text)
    }

    pub fn finish(mut self, subcommand: &str) -> Result<()> {
        self.artifacts.sort();
        self.artifacts.push("manifest.json".into());
        let manifest = RunManifest {
            subcommand: subcommand.into(),
            config_path: self.config_path.display().to_string(),
            config_hash: self.config_hash.clone(),
            run_id: self.run_id.clone(),
            seed: self.run.model.seed,
            n_paths: self.run.model.n_paths,
            threads: self.threads,
            tolerance_profile: self.profile_name.clone(),
            artifacts: self.artifacts.clone(),
            timing: Timing {
                started_unix_ms: self.started_unix_ms,
                duration_ms: self.started.elapsed().as_millis(),
            },
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        std::fs::write(self.out_dir.join("manifest.json"), text)?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    pub seed: u64,
    pub n_paths: usize,
    pub n_failures: usize,
    pub failures: Vec<String>,
    /// Absent when every path failed.
    pub min_surface_value: Option<f64>,
    pub mean_final_loss: Option<f64>,
    pub output_times: Vec<f64>,
}

/// One row of a per-output-time ensemble CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRow {
    pub path: usize,
    pub loss_level: f64,
    pub log_discount: f64,
    pub discount: f64,
    pub probes: Vec<f64>,
}

pub fn ensemble_csv(ensemble: &SimulationEnsemble, snap: usize) -> String {
    let mut out = String::from("path,loss_level,log_discount,discount");
    for p in &ensemble.probes {
        out.push_str(&format!(",probe_T{}_eta{}", p.maturity, p.eta));
    }
    out.push('\n');
    for (i, rec) in ensemble.paths.iter().enumerate() {
        if let Some(rec) = rec {
            let s = &rec.snapshots[snap];
            out.push_str(&format!(
                "{i},{},{},{}",
                s.loss_level,
                s.log_discount,
                s.discount()
            ));
            for v in &s.probe_prices {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
    }
    out
}

pub fn parse_ensemble_csv(text: &str) -> Result<Vec<EnsembleRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Data("empty ensemble csv".into()))?;
    let n_cols = header.split(',').count();
    let mut rows = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_cols {
            return Err(Error::Data(format!("ragged ensemble csv row: {line}")));
        }
        let f = |i: usize| -> Result<f64> {
            cells[i]
                .parse()
                .map_err(|_| Error::Data(format!("bad float '{}' in ensemble csv", cells[i])))
        };
        rows.push(EnsembleRow {
            path: cells[0]
                .parse()
                .map_err(|_| Error::Data(format!("bad path index '{}'", cells[0])))?,
            loss_level: f(1)?,
            log_discount: f(2)?,
            discount: f(3)?,
            probes: (4..n_cols).map(f).collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

pub fn cmd_simulate(mut ctx: RunContext) -> Result<i32> {
    let ensemble = simulate(&ctx.run.model, ctx.threads)?;
    for snap in 0..ensemble.output_times.len() {
        let name = format!("{snap:03}.csv");
        let csv = ensemble_csv(&ensemble, snap);
        ctx.write_artifact(&name, &csv)?;
    }
    let mean_final_loss = {
        let vals: Vec<f64> = ensemble.completed().map(|p| p.final_loss).collect();
        (!vals.is_empty()).then(|| spreadsurf_core::stats::pairwise_sum(&vals) / vals.len() as f64)
    };
    let diag = Diagnostics {
        seed: ctx.run.model.seed,
        n_paths: ensemble.n_paths(),
        n_failures: ensemble.failures.len(),
        failures: ensemble
            .failures
            .iter()
            .map(|f| format!("path {} at t={:.6}: {}", f.path, f.time, f.reason))
            .collect(),
        min_surface_value: ensemble
            .completed()
            .next()
            .is_some()
            .then(|| ensemble.min_surface_value()),
        mean_final_loss,
        output_times: ensemble.output_times.clone(),
    };
    ctx.write_json("diagnostics.json", &diag)?;
    let failed = !ensemble.failures.is_empty();
    ctx.finish("simulate")?;
    Ok(if failed { EXIT_NUMERICAL } else { EXIT_PASS })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PriceTolerances {
    pub mc_budget: f64,
    pub bias_budget: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PriceReport {
    pub instrument: String,
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub reference: Option<f64>,
    pub tolerances: PriceTolerances,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub premium_leg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protection_leg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub premium_by_bonds: Option<f64>,
}

pub fn cmd_price(mut ctx: RunContext) -> Result<i32> {
    if ctx.run.instruments.is_empty() {
        return Err(Error::Config(
            "price: the config has no 'instruments' section".into(),
        ));
    }
    if ctx.run.model.mode == ModelMode::Mortality {
        return Err(Error::Config(
            "price: the discounted-indicator tests price credit-mode claims; survival surfaces have no loss process to price against".into(),
        ));
    }
    let ensemble = simulate(&ctx.run.model, ctx.threads)?;
    ensemble.require_complete()?;
    let mut reports = Vec::new();
    for inst in &ctx.run.instruments {
        match inst {
            InstrumentSpec::Bond { maturity, eta } => {
                let r = martingale_test(&ensemble, *maturity, *eta, ctx.profile.bias_coeff)?;
                reports.push(PriceReport {
                    instrument: inst.label(),
                    value: r.estimate.value,
                    stderr: r.estimate.stderr,
                    n_paths: r.estimate.n_paths,
                    reference: Some(r.reference),
                    tolerances: PriceTolerances {
                        mc_budget: r.mc_budget,
                        bias_budget: r.bias_budget,
                    },
                    pass: r.pass,
                    premium_leg: None,
                    protection_leg: None,
                    premium_by_bonds: None,
                });
            }
            InstrumentSpec::Stcdo { .. } => {
                let tranche = inst.tranche().expect("stcdo");
                let v = stcdo_value(&ensemble, &tranche)?;
                let by_bonds = stcdo_premium_by_bonds(&ensemble.initial_surface, &tranche)?;
                let mc_budget = 3.0 * v.premium_leg.stderr;
                let bias_budget = ctx.profile.bias_coeff * ensemble.grid.dx();
                let pass =
                    (v.premium_leg.value - by_bonds.value).abs() <= mc_budget + bias_budget;
                reports.push(PriceReport {
                    instrument: inst.label(),
                    value: v.value.value,
                    stderr: v.value.stderr,
                    n_paths: v.value.n_paths,
                    reference: None,
                    tolerances: PriceTolerances { mc_budget, bias_budget },
                    pass,
                    premium_leg: Some(v.premium_leg.value),
                    protection_leg: Some(v.protection_leg.value),
                    premium_by_bonds: Some(by_bonds.value),
                });
            }
        }
    }
    let all_pass = reports.iter().all(|r| r.pass);
    ctx.write_json("price_report.json", &reports)?;
    ctx.finish("price")?;
    Ok(if all_pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DriftCheckSummary {
    pub max_abs_residual: f64,
    pub tolerance: f64,
    pub n_probes: usize,
    pub loss_level: f64,
    pub pass: bool,
}

pub fn cmd_drift_check(mut ctx: RunContext) -> Result<i32> {
    if ctx.run.model.mode == ModelMode::Mortality {
        return Err(Error::Config(
            "drift-check sweeps the credit drift condition; mortality-mode drifts are covered by their own assembly".into(),
        ));
    }
    let spec = ctx.run.drift_check.clone().unwrap_or_default();
    let model = &ctx.run.model;
    let grid = model.grid;
    let h = model.initial()?;
    let loss = LossState::at_level(spec.loss_level)?;

    let alpha = match model.drift {
        DriftMode::NoArbitrage => drift_alpha(
            &loss,
            &h,
            &model.volatility,
            &model.market_jumps,
            &model.loss_jumps,
        )?,
        DriftMode::Zero => HbSurface::zeros(grid),
    };
    let evaluator = ResidualEvaluator::new(
        &h,
        &loss,
        &model.volatility,
        &model.market_jumps,
        &model.loss_jumps,
        &alpha,
    )?;

    let maturities = if spec.maturities.is_empty() {
        default_lattice_probes(&grid, model.horizon.min(grid.xi_max))
    } else {
        spec.maturities.clone()
    };
    let etas = if spec.etas.is_empty() {
        default_eta_probes(&grid, spec.loss_level)
    } else {
        spec.etas.clone()
    };

    let mut csv = String::from(
        "maturity,eta,residual,integrated_drift,diffusion_term,market_term,loss_term\n",
    );
    let mut max_abs = 0.0f64;
    let mut n_probes = 0usize;
    for t in &maturities {
        for e in &etas {
            let b = evaluator.breakdown(*t, *e)?;
            max_abs = max_abs.max(b.residual.abs());
            n_probes += 1;
            csv.push_str(&format!(
                "{t},{e},{},{},{},{},{}\n",
                b.residual, b.integrated_drift, b.diffusion_term, b.market_term, b.loss_term
            ));
        }
    }
    ctx.write_artifact("residuals.csv", &csv)?;
    let tolerance = ctx.profile.drift_tol;
    let summary = DriftCheckSummary {
        max_abs_residual: max_abs,
        tolerance,
        n_probes,
        loss_level: spec.loss_level,
        pass: max_abs <= tolerance,
    };
    let pass = summary.pass;
    ctx.write_json("drift_check.json", &summary)?;
    ctx.finish("drift-check")?;
    println!(
        "drift-check: max |residual| = {max_abs:.3e} over {n_probes} probes (tolerance {tolerance:.1e}) -> {}",
        if pass { "pass" } else { "FAIL" }
    );
    Ok(if pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

fn default_lattice_probes(grid: &spreadsurf_core::SurfaceGrid, max_t: f64) -> Vec<f64> {
    let steps = grid.lattice_steps(max_t).unwrap_or(grid.n_xi);
    let mut out = Vec::new();
    for i in 1..=8usize {
        let m = (i * steps) / 8;
        if m > 0 {
            let t = m as f64 * grid.dx();
            if out.last().map(|l: &f64| (l - t).abs() > 1e-12).unwrap_or(true) {
                out.push(t);
            }
        }
    }
    out
}

fn default_eta_probes(grid: &spreadsurf_core::SurfaceGrid, loss_level: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for j in 0..=8usize {
        let k = (j * grid.n_eta) / 8;
        let e = grid.eta(k);
        if e >= loss_level && out.last().map(|l: &f64| (l - e).abs() > 1e-12).unwrap_or(true) {
            out.push(e);
        }
    }
    out
}

pub fn cmd_validate(mut ctx: RunContext) -> Result<i32> {
    let spec = ctx.run.validate.clone().unwrap_or_default();
    let model = ctx.run.model.clone();
    let mut reports: Vec<ConditionReport> = Vec::new();

    reports.extend(check_positivity_conditions(
        model.grid,
        &model.volatility,
        &model.market_jumps,
        &model.loss_jumps,
        spec.n_samples,
        model.seed,
    )?);
    reports.extend(audit_assumptions(&model, spec.n_samples, model.seed, &ctx.profile)?);

    if spec.empirical {
        let ensemble = simulate(&model, ctx.threads)?;
        ensemble.require_complete()?;
        let (_min, rep) = empirical_positivity(&ensemble, &ctx.profile);
        reports.push(rep);
        if let Some(mono) = &spec.monotonicity {
            reports.push(check_monotonicity(
                &ensemble,
                mono.maturity,
                &mono.eta_pairs,
                &ctx.profile,
            )?);
        }
    }

    let all_pass = reports.iter().all(|r| r.passed);
    for r in &reports {
        println!(
            "validate: {:<55} {}",
            r.condition_id,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    ctx.write_json("conditions.json", &reports)?;
    ctx.finish("validate")?;
    Ok(if all_pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

pub fn cmd_calibrate(mut ctx: RunContext, samples: usize) -> Result<i32> {
    let constants = spreadsurf_core::estimate_constants(ctx.run.model.grid, samples, ctx.run.model.seed)?;
    let cache_dir = std::env::var_os("SPREADSURF_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| ctx.out_dir.clone());
    let path = spreadsurf_core::calibration::store_cached(&cache_dir, &constants)?;
    println!(
        "calibrate-constants: c1={:.4} c2={:.4} c3={:.4} m_norm={:.4} i_norm={:.4} -> {}",
        constants.c1,
        constants.c2,
        constants.c3,
        constants.m_norm,
        constants.i_norm,
        path.display()
    );
    ctx.write_json("constants.json", &constants)?;
    ctx.finish("calibrate-constants")?;
    Ok(EXIT_PASS)
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}
