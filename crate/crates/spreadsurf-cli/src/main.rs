use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spreadsurf_cli::commands::{
    cmd_calibrate, cmd_drift_check, cmd_price, cmd_simulate, cmd_validate, exit_code_for,
    RunContext,
};

/// Simulation and checking of defaultable term-structure surfaces:
/// no-arbitrage drift assembly, loss-process simulation from the spread
/// curve's short end, bond/STCDO pricing, positivity and monotonicity
/// verification.
#[derive(Parser)]
#[command(name = "spreadsurf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; artifacts land in {out}/{run_id}/.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's path count.
    #[arg(long)]
    paths: Option<usize>,
    /// Worker threads for path simulation (results do not depend on this).
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Numerical budget profile.
    #[arg(long, default_value = "default", value_parser = ["default", "strict"])]
    tolerance_profile: String,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path ensemble and export per-output-time CSVs.
    Simulate(CommonArgs),
    /// Simulate and price the configured instruments.
    Price(CommonArgs),
    /// Sweep the integrated drift-condition residual over (T, eta).
    DriftCheck(CommonArgs),
    /// Run positivity-condition checks and assumption audits.
    Validate(CommonArgs),
    /// Estimate the per-grid empirical constants and cache them.
    CalibrateConstants {
        #[command(flatten)]
        common: CommonArgs,
        /// Calibration sweep size.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
}

fn dispatch(cli: Cli) -> spreadsurf_core::Result<i32> {
    let ctx = |a: &CommonArgs| {
        RunContext::prepare(
            &a.config,
            &a.out,
            a.seed,
            a.paths,
            a.threads,
            &a.tolerance_profile,
        )
    };
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(ctx(a)?),
        Command::Price(a) => cmd_price(ctx(a)?),
        Command::DriftCheck(a) => cmd_drift_check(ctx(a)?),
        Command::Validate(a) => cmd_validate(ctx(a)?),
        Command::CalibrateConstants { common, samples } => cmd_calibrate(ctx(common)?, *samples),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("spreadsurf: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
