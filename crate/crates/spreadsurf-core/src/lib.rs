//! Numerical core for defaultable term-structure surfaces.
//!
//! Forward-spread surfaces r_t(ξ, η) live on a weighted discrete function
//! space and evolve under a transport SPDE driven by truncated Wiener
//! noise, market jumps and a loss point process whose intensity is read
//! off the spread curve's own short end. The crate assembles the
//! no-arbitrage drift, simulates path ensembles, prices (T, η)-bonds and
//! single-tranche CDOs on them, and checks positivity/monotonicity and
//! the model's standing assumptions.

// `!(x > 0.0)`-style guards are deliberate: they reject NaN along with
// the out-of-range values, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod coefficients;
pub mod engine;
pub mod error;
pub mod function_space;
pub mod mpp;
pub mod pricing;
pub mod profiles;
pub mod sampler;
pub mod stats;
pub mod validation;

pub use coefficients::{
    drift_alpha, drift_residual, loss_intensity, mortality_drift, CoeffFamily,
    DriftResidualBreakdown, FactorVolatility, LossIntensity, LossJumpSpec, LossState, MarkPoint,
    MarketJumpSpec, ResidualEvaluator, VolatilityFactor,
};
pub use engine::{
    simulate, BondProbe, DriftMode, EventRecord, InitialSurfaceSpec, ModelConfig, ModelMode,
    PathFailure, PathRecord, PathState, SimulationEnsemble, Snapshot, Stepper,
};
pub use error::{Error, Result};
pub use function_space::{hb_norm, HbSurface, NormBreakdown, SurfaceGrid, SurfaceJson};
pub use mpp::{
    market_jump_times, next_loss_jump, wiener_increments, JumpEvent, JumpKind, RngStream,
    StreamLabel,
};
pub use calibration::{estimate_constants, GridConstants};
pub use pricing::{
    bond_price, martingale_test, stcdo_premium_by_bonds, stcdo_value, tranche_payout,
    MartingaleTestReport, PriceEstimate, StcdoValuation, TrancheSpec,
};
pub use profiles::ToleranceProfile;
pub use sampler::SurfaceSampler;
pub use validation::{
    audit_assumptions, check_monotonicity, check_positivity_conditions, empirical_positivity,
    ConditionReport, Violation,
};
