//! Coefficient specifications (σ, γ, δ, jump measures) and the
//! no-arbitrage drift machinery built on top of them.

mod drift;
mod intensity;
mod registry;

pub use drift::{
    drift_alpha, drift_residual, mortality_drift, DriftResidualBreakdown, ResidualEvaluator,
};
pub use intensity::{loss_intensity, LossIntensity};
pub use registry::{
    CoeffFamily, FactorVolatility, LossJumpSpec, LossState, MarkPoint, MarketJumpSpec,
    VolatilityFactor,
};

pub(crate) use drift::{
    diffusion_and_market_drift, loss_drift_from_kernel, loss_kernel_nodes, market_jump_compensator,
};
