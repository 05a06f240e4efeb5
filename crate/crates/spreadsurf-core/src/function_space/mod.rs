//! Discrete realization of the weighted Hilbert space of forward-spread
//! surfaces: the grid, sampled surfaces with finite-difference calculus,
//! the weighted norm, the shift semigroup, and the pointwise nonlinear
//! maps the drift assembly needs.

mod grid;
mod norm;
mod serial;
mod surface;

pub use grid::SurfaceGrid;
pub use norm::{hb_norm, hb_norm_beta, hb_norm_beta_prime, NormBreakdown};
pub use serial::SurfaceJson;
pub use surface::HbSurface;

pub(crate) use norm::trapezoid_weight;
pub(crate) use serial::format_float;
pub(crate) use surface::stencil_1d;
