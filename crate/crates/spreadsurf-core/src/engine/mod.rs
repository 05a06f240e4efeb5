//! The mild-solution time stepper for the surface SPDE and whole-path
//! ensemble simulation.

mod config;
mod simulate;
mod stepper;

pub use config::{BondProbe, DriftMode, InitialSurfaceSpec, ModelConfig, ModelMode};
pub use simulate::{simulate, PathFailure, PathRecord, SimulationEnsemble, Snapshot};
pub use stepper::{EventRecord, PathState, Stepper};
