//! Semi-classical model of measurement-induced state transitions (MIST) in a
//! transmon read out through a lower-frequency resonator.
//!
//! The resonator is treated as a classical coherent field `alpha(t)` that
//! drives the transmon through excitation-preserving couplings. Transitions
//! show up as loss of population from the instantaneous eigenstate connected
//! to the prepared level while the field rings up.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod io;
pub mod linalg;
pub mod strip;
pub mod sweep;
pub mod transmon;

pub use error::{MistError, Result};
pub use analysis::{DispersiveParams, OnsetPoint, TransitionBoundary};
pub use dynamics::{PopulationTrace, SimulationConfig, SurvivalCurve};
pub use field::{DriveConfig, Envelope, FieldTrajectory};
pub use strip::{Coupling, CrossingRecord, InteractionModel, SpectrumResult, StripConfig};
pub use sweep::{OracleReport, SweepConfig, SweepResult};
pub use transmon::{TransmonEigen, TransmonParams};
