//! Semi-implicit Milstein/ADI finite differences for a 2-d Zakai-type SPDE,
//! with plain, sparse-combination, multilevel and sparse-combination
//! multilevel Monte Carlo estimators of the quadrant functional.

pub mod error;
pub mod estimators;
pub mod exec;
pub mod fd;
pub mod model;
pub mod noise;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{ModelParams, NormalPair};
pub use noise::{BrownianPath, SeedSpec, StreamTag};
