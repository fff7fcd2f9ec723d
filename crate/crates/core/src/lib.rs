//! Structure-preserving reduced-order models for metriplectic systems.

pub mod benchmarks;
pub mod error;
pub mod integrator;
pub mod matrix_io;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod plot;
pub mod pod;
pub mod report;
pub mod rom;
pub mod system;

pub use error::{Error, Result};
pub use system::{MetriplecticSystem, State};
