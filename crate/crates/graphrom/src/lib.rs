//! Batch front end for [`graphrom_core`]: JSON run configs, CSV/JSON
//! time-series ingestion, seeded synthetic data, the fit pipeline and the
//! convergence study.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod study;
pub mod svg;
pub mod synth;

pub use error::{AppError, AppResult};
