//! Experiment runner for the relaynet simulator: training and testing curves,
//! D0 and users-per-cell sweeps, baseline comparisons, CSV and SVG output.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod settings;
pub mod svg;
pub mod table;

pub use error::{HarnessError, Result};
pub use settings::{ExperimentSpec, Scenario, Settings};
pub use table::{Cell, Table};
