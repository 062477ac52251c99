//! Scenario-driven front end for `czreach_core`: loading scenario files,
//! running reachability and verification, sampling trajectories, and
//! writing JSON and SVG artifacts.

pub mod error;
pub mod plot;
pub mod run;
pub mod sampling;
pub mod scenario;

pub use error::CliError;
pub use scenario::Scenario;
