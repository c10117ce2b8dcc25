//! Batch runner for the qfrac-core identities: JSON scenario configs in,
//! residual reports out.

pub mod config;
pub mod report;
pub mod scenario;

pub use config::{ConfigError, Scenario, ScenarioConfig};
pub use report::{emit, Case, CheckHeader, CheckSummary, Format, Report};
pub use scenario::{run, RunError};
