//! Scenario runner: loads TOML scenarios, runs their check blocks and
//! writes JSON reports and CSV geodesic traces.

pub mod builtin;
pub mod checks;
pub mod error;
pub mod model;
pub mod run;
pub mod schema;

pub use error::{CliError, CliResult};
pub use model::{Model, RunOptions};
pub use run::{load, run_scenario, trace_csv, trace_scenario, write_outputs, RunReport};
pub use schema::{parse_scenario, Scenario};
