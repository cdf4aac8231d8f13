//! Scenario configuration, sweeps over schemes, depths and Biot coefficients,
//! and report files.

mod checks;
mod config;
mod report;
mod sweep;

pub use checks::{run_checks, CheckOutcome};
pub use config::{
    load_config, parse_config, GridConfig, ScenarioConfig, ScenarioKind, SCHEMA_VERSION,
};
pub use report::{emit_report, report_csv, report_table, CSV_HEADER};
pub use sweep::{run_sweep, RowStatus, SweepReport, SweepRow};
