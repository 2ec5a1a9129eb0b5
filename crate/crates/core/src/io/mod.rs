//! Dataset ingestion, transformations, configuration, commands and report
//! files.
//!
//! Input CSV files have a header row and use an empty field for an
//! unobserved expensive covariate. Output CSV files start with `#` comment
//! lines holding the resolved configuration and seed.

mod commands;
mod config;
mod report;
mod schema;
mod subsample;
mod table;
mod transform;

pub use commands::{
    exit_code, fit_command, fit_report, run_command, simulate_command, simulate_report, subsample_command,
    subsample_report, validate_command, CommandOutput, EXIT_ALL_FAILED, EXIT_CONFIG, EXIT_DATA, EXIT_OK,
};
pub use config::{
    CellsConfig, CommandConfig, FitConfig, RunConfig, SelectionConfig, SimulateConfig, SubsampleConfig, DEFAULT_SEED,
};
pub use report::{
    provenance_header, results_csv, simreport_csv, write_atomic, ErrorInfo, FitReport, MethodResult, MethodStatus,
    SimReportFile,
};
pub use schema::{quantile_sorted, DatasetSchema, Strata, Transform};
pub use subsample::{stratified_subsample, SubsampleSummary};
pub use table::{load_csv, read_dataset, write_dataset};
pub use transform::{apply_transforms, ColumnTransform, Step, TransformRecord};
