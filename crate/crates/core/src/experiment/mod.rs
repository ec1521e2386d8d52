//! Configuration, report emission and the end-to-end experiments behind the
//! command line tool.
//!
//! A run is a pure function of its [`ExperimentConfig`]: the report echoes
//! the configuration, and running the echo again gives the same bytes.
//! Wall-clock timings are kept out of the report and written next to it.

mod babenko;
mod commands;
mod config;
mod report;

pub use babenko::{
    calibrate, run_babenko, trend_rows, verdict, Calibration, CalibrationStep, DENSITY_CONVENTION, VERDICT_ABSENT,
    VERDICT_DECAYING, VERDICT_SINGLE,
};
pub use commands::run;
pub use config::{
    BabenkoSpec, CalibrationSpec, Command, ExperimentConfig, LatticeSpec, QuadratureConfig, SequenceSource, Target,
};
pub use report::{
    emit_report, format_complex, format_real, table_csv, Column, ExperimentReport, Format, Kind, Method, Quantity,
    Table, Timings, Value, REPORT_SCHEMA, SCHEMA_ID, TOOL_VERSION,
};
