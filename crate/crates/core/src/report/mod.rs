//! Configuration, sweeps over `t = τ` and CSV output for the command line.

mod commands;
mod config;
mod table;

pub use commands::{
    compare, exit_code, figure_data, simulate, validate, Check, ComparisonReport, ComparisonRow, FigureBundle,
    FigureFile, RunOptions, SimulationOutput, ValidationReport,
};
pub use config::{
    apply_override, ExperimentConfig, GridConfig, InitialStateConfig, MatrixConfig, MeasurementConfig, ModelConfig,
    ModelKind, OracleConfig, OracleKind, SchemeConfig, SeriesConfig,
};
pub use table::{fmt_num, joint_checksum, row_columns, CsvTable, ResultRow, RowStatus, VERSION};
