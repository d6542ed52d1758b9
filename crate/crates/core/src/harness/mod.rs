//! Experiment configuration, trial orchestration, aggregation, the exact
//! office oracle and CSV/SVG output.

pub mod config;
pub mod experiment;
pub mod heatmap;
pub mod oracle;
pub mod stats;
pub mod svg;

pub use config::{Algorithm, EnvConfig, EnvName, ExperimentConfig, MachineConfig};
pub use experiment::{
    execute, metadata, office_env, office_product, oracle_product_vi, read_metrics_csv, run_experiment, write_aggregate_csv,
    write_artifacts, write_metrics_csv, write_oracle_csv, OracleReport, RunOutput, TrialResult, ORACLE_TOL,
};
pub use heatmap::{export_heatmap, mode_selection, write_heatmap_csv, Heatmap};
pub use oracle::{OracleSolution, ProductMdp, TIE_TOL};
pub use stats::{aggregate, median, percentile, percentile_sorted, AggregateRow, PERCENTILE_METHOD};
pub use svg::{curve_svg, heatmap_svg};
