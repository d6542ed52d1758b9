use thiserror::Error;

use crate::dsl::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem with a machine (dimensions, references).
    #[error("definition error: {0}")]
    Definition(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// No edge, or more than one edge, is enabled for a (mode, label, psi) triple.
    #[error("machine is not total/deterministic in mode `{mode}` for label {label} at psi {psi:?}: {enabled} edges enabled")]
    Totality {
        mode: String,
        label: String,
        psi: Vec<f64>,
        enabled: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// A continuous state lies outside the discretized region.
    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("failed to parse machine:\n{}", format_diagnostics(.0))]
    Parse(Vec<Diagnostic>),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}
