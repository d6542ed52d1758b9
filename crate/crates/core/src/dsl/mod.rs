//! The `.prm` machine description language.
//!
//! ```text
//! # comment
//! machine coffee
//! alphabet { c, m, h, t }
//! param T0 = 98
//! var T : real init T0 bounds [20, T0]
//! tau 1
//! mode carrying init {
//!   flow { T' = -0.00033 * (T - 20); }
//!   on t & !h & (T in [55, T0]) -> done reward 1
//!   else -> carrying reward 0
//! }
//! mode done { }
//! terminal done when T in [20, T0)
//! ```
//!
//! Guards combine propositions with `&`, `|`, `!` and parentheses, and
//! interval predicates `<affine-expr> in [lo, hi]` whose ends may be open
//! (`(`/`)`). Expressions may use declared variables, parameters and the
//! global step counter `k`. An `else` edge is enabled exactly when no
//! other edge of its mode is.

mod lexer;
mod parser;
mod serialize;
mod validate;

use std::fmt;

pub use parser::parse_prm;
pub use serialize::serialize_prm;
pub use validate::{validate_prm, validate_prm_with, ValidationOptions};

/// Text of a machine together with where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDocument {
    pub text: String,
    pub origin: String,
}

impl SourceDocument {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            origin: origin.into(),
        }
    }

    pub fn inline(text: impl Into<String>) -> Self {
        Self::new(text, "<inline>")
    }

    pub fn read(path: impl AsRef<std::path::Path>) -> std::io::Result<Self> {
        let path = path.as_ref();
        Ok(Self::new(std::fs::read_to_string(path)?, path.display().to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    /// Source position; absent for checks run on an already-built machine.
    pub location: Option<Location>,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>, location: Option<Location>) -> Self {
        Self {
            severity: Severity::Error,
            message: message.into(),
            location,
        }
    }

    pub fn warning(message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            message: message.into(),
            location: None,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.location {
            Some(l) => write!(f, "{sev} at {}:{}: {}", l.line, l.column, self.message),
            None => write!(f, "{sev}: {}", self.message),
        }
    }
}

/// Parses and structurally checks a machine, then runs [`validate_prm`].
/// Any error diagnostic from either stage is returned as a
/// [`crate::Error::Parse`].
pub fn load_prm(doc: &SourceDocument) -> crate::Result<crate::prm::PrmDefinition> {
    let prm = parse_prm(doc).map_err(crate::Error::Parse)?;
    let diags: Vec<Diagnostic> = validate_prm(&prm).into_iter().filter(|d| d.is_error()).collect();
    if diags.is_empty() {
        Ok(prm)
    } else {
        Err(crate::Error::Parse(diags))
    }
}
