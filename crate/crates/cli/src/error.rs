use std::path::PathBuf;

use finsler_core::fd_oracle::FdError;
use finsler_core::jets::JetError;
use finsler_core::metric_lang::ParseError;
use finsler_core::metric_library::CatalogError;
use finsler_core::projective::ProjectiveError;
use finsler_core::tensor_engine::EngineError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VIOLATION: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Config { path: PathBuf, message: String },
    /// Expression parse failure; `excerpt` points at the offending column.
    #[error("{origin} at {err}{excerpt}")]
    Parse { origin: String, err: ParseError, excerpt: String },
    #[error(transparent)]
    Catalog(CatalogError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] FdError),
    #[error(transparent)]
    Projective(ProjectiveError),
    #[error("cannot serialize report: {0}")]
    Serialize(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_)
            | CliError::Read { .. }
            | CliError::Write { .. }
            | CliError::Config { .. }
            | CliError::Parse { .. }
            | CliError::Serialize(_) => exit::USAGE,
            CliError::Catalog(e) => catalog_code(e),
            CliError::Engine(e) => engine_code(e),
            CliError::Oracle(e) => match e {
                FdError::OrderRefused(_) | FdError::Unsupported(_) => exit::USAGE,
                FdError::Engine(e) => engine_code(e),
                _ => exit::NUMERICAL,
            },
            CliError::Projective(e) => match e {
                ProjectiveError::UnknownFixture(_) => exit::USAGE,
                ProjectiveError::Catalog(e) => catalog_code(e),
                ProjectiveError::Engine(e) => engine_code(e),
            },
        }
    }
}

fn catalog_code(e: &CatalogError) -> i32 {
    match e {
        CatalogError::DomainTooSmall { .. } => exit::NUMERICAL,
        _ => exit::USAGE,
    }
}

fn engine_code(e: &EngineError) -> i32 {
    match e {
        EngineError::InsufficientOrder { .. }
        | EngineError::Dimension { .. }
        | EngineError::NoMetric(_)
        | EngineError::Jet(JetError::OrderExceedsSpec { .. }) => exit::USAGE,
        _ => exit::NUMERICAL,
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::Parse(err) => CliError::Parse {
                origin: "expression".into(),
                err,
                excerpt: String::new(),
            },
            other => CliError::Catalog(other),
        }
    }
}

impl From<ProjectiveError> for CliError {
    fn from(e: ProjectiveError) -> Self {
        match e {
            ProjectiveError::Catalog(c) => c.into(),
            other => CliError::Projective(other),
        }
    }
}

/// The offending source line with a caret under column `col` (both 1-based).
pub fn excerpt(text: &str, line: usize, col: usize) -> String {
    let Some(src) = text.lines().nth(line.saturating_sub(1)) else {
        return String::new();
    };
    format!("\n  | {src}\n  | {}^", " ".repeat(col.saturating_sub(1)))
}
