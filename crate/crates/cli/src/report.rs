//! Versioned report envelope, JSON and CSV rendering.

use std::path::Path;

use finsler_core::fd_oracle::FdConfig;
use finsler_core::jets::JetSpec;
use serde::Serialize;

use crate::args::Format;
use crate::config::MetricEcho;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

const TOOL: Tool = Tool {
    name: "finsler",
    version: env!("CARGO_PKG_VERSION"),
};

/// Everything that determines a run's numbers.
#[derive(Debug, Clone, Serialize)]
pub struct RunEcho {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricEcho>,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orders: Option<JetSpec>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tensors: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd: Option<FdConfig>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<B> {
    pub schema_version: u32,
    pub command: &'static str,
    pub tool: Tool,
    pub generated_at: String,
    pub run: RunEcho,
    #[serde(flatten)]
    pub body: B,
}

impl<B: Body> Report<B> {
    pub fn new(command: &'static str, run: RunEcho, body: B) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            tool: TOOL,
            generated_at: chrono::Utc::now().to_rfc3339(),
            run,
            body,
        }
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => serde_json::to_string_pretty(self)
                .map(|s| s + "\n")
                .map_err(|e| CliError::Serialize(e.to_string())),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for row in self.body.csv_rows() {
                    w.serialize(row).map_err(|e| CliError::Serialize(e.to_string()))?;
                }
                let bytes = w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))?;
                String::from_utf8(bytes).map_err(|e| CliError::Serialize(e.to_string()))
            }
        }
    }
}

/// One line of the flattened CSV projection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub item: String,
    /// Sample index, empty for aggregates.
    pub sample: Option<usize>,
    pub quantity: String,
    pub value: f64,
    pub status: String,
}

impl CsvRow {
    pub fn new(item: impl Into<String>, sample: Option<usize>, quantity: impl Into<String>, value: f64) -> Self {
        Self {
            item: item.into(),
            sample,
            quantity: quantity.into(),
            value,
            status: String::new(),
        }
    }

    pub fn with_status(mut self, status: impl Into<String>) -> Self {
        self.status = status.into();
        self
    }
}

pub trait Body: Serialize {
    fn csv_rows(&self) -> Vec<CsvRow>;
}

pub fn write_output(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Write {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

/// Drops the `generated_at` line so two JSON reports can be compared.
pub fn strip_timestamp(json: &str) -> String {
    json.lines()
        .filter(|l| !l.trim_start().starts_with("\"generated_at\""))
        .collect::<Vec<_>>()
        .join("\n")
}
