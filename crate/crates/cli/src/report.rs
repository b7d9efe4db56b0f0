use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use sigma2_core::chart::ChartError;
use sigma2_core::exact::ExactError;
use sigma2_core::homogeneous::GeometryError;
use sigma2_core::quadrature::QuadratureError;
use sigma2_core::registry::RegistryError;
use sigma2_core::spectral::SpectralError;
use sigma2_core::variation::VariationError;

/// Version of `schemas/report.schema.json` that JSON output conforms to.
pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Variation(#[from] VariationError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// What a command produced: a JSON payload, its table rendering, optional
/// CSV rows, and whether every check passed.
pub struct Outcome {
    pub command: &'static str,
    pub payload: Map<String, Value>,
    pub text: String,
    pub csv: Option<String>,
    pub passed: bool,
}

impl Outcome {
    pub fn new(command: &'static str, payload: impl Serialize, text: String, passed: bool) -> Self {
        let payload = match serde_json::to_value(payload).expect("report serializes") {
            Value::Object(m) => m,
            other => Map::from_iter([("value".to_string(), other)]),
        };
        Outcome { command, payload, text, csv: None, passed }
    }

    pub fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }

    pub fn envelope(&self) -> Value {
        let mut m = Map::new();
        m.insert("schemaVersion".into(), json!(SCHEMA_VERSION));
        m.insert("command".into(), json!(self.command));
        m.insert("passed".into(), json!(self.passed));
        for (k, v) in &self.payload {
            m.insert(k.clone(), v.clone());
        }
        Value::Object(m)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => format!("{}\n", serde_json::to_string_pretty(&self.envelope()).expect("json")),
            Format::Csv => self.csv.clone().unwrap_or_else(|| self.text.clone()),
            Format::Text => {
                let mark = if self.passed { "PASS" } else { "FAIL" };
                format!("{}{mark}\n", self.text)
            }
        }
    }
}

/// Two-column key/value table.
#[derive(Default)]
pub struct Table {
    rows: Vec<(String, String)>,
}

impl Table {
    pub fn row(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.rows.push((key.into(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
        self.rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    }
}

pub fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

pub fn relative(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}
