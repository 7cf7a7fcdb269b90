use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::problem::ProblemFile;
use crate::CliError;

/// A number together with where it came from: `fit`, `formula`,
/// `override`, `search` or `oracle:<method>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sourced {
    pub value: f64,
    pub source: String,
}

impl Sourced {
    pub fn new(value: f64, source: &str) -> Self {
        Sourced {
            value,
            source: source.to_string(),
        }
    }
}

/// Pass/fail record of the pointwise checks, reproducible from the echoed
/// problem.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub check: String,
    pub passed: bool,
    pub points: usize,
    pub items: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub delta: f64,
    pub source: String,
    pub report: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub grid: Option<Value>,
}

impl Provenance {
    pub fn new(command: &str, seed: Option<u64>, grid: Option<Value>) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            grid,
        }
    }
}

/// Per-δ verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaOutcome {
    pub delta: f64,
    pub accepted: bool,
    pub reasons: Vec<String>,
    pub exp_bound: Option<Sourced>,
    pub ln_exp_bound: Option<Sourced>,
    pub detail: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSection {
    pub accepted: bool,
    pub reasons: Vec<String>,
    pub deltas: Vec<DeltaOutcome>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub problem: ProblemFile,
    pub constants: BTreeMap<String, Sourced>,
    pub certificate: CertificateSection,
    pub oracle: Vec<OracleEntry>,
    pub violations: Checks,
    pub provenance: Provenance,
}

impl Report {
    pub fn accepted(&self) -> bool {
        self.certificate.accepted
    }
}

pub fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).unwrap_or(Value::Null)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, t: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(t).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(path, &bytes)
}
