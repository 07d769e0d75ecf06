//! JSON chain-spec files: `{"m": 2, "P": [[...], [...]], "labels": [...], "start": [...]}`.

use std::fs;
use std::path::{Path, PathBuf};

use mml_core::chain::Start;
use mml_core::{ChainSpec, Error as CoreError, TransitionMatrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub m: usize,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ChainFileError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid chain: {0}")]
    Invalid(String),
}

impl ChainFile {
    pub fn from_spec(spec: &ChainSpec) -> Self {
        Self {
            m: spec.m(),
            p: spec.matrix.rows().map(<[f64]>::to_vec).collect(),
            labels: spec.matrix.labels().map(<[String]>::to_vec),
            start: match &spec.start {
                Start::Stationary => None,
                Start::Distribution(d) => Some(d.clone()),
            },
        }
    }

    pub fn into_spec(self) -> Result<ChainSpec, ChainFileError> {
        let invalid = |s: String| Err(ChainFileError::Invalid(s));
        if self.p.len() != self.m {
            return invalid(format!("field \"m\": declares {} states but \"P\" has {} rows", self.m, self.p.len()));
        }
        let mut matrix = TransitionMatrix::new(self.p).map_err(|e| ChainFileError::Invalid(matrix_message(&e)))?;
        if let Some(labels) = self.labels {
            if labels.len() != self.m {
                return invalid(format!("field \"labels\": has {} entries, expected {}", labels.len(), self.m));
            }
            matrix = matrix.with_labels(labels).map_err(|e| ChainFileError::Invalid(format!("field \"labels\": {e}")))?;
        }
        if let Some(start) = &self.start {
            if start.len() != self.m {
                return invalid(format!("field \"start\": has {} entries, expected {}", start.len(), self.m));
            }
        }
        ChainSpec::new(matrix, self.start).map_err(|e| match e {
            CoreError::BadStart(msg) => ChainFileError::Invalid(format!("field \"start\": {msg}")),
            other => ChainFileError::Invalid(other.to_string()),
        })
    }
}

fn matrix_message(e: &CoreError) -> String {
    match *e {
        CoreError::Empty => "field \"P\": has no rows".into(),
        CoreError::NonSquare { row, len, expected } => {
            format!("field \"P\"[{row}]: has {len} entries, expected {expected}")
        }
        CoreError::NonFinite { row, col } => format!("field \"P\"[{row}][{col}]: not a finite number"),
        CoreError::NegativeEntry { row, col, value } => {
            format!("field \"P\"[{row}][{col}]: probability {value} is outside [0, 1]")
        }
        CoreError::NonStochasticRow { row, sum } => {
            format!("field \"P\"[{row}]: row sums to {sum}, expected 1 within 1e-12")
        }
        ref other => other.to_string(),
    }
}

/// Parses and validates a chain spec. Syntax errors carry the line and column.
pub fn parse_chain(text: &str) -> Result<ChainSpec, ChainFileError> {
    serde_json::from_str::<ChainFile>(text)?.into_spec()
}

pub fn read_chain(path: &Path) -> Result<ChainSpec, ChainFileError> {
    let text = fs::read_to_string(path).map_err(|source| ChainFileError::Io { path: path.into(), source })?;
    parse_chain(&text)
}

fn compact<T: Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string(v).expect("plain vectors serialise")
}

/// JSON with one matrix row per line and a trailing newline.
pub fn to_json(spec: &ChainSpec) -> String {
    let file = ChainFile::from_spec(spec);
    let rows: Vec<String> = file.p.iter().map(|r| format!("    {}", compact(r))).collect();
    let mut s = format!("{{\n  \"m\": {},\n  \"P\": [\n{}\n  ]", file.m, rows.join(",\n"));
    if let Some(labels) = &file.labels {
        s.push_str(&format!(",\n  \"labels\": {}", compact(labels)));
    }
    if let Some(start) = &file.start {
        s.push_str(&format!(",\n  \"start\": {}", compact(start)));
    }
    s.push_str("\n}\n");
    s
}

pub fn write_chain(path: &Path, spec: &ChainSpec) -> Result<(), ChainFileError> {
    fs::write(path, to_json(spec)).map_err(|source| ChainFileError::Io { path: path.into(), source })
}
