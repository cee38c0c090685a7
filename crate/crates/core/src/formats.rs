//! JSON encodings for Kraus sets, matrices and states.
//!
//! Complex numbers are `[re, im]` pairs; matrices are row-major nested
//! arrays. serde_json writes the shortest round-trip representation of each
//! float, so re-reading reproduces the values bit for bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::KrausSet;
use crate::linalg::{CMatrix, C64};
use crate::state::{DensityMatrix, StateError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("bad shape: {0}")]
    Shape(String),
    #[error("invalid state: {0}")]
    State(#[from] StateError),
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        Self::Json(e.to_string())
    }
}

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.rows())
        .map(|r| m.row(r).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<CMatrix, FormatError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(FormatError::Shape("empty matrix".into()));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(FormatError::Shape(format!(
            "row {i} has {} entries, expected {c}",
            row.len()
        )));
    }
    let data: Vec<C64> = rows.iter().flatten().map(|&[re, im]| C64::new(re, im)).collect();
    if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(FormatError::Shape("non-finite entry".into()));
    }
    CMatrix::from_row_major(r, c, data).map_err(|e| FormatError::Shape(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
struct KrausFile {
    dim: usize,
    operators: Vec<JsonMatrix>,
}

/// Parses `{"dim": d, "operators": [...]}`. Only shapes are checked here;
/// CPTP validation is up to the caller.
pub fn parse_kraus_json(text: &str) -> Result<Vec<CMatrix>, FormatError> {
    let file: KrausFile = serde_json::from_str(text)?;
    if file.operators.is_empty() {
        return Err(FormatError::Shape("no operators".into()));
    }
    file.operators
        .iter()
        .enumerate()
        .map(|(k, rows)| {
            let m = matrix_from_json(rows)?;
            if m.rows() != file.dim || m.cols() != file.dim {
                return Err(FormatError::Shape(format!(
                    "operator {k} is {}x{}, header says dim {}",
                    m.rows(),
                    m.cols(),
                    file.dim
                )));
            }
            Ok(m)
        })
        .collect()
}

pub fn kraus_to_json(k: &KrausSet) -> String {
    operators_to_json(k.operators())
}

pub fn operators_to_json(ops: &[CMatrix]) -> String {
    let file = KrausFile {
        dim: ops.first().map_or(0, CMatrix::rows),
        operators: ops.iter().map(matrix_to_json).collect(),
    };
    serde_json::to_string_pretty(&file).expect("serializable")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Pure,
    Density,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    num_qubits: usize,
    kind: StateKind,
    data: serde_json::Value,
}

/// Parses a pure (amplitude list) or density (matrix) state and validates
/// it as a density matrix on `num_qubits` qubits.
pub fn parse_state_json(text: &str) -> Result<DensityMatrix, FormatError> {
    let file: StateFile = serde_json::from_str(text)?;
    let dim = 1usize
        .checked_shl(file.num_qubits as u32)
        .filter(|_| file.num_qubits < 24)
        .ok_or_else(|| FormatError::Shape(format!("{} qubits is too many", file.num_qubits)))?;
    let rho = match file.kind {
        StateKind::Pure => {
            let amps: Vec<[f64; 2]> = serde_json::from_value(file.data)?;
            if amps.len() != dim {
                return Err(FormatError::Shape(format!(
                    "{} amplitudes for {} qubits",
                    amps.len(),
                    file.num_qubits
                )));
            }
            let amps: Vec<C64> = amps.iter().map(|&[re, im]| C64::new(re, im)).collect();
            let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(StateError::BadTrace(norm).into());
            }
            DensityMatrix::from_pure(&amps)?
        }
        StateKind::Density => {
            let rows: JsonMatrix = serde_json::from_value(file.data)?;
            let m = matrix_from_json(&rows)?;
            if m.rows() != dim || m.cols() != dim {
                return Err(FormatError::Shape(format!(
                    "{}x{} matrix for {} qubits",
                    m.rows(),
                    m.cols(),
                    file.num_qubits
                )));
            }
            DensityMatrix::new(m)?
        }
    };
    Ok(rho)
}

pub fn state_to_json(rho: &DensityMatrix) -> String {
    let file = StateFile {
        num_qubits: rho.num_qubits(),
        kind: StateKind::Density,
        data: serde_json::to_value(matrix_to_json(rho.matrix())).expect("serializable"),
    };
    serde_json::to_string_pretty(&file).expect("serializable")
}
