use serde::{Deserialize, Serialize};

use super::SymMatrix;
use crate::error::{Error, Result};

/// Wire form of a square matrix: `{"dim": p, "rows": [[...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

pub fn matrix_from_json(text: &str) -> Result<SymMatrix> {
    let parsed: MatrixJson =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("matrix JSON: {e}")))?;
    if parsed.rows.len() != parsed.dim {
        return Err(Error::Parse(format!(
            "matrix JSON declares dim {} but has {} rows",
            parsed.dim,
            parsed.rows.len()
        )));
    }
    SymMatrix::from_rows(&parsed.rows)
}

pub fn matrix_to_json(m: &SymMatrix) -> MatrixJson {
    MatrixJson { dim: m.dim(), rows: m.rows() }
}

/// `p` lines of `p` comma-separated reals, no header.
pub fn matrix_from_csv(text: &str) -> Result<SymMatrix> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("matrix CSV line {}: {e}", line + 1)))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|e| {
                    Error::Parse(format!("matrix CSV line {}, column {}: {e}", line + 1, col + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    SymMatrix::from_rows(&rows)
}
