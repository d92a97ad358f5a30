use std::fmt;
use std::path::{Path, PathBuf};

use nlcorr_core::spectra::{matrix_from_csv, matrix_from_json};
use nlcorr_core::{CorrMatrix, Error, SymMatrix, WeightMatrix};
use serde_json::Value;

use crate::commands::Outcome;
use crate::report::{self, InputDigest};
use crate::Common;

#[derive(Debug)]
pub enum CliError {
    Core { source: Error, location: Option<String> },
    Io { path: PathBuf, message: String },
    Usage(String),
}

impl From<Error> for CliError {
    fn from(source: Error) -> Self {
        CliError::Core { source, location: None }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core { source, location: Some(loc) } => write!(f, "{loc}: {source}"),
            CliError::Core { source, location: None } => write!(f, "{source}"),
            CliError::Io { path, message } => write!(f, "{}: {message}", path.display()),
            CliError::Usage(msg) => f.write_str(msg),
        }
    }
}

impl CliError {
    pub fn to_json(&self, subcommand: &str) -> Value {
        match self {
            CliError::Core { source, location } => {
                let kind = format!("{source:?}");
                let kind = kind.split(['(', ' ', '{']).next().unwrap_or("Error");
                report::error_report(subcommand, kind, &source.to_string(), location.as_deref())
            }
            CliError::Io { path, message } => {
                report::error_report(subcommand, "Io", message, Some(&path.display().to_string()))
            }
            CliError::Usage(msg) => report::error_report(subcommand, "Usage", msg, None),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches a file location to core errors.
pub trait At<T> {
    fn at(self, path: &Path) -> CliResult<T>;
}

impl<T> At<T> for nlcorr_core::Result<T> {
    fn at(self, path: &Path) -> CliResult<T> {
        self.map_err(|source| CliError::Core { source, location: Some(path.display().to_string()) })
    }
}

pub struct Context {
    pub common: Common,
    pub digest: InputDigest,
}

impl Context {
    pub fn new(common: Common) -> Self {
        Context { common, digest: InputDigest::default() }
    }

    pub fn seed(&self) -> u64 {
        self.common.seed
    }

    pub fn tol(&self, default: f64) -> CliResult<f64> {
        match self.common.tol {
            Some(t) if !(t > 0.0 && t.is_finite()) => Err(CliError::Usage(format!("--tol must be positive, got {t}"))),
            Some(t) => Ok(t),
            None => Ok(default),
        }
    }

    pub fn read(&mut self, path: &Path) -> CliResult<String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        self.digest.update("file", text.as_bytes());
        Ok(text)
    }

    /// A square matrix from JSON (`{"dim", "rows"}` or bare rows) or CSV.
    pub fn matrix(&mut self, path: &Path) -> CliResult<SymMatrix> {
        let text = self.read(path)?;
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            matrix_from_json(&text).at(path)
        } else if trimmed.starts_with('[') {
            let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("matrix JSON: {e}")))
                .at(path)?;
            SymMatrix::from_rows(&rows).at(path)
        } else {
            matrix_from_csv(&text).at(path)
        }
    }

    pub fn corr(&mut self, path: &Path) -> CliResult<CorrMatrix> {
        let m = self.matrix(path)?;
        CorrMatrix::new(m).at(path)
    }

    /// `ones`, `offdiag`, `identity` or a matrix file.
    pub fn weights(&mut self, spec: &str, p: usize) -> CliResult<WeightMatrix> {
        let w = match spec {
            "ones" => WeightMatrix::ones(p),
            "offdiag" => WeightMatrix::offdiag(p),
            "identity" => WeightMatrix::identity(p),
            path => {
                let path = Path::new(path);
                let m = self.matrix(path)?;
                WeightMatrix::new(m).at(path)?
            }
        };
        if w.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, found: w.dim() }.into());
        }
        Ok(w)
    }

    pub fn finish(self, subcommand: &str, outcome: Outcome) -> CliResult<()> {
        if let (Some(path), Some(csv)) = (&self.common.curve, &outcome.curve) {
            std::fs::write(path, csv).map_err(|e| CliError::Io { path: path.clone(), message: e.to_string() })?;
        }
        let curve_written = self.common.curve.is_some() && outcome.curve.is_some();
        let mut results = outcome.results;
        if let (Value::Object(map), true) = (&mut results, curve_written) {
            let path = self.common.curve.as_ref().map(|p| p.display().to_string());
            map.insert("curve_path".into(), path.into());
        }
        let seed = self.seed();
        let doc = report::report(subcommand, self.digest.finish(), seed, results, outcome.tolerances);
        let text = report::render(&doc);
        match &self.common.out {
            Some(path) => {
                std::fs::write(path, text).map_err(|e| CliError::Io { path: path.clone(), message: e.to_string() })
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}
