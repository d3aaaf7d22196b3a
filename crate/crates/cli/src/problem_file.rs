//! JSON problem files: `n`, `T` and four row-major matrices whose entries are
//! `[re, im]` pairs.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use orbitflow::{CMatrix, Hermitian, QuantumProblem, SkewHermitian};

use crate::CliError;

pub type MatrixRows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub h0: MatrixRows,
    pub h1: MatrixRows,
    pub rho0: MatrixRows,
    pub theta: MatrixRows,
}

fn to_rows(m: &CMatrix) -> MatrixRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn from_rows(name: &str, n: usize, rows: &MatrixRows) -> Result<CMatrix, CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::validation(format!("{name} must be {n}x{n}")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

impl ProblemFile {
    pub fn from_problem(p: &QuantumProblem) -> Self {
        Self {
            n: p.n(),
            horizon: p.horizon(),
            h0: to_rows(p.h0().matrix()),
            h1: to_rows(p.h1().matrix()),
            rho0: to_rows(p.rho0().matrix()),
            theta: to_rows(p.theta().matrix()),
        }
    }

    /// Validates matrix types and builds the problem.
    pub fn to_problem(&self) -> Result<QuantumProblem, CliError> {
        let n = self.n;
        let invalid = |name: &str, e: orbitflow::Error| CliError::validation(format!("{name}: {e}"));
        let h0 = SkewHermitian::new(from_rows("h0", n, &self.h0)?).map_err(|e| invalid("h0", e))?;
        let h1 = SkewHermitian::new(from_rows("h1", n, &self.h1)?).map_err(|e| invalid("h1", e))?;
        let rho0 = Hermitian::new(from_rows("rho0", n, &self.rho0)?).map_err(|e| invalid("rho0", e))?;
        let theta = Hermitian::new(from_rows("theta", n, &self.theta)?).map_err(|e| invalid("theta", e))?;
        QuantumProblem::new(h0, h1, rho0, theta, self.horizon).map_err(|e| CliError::validation(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("problem file serializes");
        s.push('\n');
        s
    }
}
