//! Shared fixtures for unit tests.

use num_complex::Complex64;

use crate::generate::ProblemSpec;
use crate::lie::{CMatrix, Hermitian, SkewHermitian};
use crate::problem::QuantumProblem;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn diag_skew(entries: &[f64]) -> SkewHermitian {
    let d: Vec<Complex64> = entries.iter().map(|&x| c(0.0, x)).collect();
    SkewHermitian::new(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))).unwrap()
}

pub fn random_problem(n: usize, seed: u64) -> QuantumProblem {
    ProblemSpec::new(n).generate(seed).unwrap()
}

pub fn sample_problem() -> QuantumProblem {
    random_problem(2, 1)
}

/// Diagonal `H0`, `H1`, `rho0` and `theta`: every propagator is diagonal,
/// so no direction in `p` is ever excited.
pub fn commuting_problem() -> QuantumProblem {
    QuantumProblem::new(
        diag_skew(&[1.0, -1.0, 0.0]),
        diag_skew(&[1.0, 1.0, -2.0]),
        Hermitian::diagonal(&[0.5, 0.3, 0.2]),
        Hermitian::diagonal(&[1.0, 0.0, -1.0]),
        1.0,
    )
    .unwrap()
}

pub fn diagonal_two_level() -> QuantumProblem {
    let h1 = SkewHermitian::new(CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(-1., 0.), c(0., 0.)])).unwrap();
    QuantumProblem::new(
        diag_skew(&[1.0, -1.0]),
        h1,
        Hermitian::diagonal(&[0.75, 0.25]),
        Hermitian::diagonal(&[1.0, -1.0]),
        1.0,
    )
    .unwrap()
}
