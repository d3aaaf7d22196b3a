//! Random problem generation.
//!
//! Drift and control Hamiltonians are drawn from a Gaussian ensemble projected
//! onto su(n); `rho0` and `theta` get prescribed simple spectra in Haar-random
//! eigenbases. Generic pairs generate su(n), so a handful of retries is
//! enough to obtain a controllable problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lie::{conjugate, CMatrix, Hermitian, SkewHermitian, Tolerances};
use crate::problem::QuantumProblem;
use num_complex::Complex64;

/// Parameters of the random problem generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub n: usize,
    pub horizon: f64,
    /// Spectrum of `rho0`; defaults to [`default_rho_spectrum`].
    pub rho_spectrum: Option<Vec<f64>>,
    /// Spectrum of `theta`; defaults to [`default_theta_spectrum`].
    pub theta_spectrum: Option<Vec<f64>>,
    /// Standard deviation of the Gaussian entries of `H0` and `H1`.
    pub hamiltonian_scale: f64,
    pub max_attempts: usize,
}

impl ProblemSpec {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            horizon: 8.0,
            rho_spectrum: None,
            theta_spectrum: None,
            hamiltonian_scale: 1.0,
            max_attempts: 32,
        }
    }

    /// Deterministic generation from a seed.
    pub fn generate(&self, seed: u64) -> Result<QuantumProblem> {
        random_problem(self, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// `2k / (n(n+1))` for `k = n..1`: evenly spaced in `(0, 1)` with unit trace.
pub fn default_rho_spectrum(n: usize) -> Vec<f64> {
    let total = (n * (n + 1)) as f64 / 2.0;
    (1..=n).rev().map(|k| k as f64 / total).collect()
}

/// Evenly spaced in `[-1, 1]`, descending.
pub fn default_theta_spectrum(n: usize) -> Vec<f64> {
    (0..n).map(|k| 1.0 - 2.0 * k as f64 / (n - 1) as f64).collect()
}

fn gaussian_matrix(n: usize, scale: f64, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(scale * re, scale * im)
    })
}

/// Gaussian matrix projected onto su(n).
pub fn random_su(n: usize, scale: f64, rng: &mut impl Rng) -> SkewHermitian {
    SkewHermitian::project(&gaussian_matrix(n, scale, rng))
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal absorbed into `Q`.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> CMatrix {
    let qr = gaussian_matrix(n, 1.0, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for z in q.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    q
}

/// Hermitian matrix with the given spectrum in a Haar-random eigenbasis.
pub fn random_hermitian_with_spectrum(spectrum: &[f64], rng: &mut impl Rng) -> Hermitian {
    let u = haar_unitary(spectrum.len(), rng);
    let m = conjugate(&u, Hermitian::diagonal(spectrum).matrix());
    // Remove rounding asymmetry.
    Hermitian::new((&m + m.adjoint()) * Complex64::new(0.5, 0.0)).expect("symmetrized matrix is Hermitian")
}

fn check_simple(spectrum: &[f64], n: usize, tol: f64) -> Result<()> {
    if spectrum.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: spectrum.len(),
        });
    }
    if spectrum.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut sorted = spectrum.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let gap = sorted.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    if gap < tol {
        return Err(Error::DegenerateSpectrum { gap, tol });
    }
    Ok(())
}

/// Draws a controllable problem with simple spectra; retries up to
/// `spec.max_attempts` times.
pub fn random_problem(spec: &ProblemSpec, rng: &mut impl Rng) -> Result<QuantumProblem> {
    let n = spec.n;
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    let tol = Tolerances::default().spectral_gap;
    let rho_spec = spec.rho_spectrum.clone().unwrap_or_else(|| default_rho_spectrum(n));
    let theta_spec = spec.theta_spectrum.clone().unwrap_or_else(|| default_theta_spectrum(n));
    check_simple(&rho_spec, n, tol)?;
    check_simple(&theta_spec, n, tol)?;
    for _ in 0..spec.max_attempts.max(1) {
        let h0 = random_su(n, spec.hamiltonian_scale, rng);
        let h1 = random_su(n, spec.hamiltonian_scale, rng);
        let rho0 = random_hermitian_with_spectrum(&rho_spec, rng);
        let theta = random_hermitian_with_spectrum(&theta_spec, rng);
        let problem = QuantumProblem::new(h0, h1, rho0, theta, spec.horizon)?;
        if problem.controllable() && problem.h1_ok() {
            return Ok(problem);
        }
    }
    Err(Error::InvalidConfig(format!(
        "no controllable problem found in {} attempts",
        spec.max_attempts
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::unitarity_defect;

    #[test]
    fn default_spectra() {
        let r = default_rho_spectrum(4);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(r.windows(2).all(|w| w[0] > w[1]));
        assert_eq!(default_theta_spectrum(3), vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..6 {
            assert!(unitarity_defect(&haar_unitary(n, &mut rng)) < 1e-13);
        }
    }

    #[test]
    fn generated_problems_are_valid_and_reproducible() {
        for n in 2..5 {
            let p = ProblemSpec::new(n).generate(7).unwrap();
            assert!(p.controllable() && p.h1_ok());
            let q = ProblemSpec::new(n).generate(7).unwrap();
            assert_eq!(p.h0(), q.h0());
            assert_eq!(p.theta(), q.theta());
            let spec = p.rho0().spectrum().unwrap();
            for (a, b) in spec.iter().zip(default_rho_spectrum(n)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_request_is_rejected() {
        let mut spec = ProblemSpec::new(3);
        spec.rho_spectrum = Some(vec![0.5, 0.25, 0.25]);
        assert!(matches!(spec.generate(1), Err(Error::DegenerateSpectrum { .. })));
    }
}
