//! The orbit cost `J(rho) = Re tr(rho theta)`: gradient, Hessian at critical
//! points, enumeration of the critical landscape, and the Lie algebra rank
//! test for controllability.

use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::endpoint::TangentVector;
use crate::error::{Error, Result};
use crate::lie::{bracket, conjugate, p_basis, trace_product, CMatrix, Hermitian, SkewHermitian};
use crate::problem::QuantumProblem;

/// `Re tr(rho theta)`.
pub fn cost(rho: &Hermitian, theta: &Hermitian) -> f64 {
    trace_product(rho.matrix(), theta.matrix()).re
}

/// Riemannian gradient `[rho, [rho, theta]]` of `J` for the invariant metric.
pub fn grad_j(rho: &Hermitian, theta: &Hermitian) -> TangentVector {
    let r = rho.matrix();
    let inner = bracket(r, theta.matrix());
    TangentVector::from_parts_unchecked(rho.clone(), bracket(r, &inner))
}

/// `|[rho, theta]|_F`; zero exactly at critical points of `J`.
pub fn criticality(rho: &Hermitian, theta: &Hermitian) -> f64 {
    bracket(rho.matrix(), theta.matrix()).norm()
}

/// Second directional derivatives of `J` along the curves
/// `s -> exp(s Omega_j) rho exp(-s Omega_j)`, with `Omega_j = F E_j F^dag`
/// built from the canonical `p` basis in the eigenframe `F` of `rho`.
///
/// At a critical point this is the Hessian in a metric-orthonormal basis.
pub fn hessian_in_frame(rho: &Hermitian, theta: &Hermitian, frame: &CMatrix) -> DMatrix<f64> {
    let n = rho.dim();
    let omegas: Vec<CMatrix> = p_basis(n).iter().map(|e| conjugate(frame, e)).collect();
    let dim = omegas.len();
    let r = rho.matrix();
    let th = theta.matrix();
    let firsts: Vec<CMatrix> = omegas.iter().map(|o| bracket(o, r)).collect();
    let mut h = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        for k in 0..dim {
            h[(j, k)] = trace_product(&bracket(&omegas[j], &firsts[k]), th).re;
        }
    }
    (&h + h.transpose()) * 0.5
}

/// Hessian of `J` at a critical point `rho` (fails when `[rho, theta] != 0`).
pub fn hessian_j(rho: &Hermitian, theta: &Hermitian, tol: f64) -> Result<DMatrix<f64>> {
    let crit = criticality(rho, theta);
    if crit > tol * rho.matrix().norm().max(1.0) * theta.matrix().norm().max(1.0) {
        return Err(Error::NotCritical(crit));
    }
    let eig = rho.eigen()?;
    Ok(hessian_in_frame(rho, theta, &eig.vectors))
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_spectrum(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Number of negative eigenvalues.
pub fn morse_index(spectrum: &[f64]) -> usize {
    spectrum.iter().filter(|&&l| l < 0.0).count()
}

/// A critical point of `J` on the orbit of `rho0`.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    /// `rho_c` carries eigenvalue `lambda[permutation[i]]` of `rho0` on the
    /// eigenvector of `theta` with the `i`-th largest eigenvalue.
    pub permutation: Vec<usize>,
    pub rho: Hermitian,
    pub value: f64,
    /// Hessian eigenvalues, ascending.
    pub hessian_spectrum: Vec<f64>,
    pub morse_index: usize,
}

/// All `n!` critical points, sorted by ascending value (ties by
/// lexicographic permutation order).
pub fn enumerate_critical_points(problem: &QuantumProblem) -> Result<Vec<CriticalPoint>> {
    problem.require_simple_spectra()?;
    let n = problem.n();
    let lambda = problem.splitting()?.eigenvalues().to_vec();
    let theta_eig = problem.theta().eigen()?;
    let w = &theta_eig.vectors;
    let mut points: Vec<CriticalPoint> = (0..n)
        .permutations(n)
        .map(|perm| {
            let diag: Vec<f64> = perm.iter().map(|&i| lambda[i]).collect();
            let rho = Hermitian::from_matrix_unchecked(conjugate(w, Hermitian::diagonal(&diag).matrix()));
            let value = cost(&rho, problem.theta());
            let hessian = hessian_in_frame(&rho, problem.theta(), w);
            let hessian_spectrum = symmetric_spectrum(&hessian);
            let morse_index = morse_index(&hessian_spectrum);
            CriticalPoint {
                permutation: perm,
                rho,
                value,
                hessian_spectrum,
                morse_index,
            }
        })
        .collect();
    // Stable: permutations arrive in lexicographic order.
    points.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(points)
}

/// Global maximum of `J` over the orbit, `sum lambda_i mu_i` with both
/// spectra sorted descending.
pub fn max_cost(problem: &QuantumProblem) -> Result<f64> {
    let lambda = problem.rho0().spectrum()?;
    let mu = problem.theta().spectrum()?;
    Ok(lambda.iter().zip(&mu).map(|(a, b)| a * b).sum())
}

fn realify(m: &CMatrix) -> Vec<f64> {
    m.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// Orthonormal basis of a real span of matrices, grown by Gram-Schmidt.
struct RealSpan {
    vectors: Vec<Vec<f64>>,
    matrices: Vec<CMatrix>,
    tol: f64,
}

impl RealSpan {
    fn try_add(&mut self, m: &CMatrix) -> bool {
        let mut r = realify(m);
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for b in &self.vectors {
                let c = dot(b, &r);
                r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&r, &r).sqrt();
        if norm <= self.tol {
            return false;
        }
        r.iter_mut().for_each(|x| *x /= norm);
        let n = m.nrows();
        let mat = CMatrix::from_fn(n, n, |i, j| {
            // nalgebra iterates column-major.
            let idx = 2 * (j * n + i);
            Complex64::new(r[idx], r[idx + 1])
        });
        self.vectors.push(r);
        self.matrices.push(mat);
        true
    }
}

/// Dimension of the real Lie algebra generated by `H0` and `H1`.
pub fn lie_closure_dim(h0: &SkewHermitian, h1: &SkewHermitian) -> usize {
    let n = h0.dim();
    let full = n * n - 1;
    let mut span = RealSpan {
        vectors: Vec::new(),
        matrices: Vec::new(),
        tol: 1e-10,
    };
    for h in [h0.matrix(), h1.matrix()] {
        let norm = h.norm();
        if norm > 0.0 {
            span.try_add(&(h / Complex64::new(norm, 0.0)));
        }
    }
    let mut i = 0;
    while i < span.matrices.len() && span.matrices.len() < full {
        for j in 0..i {
            let b = bracket(&span.matrices[i], &span.matrices[j]);
            span.try_add(&b);
            if span.matrices.len() == full {
                break;
            }
        }
        i += 1;
    }
    span.matrices.len()
}

/// Lie algebra rank condition: `H0` and `H1` generate all of su(n).
pub fn check_controllability(h0: &SkewHermitian, h1: &SkewHermitian) -> bool {
    let n = h0.dim();
    lie_closure_dim(h0, h1) == n * n - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::metric;
    use crate::testutil::random_problem;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sigma_x() -> Hermitian {
        Hermitian::new(CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])).unwrap()
    }

    #[test]
    fn cost_examples() {
        let rho = Hermitian::diagonal(&[0.75, 0.25]);
        assert!((cost(&rho, &Hermitian::diagonal(&[1.0, -1.0])) - 0.5).abs() < 1e-15);
        // A multiple of the identity sees only the trace.
        let p = random_problem(3, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let u = crate::dynamics::ControlSignal::uniform_noise(p.horizon(), 8, 2.0, &mut rng).unwrap();
        let rho_t = crate::dynamics::end_point(&p, &u).unwrap();
        let id = Hermitian::diagonal(&[2.5, 2.5, 2.5]);
        assert!((cost(&rho_t, &id) - cost(p.rho0(), &id)).abs() < 1e-12);
    }

    #[test]
    fn cost_of_commuting_pair_is_eigenvalue_pairing() {
        let rho = Hermitian::diagonal(&[0.5, 0.3, 0.2]);
        let theta = Hermitian::diagonal(&[-1.0, 2.0, 0.5]);
        let expected = 0.5 * -1.0 + 0.3 * 2.0 + 0.2 * 0.5;
        assert!((cost(&rho, &theta) - expected).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let rho = Hermitian::diagonal(&[0.75, 0.25]);
        assert_eq!(grad_j(&rho, &Hermitian::diagonal(&[1.0, -1.0])).matrix().norm(), 0.0);
        let g = grad_j(&rho, &sigma_x());
        let expected = sigma_x().into_matrix() * c(0.25, 0.0);
        assert!((g.matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn gradient_represents_differential() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for seed in 0..20 {
            let p = random_problem(2 + seed % 3, 400 + seed as u64);
            let u = crate::dynamics::ControlSignal::uniform_noise(p.horizon(), 4, 2.0, &mut rng).unwrap();
            let rho = crate::dynamics::end_point(&p, &u).unwrap();
            let n = p.n();
            let omega = SkewHermitian::project(&CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
            let eta = bracket(rho.matrix(), omega.matrix());
            let lhs = metric(grad_j(&rho, p.theta()).matrix(), &eta, &rho, 1e-8).unwrap();
            let rhs = trace_product(&eta, p.theta().matrix()).re;
            assert!((lhs - rhs).abs() < 1e-8 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn two_level_landscape() {
        let p = crate::testutil::diagonal_two_level();
        let pts = enumerate_critical_points(&p).unwrap();
        assert_eq!(pts.len(), 2);
        assert!((pts[0].value + 0.5).abs() < 1e-14);
        assert!((pts[1].value - 0.5).abs() < 1e-14);
        assert!(pts[0].hessian_spectrum.iter().all(|&l| l > 0.0));
        assert!(pts[1].hessian_spectrum.iter().all(|&l| l < 0.0));
        assert_eq!(pts[1].permutation, vec![0, 1]);
    }

    #[test]
    fn hessian_matches_central_differences() {
        // Oracle: J(exp(s Omega) rho exp(-s Omega)) sampled at s = 0, +-h.
        let p = random_problem(3, 33);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for point in enumerate_critical_points(&p).unwrap() {
            let h = hessian_j(&point.rho, p.theta(), 1e-8).unwrap();
            let frame = point.rho.eigen().unwrap().vectors;
            let basis: Vec<CMatrix> = p_basis(3).iter().map(|e| conjugate(&frame, e)).collect();
            for _ in 0..20 {
                let coeffs: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut omega = CMatrix::zeros(3, 3);
                for (b, a) in basis.iter().zip(&coeffs) {
                    omega += b * c(*a, 0.0);
                }
                let omega = SkewHermitian::from_matrix_unchecked(omega);
                let j_at = |s: f64| {
                    let u = crate::lie::expm_skew(&omega, s).unwrap();
                    cost(&Hermitian::from_matrix_unchecked(conjugate(u.matrix(), point.rho.matrix())), p.theta())
                };
                let step = 1e-4;
                let fd = (j_at(step) - 2.0 * j_at(0.0) + j_at(-step)) / (step * step);
                let cv = nalgebra::DVector::from_vec(coeffs);
                let analytic = (cv.transpose() * &h * &cv)[(0, 0)];
                assert!((fd - analytic).abs() < 1e-4 * analytic.abs().max(1e-2), "{fd} vs {analytic}");
            }
        }
    }

    #[test]
    fn hessian_rejects_non_critical_points() {
        let rho = Hermitian::diagonal(&[0.75, 0.25]);
        assert!(matches!(hessian_j(&rho, &sigma_x(), 1e-10), Err(Error::NotCritical(_))));
    }

    #[test]
    fn landscape_sizes_and_maximum() {
        for (n, seed) in [(3, 34), (4, 35)] {
            let p = random_problem(n, seed);
            let pts = enumerate_critical_points(&p).unwrap();
            assert_eq!(pts.len(), (1..=n).product::<usize>());
            // Brute force over all pairings of the two spectra.
            let lambda = p.rho0().spectrum().unwrap();
            let mu = p.theta().spectrum().unwrap();
            let brute = (0..n)
                .permutations(n)
                .map(|perm| perm.iter().enumerate().map(|(i, &j)| mu[i] * lambda[j]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((pts.last().unwrap().value - brute).abs() < 1e-12);
            assert!((max_cost(&p).unwrap() - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_spectrum_blocks_enumeration() {
        let p = crate::testutil::diagonal_two_level();
        let p = p.with_theta(Hermitian::diagonal(&[1.0, 1.0])).unwrap();
        assert!(matches!(enumerate_critical_points(&p), Err(Error::DegenerateSpectrum { .. })));
    }

    #[test]
    fn controllability_examples() {
        let h0 = SkewHermitian::new(CMatrix::from_row_slice(2, 2, &[c(0., 1.), c(0., 0.), c(0., 0.), c(0., -1.)])).unwrap();
        let h1 = SkewHermitian::new(CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(-1., 0.), c(0., 0.)])).unwrap();
        assert_eq!(lie_closure_dim(&h0, &h1), 3);
        assert!(check_controllability(&h0, &h1));
        assert!(!check_controllability(&h0, &SkewHermitian::zeros(2)));
        let scaled = SkewHermitian::new(h0.matrix() * c(-2.5, 0.0)).unwrap();
        assert_eq!(lie_closure_dim(&h0, &scaled), 1);
        // Diagonal generators commute: span stays inside the Cartan subalgebra.
        let d3a = SkewHermitian::new(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0., 1.), c(0., -1.), c(0., 0.)]))).unwrap();
        let d3b = SkewHermitian::new(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0., 1.), c(0., 1.), c(0., -2.)]))).unwrap();
        assert_eq!(lie_closure_dim(&d3a, &d3b), 2);
        assert!(random_problem(4, 36).controllable());
    }
}
