//! Matrix algebra on su(n) and the geometry of unitary orbits.
//!
//! Matrices are dense `nalgebra` complex matrices. The newtypes in this
//! module carry the structural invariants (skew-Hermitian and traceless,
//! Hermitian, special unitary) that the rest of the crate relies on.
//!
//! The orbit of a Hermitian matrix `rho0` with simple spectrum is
//! parameterized through the splitting `su(n) = h + p`, where `h` is the
//! stabilizer of `rho0` (traceless imaginary diagonal matrices in the
//! eigenbasis of `rho0`) and `p` its Hilbert-Schmidt complement (the
//! off-diagonal skew-Hermitian matrices in that basis).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex square matrix.
pub type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Numerical tolerances used when validating matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Structural tolerance for Hermiticity, skewness and tracelessness,
    /// relative to `max(1, |A|_F)`.
    pub algebraic: f64,
    /// Tolerance on `|U^dag U - I|_F` and `|det U - 1|`.
    pub unitary: f64,
    /// Smallest admissible gap between consecutive eigenvalues.
    pub spectral_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebraic: 1e-10,
            unitary: 1e-9,
            spectral_gap: 1e-8,
        }
    }
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() < 2 {
        return Err(Error::DimensionTooSmall(m.nrows()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(m.nrows())
}

fn scale(m: &CMatrix) -> f64 {
    m.norm().max(1.0)
}

/// Traceless skew-Hermitian matrix, an element of su(n).
#[derive(Debug, Clone, PartialEq)]
pub struct SkewHermitian(CMatrix);

impl SkewHermitian {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, Tolerances::default().algebraic)
    }

    pub fn with_tolerance(m: CMatrix, tol: f64) -> Result<Self> {
        check_square(&m)?;
        let s = scale(&m);
        let dev = (&m + m.adjoint()).norm();
        if dev > tol * s {
            return Err(Error::NotSkewHermitian(dev));
        }
        let tr = m.trace().norm();
        if tr > tol * s {
            return Err(Error::NotTraceless(tr));
        }
        Ok(Self(m))
    }

    /// Projects an arbitrary square matrix onto su(n): `(A - A^dag)/2` with
    /// the trace removed.
    pub fn project(m: &CMatrix) -> Self {
        let n = m.nrows();
        let mut a = (m - m.adjoint()) * Complex64::new(0.5, 0.0);
        let shift = a.trace() / n as f64;
        for i in 0..n {
            a[(i, i)] -= shift;
        }
        Self(a)
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Hermitian matrix (density matrices and observables).
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMatrix);

impl Hermitian {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, Tolerances::default().algebraic)
    }

    pub fn with_tolerance(m: CMatrix, tol: f64) -> Result<Self> {
        check_square(&m)?;
        let dev = (&m - m.adjoint()).norm();
        if dev > tol * scale(&m) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self(m))
    }

    /// Real diagonal matrix with the given entries.
    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Eigendecomposition with eigenvalues sorted in descending order.
    pub fn eigen(&self) -> Result<HermitianEigen> {
        hermitian_eigen(&self.0)
    }

    /// Eigenvalues in descending order.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        Ok(self.eigen()?.values)
    }
}

/// Element of SU(n).
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialUnitary(CMatrix);

impl SpecialUnitary {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, Tolerances::default().unitary)
    }

    pub fn with_tolerance(m: CMatrix, tol: f64) -> Result<Self> {
        check_square(&m)?;
        let dev = unitarity_defect(&m);
        if dev > tol {
            return Err(Error::NotSpecialUnitary(dev));
        }
        let det_dev = (m.clone().determinant() - Complex64::new(1.0, 0.0)).norm();
        if det_dev > tol {
            return Err(Error::NotSpecialUnitary(det_dev));
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// `|U^dag U - I|_F`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - CMatrix::identity(n, n)).norm()
}

/// `AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(bracket(a, b))
}

/// Unchecked commutator for internal use on matrices of known shape.
pub(crate) fn bracket(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Hilbert-Schmidt product `tr(A^dag B)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `tr(AB)` without forming the product.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `U X U^dag`.
pub fn conjugate(u: &CMatrix, x: &CMatrix) -> CMatrix {
    u * x * u.adjoint()
}

/// `U^dag X U`.
pub fn conjugate_inverse(u: &CMatrix, x: &CMatrix) -> CMatrix {
    u.adjoint() * x * u
}

/// Eigenpairs of a Hermitian matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Columns are orthonormal eigenvectors.
    pub vectors: CMatrix,
    pub values: Vec<f64>,
}

impl HermitianEigen {
    /// Smallest gap between consecutive eigenvalues (infinite for n = 1).
    pub fn min_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| (w[0] - w[1]).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Hermitian eigendecomposition. The input is symmetrized first.
pub fn hermitian_eigen(m: &CMatrix) -> Result<HermitianEigen> {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000).ok_or(Error::EigenFailure)?;
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEigen { vectors, values })
}

/// Spectral form of a skew-Hermitian generator, `A = -i W diag(w) W^dag`.
///
/// Once built, exponentials `exp(tA)` and averaged conjugations are cheap.
#[derive(Debug, Clone)]
pub struct SkewSpectral {
    vectors: CMatrix,
    freqs: Vec<f64>,
}

impl SkewSpectral {
    pub fn new(a: &CMatrix) -> Result<Self> {
        let h = a * I;
        let eig = hermitian_eigen(&h)?;
        Ok(Self {
            vectors: eig.vectors,
            freqs: eig.values,
        })
    }

    pub fn dim(&self) -> usize {
        self.freqs.len()
    }

    /// Spread `w_max - w_min`, the spectral radius of `ad_A`.
    pub fn frequency_span(&self) -> f64 {
        self.freqs.first().copied().unwrap_or(0.0) - self.freqs.last().copied().unwrap_or(0.0)
    }

    /// `exp(tA)`.
    pub fn exp(&self, t: f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, w) in self.freqs.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -t * w);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// `exp(-sA) X exp(sA)`.
    pub fn conjugate(&self, x: &CMatrix, s: f64) -> CMatrix {
        self.filtered(x, |d| Complex64::from_polar(1.0, s * d))
    }

    /// Average of `exp(-sA) X exp(sA)` over `s` in `[0, span]`, computed in
    /// closed form in the eigenbasis of `A`.
    pub fn averaged_conjugate(&self, x: &CMatrix, span: f64) -> CMatrix {
        self.filtered(x, |d| phase_average(span * d))
    }

    // Applies an entrywise kernel k(w_a - w_b) to X expressed in the eigenbasis.
    fn filtered(&self, x: &CMatrix, kernel: impl Fn(f64) -> Complex64) -> CMatrix {
        let w = &self.vectors;
        let mut b = w.adjoint() * x * w;
        let n = self.dim();
        for a in 0..n {
            for c in 0..n {
                if a != c {
                    b[(a, c)] *= kernel(self.freqs[a] - self.freqs[c]);
                }
            }
        }
        w * b * w.adjoint()
    }
}

/// `(exp(ix) - 1)/(ix)`, the mean of `exp(i s)` over `s` in `[0, x]`.
fn phase_average(x: f64) -> Complex64 {
    let half = 0.5 * x;
    let sinc = if half.abs() < 1e-4 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    Complex64::from_polar(sinc, half)
}

/// `exp(tA)` for `A` in su(n), by unitary diagonalization of the Hermitian
/// matrix `iA`.
pub fn expm_skew(a: &SkewHermitian, t: f64) -> Result<SpecialUnitary> {
    let spectral = SkewSpectral::new(a.matrix())?;
    Ok(SpecialUnitary::from_matrix_unchecked(spectral.exp(t)))
}

/// Eigenframe of `rho0` and the induced `h + p` splitting of su(n).
#[derive(Debug, Clone)]
pub struct OrbitSplitting {
    basis: CMatrix,
    eigenvalues: Vec<f64>,
}

impl OrbitSplitting {
    pub fn new(rho0: &Hermitian, gap_tol: f64) -> Result<Self> {
        let eig = rho0.eigen()?;
        let gap = eig.min_gap();
        if gap < gap_tol {
            return Err(Error::DegenerateSpectrum { gap, tol: gap_tol });
        }
        Ok(Self {
            basis: eig.vectors,
            eigenvalues: eig.values,
        })
    }

    /// Unitary whose columns are eigenvectors of `rho0`.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// Eigenvalues of `rho0`, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn dim_h(&self) -> usize {
        self.n() - 1
    }

    /// Orbit dimension `N = n^2 - n`.
    pub fn dim_p(&self) -> usize {
        self.n() * self.n() - self.n()
    }

    /// Canonical orthonormal basis of `p` in the original coordinates,
    /// `V E_j V^dag`.
    pub fn p_basis(&self) -> Vec<CMatrix> {
        p_basis(self.n())
            .iter()
            .map(|e| conjugate(&self.basis, e))
            .collect()
    }
}

/// Builds the splitting for `rho0` with the default gap tolerance.
pub fn build_splitting(rho0: &Hermitian) -> Result<OrbitSplitting> {
    OrbitSplitting::new(rho0, Tolerances::default().spectral_gap)
}

/// Canonical orthonormal basis of the off-diagonal skew-Hermitian matrices:
/// for each `j < k` (lexicographic), `(E_jk - E_kj)/sqrt 2` followed by
/// `i(E_jk + E_kj)/sqrt 2`.
pub fn p_basis(n: usize) -> Vec<CMatrix> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n - n);
    for j in 0..n {
        for k in (j + 1)..n {
            let mut re = CMatrix::zeros(n, n);
            re[(j, k)] = Complex64::new(r, 0.0);
            re[(k, j)] = Complex64::new(-r, 0.0);
            out.push(re);
            let mut im = CMatrix::zeros(n, n);
            im[(j, k)] = Complex64::new(0.0, r);
            im[(k, j)] = Complex64::new(0.0, r);
            out.push(im);
        }
    }
    out
}

/// Coordinates of an off-diagonal skew-Hermitian matrix (in the frame where
/// `p` is off-diagonal) with respect to [`p_basis`].
pub fn p_coordinates(omega_in_frame: &CMatrix) -> Vec<f64> {
    p_basis(omega_in_frame.nrows())
        .iter()
        .map(|e| hs_inner(e, omega_in_frame).re)
        .collect()
}

/// Projection of `omega` onto `p_rho = Ad_U p`, for `rho = U rho0 U^dag`.
pub fn project_p(omega: &SkewHermitian, split: &OrbitSplitting, u: &SpecialUnitary) -> SkewHermitian {
    let frame = u.matrix() * split.basis();
    let mut x = conjugate_inverse(&frame, omega.matrix());
    for i in 0..x.nrows() {
        x[(i, i)] = Complex64::new(0.0, 0.0);
    }
    SkewHermitian::from_matrix_unchecked(conjugate(&frame, &x))
}

/// Inverts `ad_rho` on a tangent vector expressed in an eigenframe of `rho`:
/// returns the off-diagonal `Omega` with `[diag(lambda), Omega] = Y`.
pub(crate) fn invert_ad_in_frame(y: &CMatrix, eigenvalues: &[f64]) -> CMatrix {
    let n = y.nrows();
    CMatrix::from_fn(n, n, |j, k| {
        if j == k {
            Complex64::new(0.0, 0.0)
        } else {
            y[(j, k)] / (eigenvalues[j] - eigenvalues[k])
        }
    })
}

/// Largest diagonal modulus of a matrix, used to test tangency in an eigenframe.
pub(crate) fn max_diagonal(m: &CMatrix) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].norm()).fold(0.0, f64::max)
}

/// Invariant metric evaluated in an eigenframe of the base point:
/// `sum_{j != k} conj(Y1_jk) Y2_jk / (lambda_j - lambda_k)^2`.
pub fn metric_in_frame(y1: &CMatrix, y2: &CMatrix, frame: &CMatrix, eigenvalues: &[f64]) -> f64 {
    let a = conjugate_inverse(frame, y1);
    let b = conjugate_inverse(frame, y2);
    let n = eigenvalues.len();
    let mut acc = 0.0;
    for j in 0..n {
        for k in 0..n {
            if j != k {
                let gap = eigenvalues[j] - eigenvalues[k];
                acc += (a[(j, k)].conj() * b[(j, k)]).re / (gap * gap);
            }
        }
    }
    acc
}

/// Invariant Riemannian metric on the tangent space of the orbit at `rho`.
///
/// For `y_i = [rho, Omega_i]` this equals `tr(Omega_1^p^dag Omega_2^p)`.
pub fn metric(y1: &CMatrix, y2: &CMatrix, rho: &Hermitian, gap_tol: f64) -> Result<f64> {
    let eig = rho.eigen()?;
    let gap = eig.min_gap();
    if gap < gap_tol {
        return Err(Error::DegenerateSpectrum { gap, tol: gap_tol });
    }
    Ok(metric_in_frame(y1, y2, &eig.vectors, &eig.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sigma_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    fn random_matrix(n: usize, rng: &mut impl Rng) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn commutator_examples() {
        let a = random_matrix(3, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(commutator(&a, &a).unwrap().norm() < 1e-15);

        let d1 = Hermitian::diagonal(&[0.75, 0.25]).into_matrix();
        let d2 = Hermitian::diagonal(&[1.0, -1.0]).into_matrix();
        assert_eq!(commutator(&d1, &d2).unwrap().norm(), 0.0);

        let out = commutator(&d1, &sigma_x()).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0.5, 0.), c(-0.5, 0.), c(0., 0.)]);
        assert!((out - expected).norm() < 1e-15);
    }

    #[test]
    fn commutator_dimension_mismatch() {
        let err = commutator(&CMatrix::zeros(2, 2), &CMatrix::zeros(3, 3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn type_validation() {
        assert!(SkewHermitian::new(sigma_x()).is_err());
        assert!(Hermitian::new(sigma_x()).is_ok());
        let traced = CMatrix::from_row_slice(2, 2, &[c(0., 1.), c(0., 0.), c(0., 0.), c(0., 1.)]);
        assert!(matches!(SkewHermitian::new(traced), Err(Error::NotTraceless(_))));
        assert!(matches!(
            Hermitian::new(CMatrix::zeros(1, 1)),
            Err(Error::DimensionTooSmall(1))
        ));
        let mut nan = CMatrix::zeros(2, 2);
        nan[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(Hermitian::new(nan), Err(Error::NonFinite)));
        assert!(SpecialUnitary::new(CMatrix::identity(3, 3) * c(2.0, 0.0)).is_err());
    }

    #[test]
    fn expm_identity_at_zero_time() {
        let a = SkewHermitian::project(&random_matrix(3, &mut ChaCha8Rng::seed_from_u64(2)));
        let u = expm_skew(&a, 0.0).unwrap();
        assert!((u.matrix() - CMatrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn expm_diagonal_pi_is_minus_identity() {
        let pi = std::f64::consts::PI;
        let a = SkewHermitian::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0., pi), c(0., 0.), c(0., 0.), c(0., -pi)],
        ))
        .unwrap();
        let u = expm_skew(&a, 1.0).unwrap();
        assert!((u.matrix() + CMatrix::identity(2, 2)).norm() < 1e-9);
    }

    #[test]
    fn expm_group_inverse_and_special_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(2..6);
            let mut a = SkewHermitian::project(&random_matrix(n, &mut rng)).into_matrix();
            let norm = a.norm();
            let target = rng.random_range(0.0..50.0);
            a *= c(target / norm, 0.0);
            let a = SkewHermitian::new(a).unwrap();
            let t = 1.0;
            let fwd = expm_skew(&a, t).unwrap();
            let back = expm_skew(&a, -t).unwrap();
            assert!((fwd.matrix() * back.matrix() - CMatrix::identity(n, n)).norm() < 1e-12);
            SpecialUnitary::new(fwd.into_matrix()).expect("special unitary");
        }
    }

    #[test]
    fn averaged_conjugate_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = SkewHermitian::project(&random_matrix(3, &mut rng)).into_matrix() * c(3.0, 0.0);
        let x = random_matrix(3, &mut rng);
        let spec = SkewSpectral::new(&a).unwrap();
        let span = 0.7;
        // Composite Simpson on 2000 panels.
        let m = 2000;
        let h = span / m as f64;
        let mut acc = CMatrix::zeros(3, 3);
        for i in 0..=m {
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += spec.conjugate(&x, i as f64 * h) * c(w, 0.0);
        }
        acc *= c(h / 3.0 / span, 0.0);
        assert!((spec.averaged_conjugate(&x, span) - acc).norm() < 1e-10);
        // conjugate() agrees with explicit exponentials.
        let s = 0.3;
        let explicit = spec.exp(-s) * &x * spec.exp(s);
        assert!((spec.conjugate(&x, s) - explicit).norm() < 1e-12);
    }

    #[test]
    fn splitting_examples() {
        let split = build_splitting(&Hermitian::diagonal(&[0.75, 0.25])).unwrap();
        assert_eq!(split.eigenvalues(), &[0.75, 0.25]);
        assert_eq!(split.dim_p(), 2);
        assert_eq!(split.dim_h(), 1);
        // Eigenvectors of a diagonal matrix are unit vectors up to phase.
        for j in 0..2 {
            assert_abs_diff_eq!(split.basis()[(j, j)].norm(), 1.0, epsilon = 1e-14);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(3, &mut rng);
        let h = Hermitian::new((&m + m.adjoint()) * c(0.5, 0.0)).unwrap();
        let split = build_splitting(&h).unwrap();
        assert_eq!(split.dim_p(), 6);
        assert_eq!(split.dim_p() + split.dim_h(), 8);
        let d = conjugate_inverse(split.basis(), h.matrix());
        for j in 0..3 {
            for k in 0..3 {
                if j != k {
                    assert!(d[(j, k)].norm() < 1e-12);
                }
            }
        }

        let err = build_splitting(&Hermitian::diagonal(&[0.5, 0.5])).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpectrum { .. }));
    }

    #[test]
    fn p_basis_is_orthonormal() {
        let b = p_basis(4);
        assert_eq!(b.len(), 12);
        for (i, x) in b.iter().enumerate() {
            SkewHermitian::new(x.clone()).unwrap();
            for (j, y) in b.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(hs_inner(x, y).re, expected, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn project_p_examples() {
        let rho0 = Hermitian::diagonal(&[0.75, 0.25]);
        let split = build_splitting(&rho0).unwrap();
        let id = SpecialUnitary::identity(2);
        let h_elem = SkewHermitian::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0., 1.), c(0., 0.), c(0., 0.), c(0., -1.)],
        ))
        .unwrap();
        assert!(project_p(&h_elem, &split, &id).matrix().norm() < 1e-15);

        let off = SkewHermitian::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0., 0.), c(1., 2.), c(-1., 2.), c(0., 0.)],
        ))
        .unwrap();
        assert!((project_p(&off, &split, &id).matrix() - off.matrix()).norm() < 1e-15);
    }

    #[test]
    fn rho_commutators_lie_in_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random_matrix(3, &mut rng);
        let rho0 = Hermitian::new((&m + m.adjoint()) * c(0.5, 0.0)).unwrap();
        let split = build_splitting(&rho0).unwrap();
        let id = SpecialUnitary::identity(3);
        for _ in 0..20 {
            let g = random_matrix(3, &mut rng);
            // [rho0, gamma] is skew-Hermitian only for Hermitian gamma; take the su(n) part.
            let gamma = (&g + g.adjoint()) * c(0.5, 0.0);
            let comm = SkewHermitian::new(bracket(rho0.matrix(), &gamma)).unwrap();
            let projected = project_p(&comm, &split, &id);
            assert!((projected.matrix() - comm.matrix()).norm() < 1e-12);
            // Orthogonal to every element of h, built as V diag(i t) V^dag.
            let h = conjugate(split.basis(), &CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                c(0., 1.),
                c(0., -2.),
                c(0., 1.),
            ])));
            assert!(hs_inner(&h, comm.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn metric_examples() {
        let rho = Hermitian::diagonal(&[0.75, 0.25]);
        let omega = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(-1., 0.), c(0., 0.)]);
        let y = bracket(rho.matrix(), &omega);
        assert_abs_diff_eq!(metric(&y, &y, &rho, 1e-8).unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hs_inner(&omega, &omega).re, 2.0);
        assert_eq!(metric(&y, &CMatrix::zeros(2, 2), &rho, 1e-8).unwrap(), 0.0);
        assert!(metric(&y, &y, &Hermitian::diagonal(&[0.5, 0.5]), 1e-8).is_err());
    }
}
