//! Adjoint of the end-point differential, the controllability Gramian and
//! the regular/singular classification of controls.
//!
//! A tangent vector `z` at `rho(T) = U(T) rho0 U(T)^dag` is written as
//! `z = U(T) [rho0, Omega0] U(T)^dag` with `Omega0` in `p`. Pairing it with
//! `dEnd(u) v` in the invariant metric gives `(Phi_z, v)` in `L^2`, where
//!
//! ```text
//! Phi_z(t) = tr(Omega0 U(t)^dag H1 U(t)).
//! ```
//!
//! Switching functions are stored as subinterval averages of `Phi_z`, which
//! is exactly the `L^2` adjoint of `dEnd(u)` restricted to piecewise-constant
//! directions.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dynamics::{ControlSignal, PropagationRecord};
use crate::error::{Error, Result};
use crate::lie::{conjugate, conjugate_inverse, invert_ad_in_frame, max_diagonal, metric_in_frame, trace_product, CMatrix, Hermitian, SkewHermitian};
use crate::problem::QuantumProblem;

/// Tangent vector to the orbit at `base`, stored as a traceless Hermitian
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: Hermitian,
    matrix: CMatrix,
}

impl TangentVector {
    /// Checks that `y` is traceless Hermitian with zero diagonal in an
    /// eigenbasis of `base`.
    pub fn new(base: Hermitian, y: CMatrix, tol: f64) -> Result<Self> {
        let y = Hermitian::with_tolerance(y, tol)?.into_matrix();
        let eig = base.eigen()?;
        let in_frame = conjugate_inverse(&eig.vectors, &y);
        let residual = max_diagonal(&in_frame);
        if residual > tol * y.norm().max(1.0) {
            return Err(Error::NotTangent(residual));
        }
        Ok(Self { base, matrix: y })
    }

    pub(crate) fn from_parts_unchecked(base: Hermitian, matrix: CMatrix) -> Self {
        Self { base, matrix }
    }

    pub fn base(&self) -> &Hermitian {
        &self.base
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Invariant metric at the base point.
    pub fn inner(&self, other: &TangentVector, gap_tol: f64) -> Result<f64> {
        crate::lie::metric(&self.matrix, &other.matrix, &self.base, gap_tol)
    }
}

/// Switching function sampled as one value per control subinterval.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingFunction {
    horizon: f64,
    samples: Vec<f64>,
}

impl SwitchingFunction {
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn norm(&self) -> f64 {
        let dt = self.horizon / self.samples.len() as f64;
        (dt * self.samples.iter().map(|x| x * x).sum::<f64>()).sqrt()
    }

    pub fn into_control(self) -> ControlSignal {
        ControlSignal::new(self.horizon, self.samples).expect("switching function samples are finite")
    }
}

/// Recovers `Omega0` in `p` (original coordinates) with
/// `z = U(T) [rho0, Omega0] U(T)^dag`.
pub fn tangent_generator(problem: &QuantumProblem, record: &PropagationRecord, z: &CMatrix) -> Result<SkewHermitian> {
    let split = problem.splitting()?;
    let frame = record.final_propagator() * split.basis();
    let in_frame = conjugate_inverse(&frame, z);
    let residual = max_diagonal(&in_frame);
    if residual > problem.tolerances().algebraic * z.norm().max(1.0) {
        return Err(Error::NotTangent(residual));
    }
    let omega = invert_ad_in_frame(&in_frame, split.eigenvalues());
    Ok(SkewHermitian::from_matrix_unchecked(conjugate(split.basis(), &omega)))
}

// Real parts of tr(Omega K_k) for every kernel.
fn pair_with(omega: &CMatrix, kernels: &[CMatrix]) -> Vec<f64> {
    kernels.iter().map(|k| trace_product(omega, k).re).collect()
}

/// Switching function of a tangent vector `z` at the terminal state.
pub fn switching_function(problem: &QuantumProblem, record: &PropagationRecord, z: &TangentVector) -> Result<SwitchingFunction> {
    let omega = tangent_generator(problem, record, z.matrix())?;
    let kernels = record.averaged_conjugates(problem.h1().matrix());
    Ok(SwitchingFunction {
        horizon: problem.horizon(),
        samples: pair_with(omega.matrix(), &kernels),
    })
}

/// `dEnd(u)^* z`, as a control signal on the same grid.
pub fn adjoint_differential(problem: &QuantumProblem, record: &PropagationRecord, z: &TangentVector) -> Result<ControlSignal> {
    Ok(switching_function(problem, record, z)?.into_control())
}

/// Metric-orthonormal basis `z_j = U(T) [rho0, V E_j V^dag] U(T)^dag` of the
/// tangent space at `rho(T)`.
pub fn tangent_basis(problem: &QuantumProblem, record: &PropagationRecord) -> Result<Vec<TangentVector>> {
    let split = problem.splitting()?;
    let rho0 = problem.rho0().matrix();
    Ok(split
        .p_basis()
        .iter()
        .map(|e| {
            let y = conjugate(record.final_propagator(), &(rho0 * e - e * rho0));
            TangentVector::from_parts_unchecked(record.terminal_state().clone(), y)
        })
        .collect())
}

/// Metric at `rho(T)` evaluated in the frame transported from `rho0`.
pub fn terminal_metric(problem: &QuantumProblem, record: &PropagationRecord, y1: &CMatrix, y2: &CMatrix) -> Result<f64> {
    let split = problem.splitting()?;
    let frame = record.final_propagator() * split.basis();
    Ok(metric_in_frame(y1, y2, &frame, split.eigenvalues()))
}

/// Gramian in the tangent basis together with its spectrum (ascending).
#[derive(Debug, Clone)]
pub struct GramianMatrix {
    matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl GramianMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        Self { matrix, eigenvalues }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `lambda_min / lambda_max`, zero for the zero matrix.
    pub fn condition_ratio(&self) -> f64 {
        if self.lambda_max() > 0.0 {
            self.lambda_min() / self.lambda_max()
        } else {
            0.0
        }
    }

    /// Quadratic form `c^T G c` in basis coordinates.
    pub fn quadratic_form(&self, coords: &[f64]) -> f64 {
        let c = nalgebra::DVector::from_column_slice(coords);
        (c.transpose() * &self.matrix * &c)[(0, 0)]
    }

    /// Symmetric positive semidefinite square root.
    pub fn sqrt(&self) -> DMatrix<f64> {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
    }
}

/// Sample matrix `S[j][k] = Phi_{z_j}` on cell `k`, for the basis of
/// [`tangent_basis`]. The Gramian is `dt S S^T`.
pub fn switching_samples(problem: &QuantumProblem, record: &PropagationRecord) -> Result<DMatrix<f64>> {
    let split = problem.splitting()?;
    let kernels = record.averaged_conjugates(problem.h1().matrix());
    let basis = split.p_basis();
    let mut s = DMatrix::zeros(basis.len(), kernels.len());
    for (j, e) in basis.iter().enumerate() {
        for (k, value) in pair_with(e, &kernels).into_iter().enumerate() {
            s[(j, k)] = value;
        }
    }
    Ok(s)
}

/// Controllability Gramian `G(u) = dEnd dEnd^*` in the metric-orthonormal
/// tangent basis at `rho(T)`.
pub fn gramian(problem: &QuantumProblem, record: &PropagationRecord) -> Result<GramianMatrix> {
    let s = switching_samples(problem, record)?;
    Ok(GramianMatrix::from_matrix(&s * s.transpose() * record.dt()))
}

/// Outcome of the rank test on the Gramian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlClass {
    Regular,
    Singular { corank: usize },
}

impl ControlClass {
    pub fn is_regular(&self) -> bool {
        matches!(self, ControlClass::Regular)
    }
}

/// Relative spectral-gap test: eigenvalues below `eps_sing * lambda_max`
/// count towards the corank.
pub fn classify_control(gramian: &GramianMatrix, eps_sing: f64) -> ControlClass {
    let lmax = gramian.lambda_max();
    if lmax <= 0.0 {
        return ControlClass::Singular { corank: gramian.dim() };
    }
    let corank = gramian.eigenvalues().iter().filter(|&&l| l / lmax < eps_sing).count();
    if corank == 0 {
        ControlClass::Regular
    } else {
        ControlClass::Singular { corank }
    }
}

/// Direction `Omega0` in `p` with unit Frobenius norm minimizing
/// `|Phi_{Omega0}|_{L^2}`, and the attained minimum.
#[derive(Debug, Clone)]
pub struct SingularityWitness {
    pub omega: SkewHermitian,
    /// `|Phi_{Omega0}|_{L^2}`, which equals `sqrt(lambda_min(G))`.
    pub residual: f64,
}

/// Least-squares search for the witness direction, returned regardless of
/// its residual.
pub fn least_switching_direction(problem: &QuantumProblem, record: &PropagationRecord) -> Result<SingularityWitness> {
    let split = problem.splitting()?;
    let s = switching_samples(problem, record)?;
    let dim = s.nrows();
    // SVD of S^T, padded so that the full right singular basis is available.
    let rows = s.ncols().max(dim);
    let mut st = DMatrix::zeros(rows, dim);
    st.view_mut((0, 0), (s.ncols(), dim)).copy_from(&s.transpose());
    let svd = st.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (idx, sigma) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty spectrum");
    let basis = split.p_basis();
    let n = problem.n();
    let mut omega = CMatrix::zeros(n, n);
    for (j, e) in basis.iter().enumerate() {
        omega += e * num_complex::Complex64::new(v_t[(idx, j)], 0.0);
    }
    Ok(SingularityWitness {
        omega: SkewHermitian::from_matrix_unchecked(omega),
        residual: sigma * record.dt().sqrt(),
    })
}

/// Returns `Omega0` in `p`, `|Omega0|_F = 1`, whose switching function
/// vanishes to within `tol`, if one exists.
pub fn singularity_witness(problem: &QuantumProblem, record: &PropagationRecord, tol: f64) -> Result<Option<SingularityWitness>> {
    let w = least_switching_direction(problem, record)?;
    Ok((w.residual < tol).then_some(w))
}

/// `tr(Omega0 U(t)^dag H1 U(t))` at the subinterval midpoints.
pub fn witness_trace_samples(problem: &QuantumProblem, record: &PropagationRecord, omega: &SkewHermitian) -> Vec<f64> {
    pair_with(omega.matrix(), &record.midpoint_conjugates(problem.h1().matrix()))
}
