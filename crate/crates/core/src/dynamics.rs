//! Propagation under piecewise-constant controls and the first and second
//! variations of the end-point map.
//!
//! On each subinterval `[t_k, t_k+1)` the generator `H0 + u_k H1` is
//! constant, so the propagator is an exact product of matrix exponentials.
//! Time integrals over a subinterval of `U(t)^dag X U(t)` are evaluated in
//! closed form in the eigenbasis of the step generator, which makes the
//! sensitivities below the exact derivatives of the discretized end-point
//! map.
//!
//! The `*_ode` routines integrate the variational equations directly with
//! classical RK4 and share no code with the closed-form route; they exist as
//! an independent cross-check.

use num_complex::Complex64;
use rand::Rng;

use crate::endpoint::TangentVector;
use crate::error::{Error, Result};
use crate::lie::{bracket, conjugate, CMatrix, Hermitian, SkewSpectral, SpecialUnitary};
use crate::problem::QuantumProblem;

/// Real control, constant on each cell of a uniform grid over `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    horizon: f64,
    values: Vec<f64>,
}

impl ControlSignal {
    pub fn new(horizon: f64, values: Vec<f64>) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidHorizon(horizon));
        }
        if values.is_empty() {
            return Err(Error::InvalidControl("at least one subinterval is required".into()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidControl(format!("non-finite value at index {k}")));
        }
        Ok(Self { horizon, values })
    }

    pub fn zeros(horizon: f64, steps: usize) -> Result<Self> {
        Self::new(horizon, vec![0.0; steps])
    }

    /// Samples `f` at the subinterval midpoints.
    pub fn from_fn(horizon: f64, steps: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dt = horizon / steps as f64;
        Self::new(horizon, (0..steps).map(|k| f((k as f64 + 0.5) * dt)).collect())
    }

    /// Independent uniform samples in `[-amplitude, amplitude]`.
    pub fn uniform_noise(horizon: f64, steps: usize, amplitude: f64, rng: &mut impl Rng) -> Result<Self> {
        let values = (0..steps)
            .map(|_| {
                if amplitude > 0.0 {
                    rng.random_range(-amplitude..=amplitude)
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(horizon, values)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Grid nodes `t_k = kT/M`, `k = 0..=M`.
    pub fn grid_times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.len()).map(|k| k as f64 * dt).collect()
    }

    /// Subinterval midpoints.
    pub fn midpoints(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.len()).map(|k| (k as f64 + 0.5) * dt).collect()
    }

    /// `L^2([0,T])` norm, exact for piecewise-constant signals.
    pub fn norm(&self) -> f64 {
        (self.dt() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// `L^2([0,T])` inner product.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self.dt() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>())
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Self::new(self.horizon, values)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            horizon: self.horizon,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() || self.horizon != other.horizon {
            return Err(Error::GridMismatch {
                expected: self.len(),
                found: other.len(),
                horizon: self.horizon,
            });
        }
        Ok(())
    }
}

/// Propagators on the control grid and the terminal state.
#[derive(Debug, Clone)]
pub struct PropagationRecord {
    dt: f64,
    propagators: Vec<CMatrix>,
    steps: Vec<SkewSpectral>,
    terminal: Hermitian,
}

impl PropagationRecord {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.propagators.len()).map(|k| k as f64 * self.dt).collect()
    }

    /// `U(t_k)` for `k = 0..=M`.
    pub fn propagators(&self) -> &[CMatrix] {
        &self.propagators
    }

    pub fn propagator(&self, k: usize) -> SpecialUnitary {
        SpecialUnitary::from_matrix_unchecked(self.propagators[k].clone())
    }

    /// `U(T)`.
    pub fn final_propagator(&self) -> &CMatrix {
        self.propagators.last().expect("at least one propagator")
    }

    /// `U` at the midpoint of subinterval `k`.
    pub fn midpoint_propagator(&self, k: usize) -> CMatrix {
        self.steps[k].exp(0.5 * self.dt) * &self.propagators[k]
    }

    /// `rho(T) = U(T) rho0 U(T)^dag`.
    pub fn terminal_state(&self) -> &Hermitian {
        &self.terminal
    }

    /// Subinterval averages `(1/dt) int U(t)^dag X U(t) dt`, one per cell.
    pub fn averaged_conjugates(&self, x: &CMatrix) -> Vec<CMatrix> {
        self.steps
            .iter()
            .zip(&self.propagators)
            .map(|(step, u)| {
                let inner = step.averaged_conjugate(x, self.dt);
                u.adjoint() * inner * u
            })
            .collect()
    }

    /// `U(t)^dag X U(t)` sampled at the subinterval midpoints.
    pub fn midpoint_conjugates(&self, x: &CMatrix) -> Vec<CMatrix> {
        (0..self.steps())
            .map(|k| {
                let u = self.midpoint_propagator(k);
                u.adjoint() * x * u
            })
            .collect()
    }
}

fn generator(problem: &QuantumProblem, u: f64) -> CMatrix {
    problem.h0().matrix() + problem.h1().matrix() * Complex64::new(u, 0.0)
}

fn check_horizon(problem: &QuantumProblem, u: &ControlSignal) -> Result<()> {
    if u.horizon() != problem.horizon() {
        return Err(Error::GridMismatch {
            expected: u.len(),
            found: u.len(),
            horizon: problem.horizon(),
        });
    }
    Ok(())
}

/// Propagates `U' = (H0 + u H1) U`, `U(0) = I`, across the control grid.
pub fn propagate(problem: &QuantumProblem, u: &ControlSignal) -> Result<PropagationRecord> {
    check_horizon(problem, u)?;
    let n = problem.n();
    let dt = u.dt();
    let mut propagators = Vec::with_capacity(u.len() + 1);
    let mut steps: Vec<SkewSpectral> = Vec::with_capacity(u.len());
    let mut current = CMatrix::identity(n, n);
    propagators.push(current.clone());
    for (k, &value) in u.values().iter().enumerate() {
        let step = if k > 0 && value == u.values()[k - 1] {
            steps[k - 1].clone()
        } else {
            SkewSpectral::new(&generator(problem, value))?
        };
        current = step.exp(dt) * current;
        propagators.push(current.clone());
        steps.push(step);
    }
    let terminal = Hermitian::from_matrix_unchecked(conjugate(&current, problem.rho0().matrix()));
    Ok(PropagationRecord {
        dt,
        propagators,
        steps,
        terminal,
    })
}

/// `End(u) = rho(T)`.
pub fn end_point(problem: &QuantumProblem, u: &ControlSignal) -> Result<Hermitian> {
    Ok(propagate(problem, u)?.terminal.clone())
}

/// `dEnd(u) v`, from a record already propagated along `u`.
pub fn first_variation_along(problem: &QuantumProblem, record: &PropagationRecord, v: &ControlSignal) -> Result<TangentVector> {
    if v.len() != record.steps() {
        return Err(Error::GridMismatch {
            expected: record.steps(),
            found: v.len(),
            horizon: problem.horizon(),
        });
    }
    let n = problem.n();
    let drives = record.averaged_conjugates(problem.h1().matrix());
    let mut integral = CMatrix::zeros(n, n);
    for (k, drive) in drives.iter().enumerate() {
        integral += drive * Complex64::new(record.dt() * v.values()[k], 0.0);
    }
    let inner = bracket(&integral, problem.rho0().matrix());
    let y = conjugate(record.final_propagator(), &inner);
    Ok(TangentVector::from_parts_unchecked(record.terminal_state().clone(), y))
}

/// `dEnd(u) v = U(T) int [U^dag(s) H1 U(s), rho0] v(s) ds U(T)^dag`.
pub fn first_variation(problem: &QuantumProblem, u: &ControlSignal, v: &ControlSignal) -> Result<TangentVector> {
    u.check_grid(v)?;
    let record = propagate(problem, u)?;
    first_variation_along(problem, &record, v)
}

fn rk4_substeps(spectral_span: f64, dt: f64) -> usize {
    ((32.0 * dt * spectral_span).ceil() as usize).max(8)
}

// One classical RK4 step for a system of matrix ODEs.
fn rk4_step(state: &[CMatrix], h: f64, rhs: &impl Fn(&[CMatrix]) -> Vec<CMatrix>) -> Vec<CMatrix> {
    let axpy = |base: &[CMatrix], k: &[CMatrix], a: f64| -> Vec<CMatrix> {
        base.iter().zip(k).map(|(x, d)| x + d * Complex64::new(a, 0.0)).collect()
    };
    let k1 = rhs(state);
    let k2 = rhs(&axpy(state, &k1, 0.5 * h));
    let k3 = rhs(&axpy(state, &k2, 0.5 * h));
    let k4 = rhs(&axpy(state, &k3, h));
    state
        .iter()
        .enumerate()
        .map(|(i, x)| x + (&k1[i] + &k2[i] * Complex64::new(2.0, 0.0) + &k3[i] * Complex64::new(2.0, 0.0) + &k4[i]) * Complex64::new(h / 6.0, 0.0))
        .collect()
}

// Integrates the chain rho -> y -> r (up to `order` levels) of variational
// equations with RK4. Level i+1 is driven by `weight_i * v [H1, level_i]`.
fn integrate_variations(problem: &QuantumProblem, u: &ControlSignal, v: &ControlSignal, order: usize) -> Result<Vec<CMatrix>> {
    check_horizon(problem, u)?;
    u.check_grid(v)?;
    let n = problem.n();
    let h1 = problem.h1().matrix().clone();
    let mut state = vec![problem.rho0().matrix().clone()];
    state.extend((0..order).map(|_| CMatrix::zeros(n, n)));
    let dt = u.dt();
    for (k, &uk) in u.values().iter().enumerate() {
        let a = generator(problem, uk);
        let span = SkewSpectral::new(&a)?.frequency_span();
        let substeps = rk4_substeps(span, dt);
        let h = dt / substeps as f64;
        let vk = v.values()[k];
        let rhs = |s: &[CMatrix]| -> Vec<CMatrix> {
            let mut out = Vec::with_capacity(s.len());
            out.push(bracket(&a, &s[0]));
            for level in 1..s.len() {
                // Second derivative of rho along u + eps v carries a factor 2.
                let weight = level as f64;
                let drive = bracket(&h1, &s[level - 1]) * Complex64::new(weight * vk, 0.0);
                out.push(bracket(&a, &s[level]) + drive);
            }
            out
        };
        for _ in 0..substeps {
            state = rk4_step(&state, h, &rhs);
        }
    }
    Ok(state)
}

/// `dEnd(u) v` by RK4 integration of `y' = [H0 + uH1, y] + v [H1, rho]`.
pub fn first_variation_ode(problem: &QuantumProblem, u: &ControlSignal, v: &ControlSignal) -> Result<TangentVector> {
    let state = integrate_variations(problem, u, v, 1)?;
    let base = end_point(problem, u)?;
    Ok(TangentVector::from_parts_unchecked(base, state[1].clone()))
}

/// Second directional derivative `d^2/de^2 End(u + e v)` at `e = 0`, by RK4
/// integration of `r' = [H0 + uH1, r] + 2 v [H1, y]` coupled to the first
/// variation.
pub fn second_variation(problem: &QuantumProblem, u: &ControlSignal, v: &ControlSignal) -> Result<TangentVector> {
    let state = integrate_variations(problem, u, v, 2)?;
    let base = end_point(problem, u)?;
    Ok(TangentVector::from_parts_unchecked(base, state[2].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{expm_skew, SkewHermitian};
    use crate::testutil::{random_problem, sample_problem};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn control_signal_validation() {
        assert!(ControlSignal::new(1.0, vec![]).is_err());
        assert!(ControlSignal::new(-1.0, vec![0.0]).is_err());
        assert!(ControlSignal::new(1.0, vec![f64::NAN]).is_err());
        let u = ControlSignal::new(2.0, vec![1.0, -1.0, 3.0, 0.0]).unwrap();
        assert_eq!(u.dt(), 0.5);
        // sqrt(0.5 * (1 + 1 + 9)) equals the continuum L2 norm of the step function.
        assert!((u.norm() - (5.5f64).sqrt()).abs() < 1e-15);
        assert_eq!(u.midpoints(), vec![0.25, 0.75, 1.25, 1.75]);
        let w = ControlSignal::zeros(2.0, 3).unwrap();
        assert!(u.inner(&w).is_err());
    }

    #[test]
    fn zero_control_is_free_evolution() {
        let p = random_problem(3, 11);
        let u = ControlSignal::zeros(p.horizon(), 16).unwrap();
        let rec = propagate(&p, &u).unwrap();
        let free = expm_skew(p.h0(), p.horizon()).unwrap();
        assert!((rec.final_propagator() - free.matrix()).norm() < 1e-12);
        assert_eq!(rec.propagators().len(), 17);
        assert_eq!(rec.propagators()[0], CMatrix::identity(3, 3));
    }

    #[test]
    fn vanishing_drive_ignores_control() {
        let p = random_problem(2, 12);
        let p0 = QuantumProblem::new(
            p.h0().clone(),
            SkewHermitian::zeros(2),
            p.rho0().clone(),
            p.theta().clone(),
            p.horizon(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = ControlSignal::uniform_noise(p.horizon(), 10, 2.0, &mut rng).unwrap();
        let z = ControlSignal::zeros(p.horizon(), 10).unwrap();
        let a = end_point(&p0, &u).unwrap();
        let b = end_point(&p0, &z).unwrap();
        assert!((a.matrix() - b.matrix()).norm() < 1e-13);
        let v = ControlSignal::uniform_noise(p.horizon(), 10, 1.0, &mut rng).unwrap();
        assert!(first_variation(&p0, &u, &v).unwrap().matrix().norm() < 1e-14);
    }

    #[test]
    fn spectrum_is_conserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for seed in 0..10 {
            let p = random_problem(2 + seed as usize % 3, 100 + seed);
            let u = ControlSignal::uniform_noise(p.horizon(), 32, 3.0, &mut rng).unwrap();
            let rec = propagate(&p, &u).unwrap();
            let a = rec.terminal_state().spectrum().unwrap();
            let b = p.rho0().spectrum().unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_direction_gives_zero_variations() {
        let p = sample_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let u = ControlSignal::uniform_noise(p.horizon(), 8, 1.0, &mut rng).unwrap();
        let v = ControlSignal::zeros(p.horizon(), 8).unwrap();
        assert_eq!(first_variation(&p, &u, &v).unwrap().matrix().norm(), 0.0);
        assert_eq!(first_variation_ode(&p, &u, &v).unwrap().matrix().norm(), 0.0);
        assert_eq!(second_variation(&p, &u, &v).unwrap().matrix().norm(), 0.0);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let p = sample_problem();
        let u = ControlSignal::zeros(p.horizon(), 8).unwrap();
        let v = ControlSignal::zeros(p.horizon(), 9).unwrap();
        assert!(matches!(first_variation(&p, &u, &v), Err(Error::GridMismatch { .. })));
        let w = ControlSignal::zeros(p.horizon() * 2.0, 8).unwrap();
        assert!(propagate(&p, &w).is_err());
    }
}
