//! Gradient ascent of the cost functional in control space.
//!
//! The flow `du/ds = grad J(u)` is discretized by explicit Euler steps in `s`
//! with a monotone backtracking line search. Updates use the sampled
//! functional gradient, so the discrete iteration approximates the `L^2`
//! flow as the grid is refined; the coordinate gradient of the discretized
//! cost is `dt` times the same samples.
//!
//! ```
//! use orbitflow::{generate::ProblemSpec, flow::{run_flow, FlowConfig, FlowStatus}, ControlSignal};
//!
//! let problem = ProblemSpec::new(2).generate(3).unwrap();
//! let u0 = ControlSignal::from_fn(problem.horizon(), 32, |t| (3.0 * t).sin()).unwrap();
//! let (trace, report) = run_flow(&problem, &u0, &FlowConfig::default()).unwrap();
//! assert!(trace.is_monotone());
//! assert!(report.gap < 1e-4);
//! assert_eq!(report.status, FlowStatus::GlobalMax);
//! ```

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{propagate, second_variation, ControlSignal, PropagationRecord};
use crate::endpoint::{adjoint_differential, classify_control, gramian, ControlClass};
use crate::error::{Error, Result};
use crate::lie::{bracket, conjugate_inverse, trace_product, CMatrix};
use crate::objective::{cost, criticality, enumerate_critical_points, grad_j, hessian_in_frame, symmetric_spectrum};
use crate::problem::QuantumProblem;

/// Step control and stopping rules.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    /// Initial step `eta` in flow-parameter units.
    pub step: f64,
    /// Upper bound on `eta` when it grows after repeated acceptances.
    pub max_step: f64,
    pub max_iters: usize,
    /// Stop once `|grad J|_H` falls below this.
    pub grad_tol: f64,
    /// Backtracking factor `beta` in `(0, 1)`.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Kinematic test threshold on `|[rho(T), theta]|_F`.
    pub comm_tol: f64,
    /// Allowed gap to the global maximum for a `GlobalMax` verdict.
    pub gap_tol: f64,
    /// Relative eigenvalue threshold for the Gramian rank test.
    pub eps_sing: f64,
    /// Seed for the random directions of the curvature probe.
    pub seed: u64,
    /// Number of random directions in the curvature probe.
    pub curvature_samples: usize,
    /// Keep a copy of the control every this many iterations (0: never).
    pub snapshot_every: usize,
    /// Finite-difference gradient check every this many iterations (0: never).
    pub fd_check_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_step: 64.0,
            max_iters: 5000,
            grad_tol: 1e-7,
            backtrack: 0.5,
            max_backtracks: 40,
            comm_tol: 1e-6,
            gap_tol: 1e-4,
            eps_sing: 1e-8,
            seed: 0,
            curvature_samples: 8,
            snapshot_every: 0,
            fd_check_every: 0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {x}")))
            }
        };
        positive("step", self.step)?;
        positive("max_step", self.max_step)?;
        positive("grad_tol", self.grad_tol)?;
        positive("comm_tol", self.comm_tol)?;
        positive("gap_tol", self.gap_tol)?;
        positive("eps_sing", self.eps_sing)?;
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidConfig(format!("backtrack must lie in (0, 1), got {}", self.backtrack)));
        }
        if self.step > self.max_step {
            return Err(Error::InvalidConfig("step exceeds max_step".into()));
        }
        Ok(())
    }
}

// Samples of tr(M K_k) for the drive kernels of a propagation record.
fn gradient_from_record(problem: &QuantumProblem, record: &PropagationRecord, horizon: f64) -> Result<ControlSignal> {
    let theta_back = conjugate_inverse(record.final_propagator(), problem.theta().matrix());
    let m = bracket(problem.rho0().matrix(), &theta_back);
    let kernels = record.averaged_conjugates(problem.h1().matrix());
    ControlSignal::new(horizon, kernels.iter().map(|k| trace_product(&m, k).re).collect())
}

/// Functional gradient `t -> Re tr([rho0, U(T)^dag theta U(T)] U(t)^dag H1 U(t))`,
/// averaged over each subinterval.
pub fn grad_cost_functional(problem: &QuantumProblem, u: &ControlSignal) -> Result<ControlSignal> {
    let record = propagate(problem, u)?;
    gradient_from_record(problem, &record, u.horizon())
}

/// The same gradient computed as `dEnd(u)^* grad J(rho(T))`.
pub fn grad_cost_via_adjoint(problem: &QuantumProblem, u: &ControlSignal) -> Result<ControlSignal> {
    let record = propagate(problem, u)?;
    adjoint_differential(problem, &record, &grad_j(record.terminal_state(), problem.theta()))
}

/// `J(u) = Re tr(End(u) theta)`.
pub fn cost_functional(problem: &QuantumProblem, u: &ControlSignal) -> Result<f64> {
    Ok(cost(propagate(problem, u)?.terminal_state(), problem.theta()))
}

/// Central differences of the discretized cost in every coordinate `u_k`.
pub fn fd_coordinate_gradient(problem: &QuantumProblem, u: &ControlSignal, eps: f64) -> Result<Vec<f64>> {
    let mut probe = u.clone();
    let mut out = Vec::with_capacity(u.len());
    for k in 0..u.len() {
        let base = u.values()[k];
        probe.values_mut()[k] = base + eps;
        let plus = cost_functional(problem, &probe)?;
        probe.values_mut()[k] = base - eps;
        let minus = cost_functional(problem, &probe)?;
        probe.values_mut()[k] = base;
        out.push((plus - minus) / (2.0 * eps));
    }
    Ok(out)
}

/// `max_k |fd_k - dt g_k| / max_k |dt g_k|`, comparing finite differences
/// against the `dt`-scaled functional gradient. Returns 0 when both vanish.
pub fn fd_gradient_error(problem: &QuantumProblem, u: &ControlSignal, eps: f64) -> Result<f64> {
    let g = grad_cost_functional(problem, u)?;
    let fd = fd_coordinate_gradient(problem, u, eps)?;
    Ok(relative_error(&fd, &g.scaled(u.dt()).values().to_vec()))
}

/// Central differences at `eps = 1e-5` carry an absolute error of order
/// `1e-10` from rounding, so coordinate gradients below this floor cannot be
/// checked to `1e-3` relative accuracy.
pub const FD_NOISE_FLOOR: f64 = 1e-6;

/// Like [`fd_gradient_error`], but normalized by at least `floor`.
pub fn fd_gradient_error_floored(problem: &QuantumProblem, u: &ControlSignal, eps: f64, floor: f64) -> Result<f64> {
    let g = grad_cost_functional(problem, u)?.scaled(u.dt());
    let fd = fd_coordinate_gradient(problem, u, eps)?;
    let diff = fd.iter().zip(g.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = g.values().iter().fold(floor, |m, x| m.max(x.abs()));
    Ok(diff / scale)
}

pub(crate) fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Iterate of the discrete flow.
#[derive(Debug, Clone)]
pub struct FlowState {
    control: ControlSignal,
    record: PropagationRecord,
    cost: f64,
    gradient: ControlSignal,
    grad_norm: f64,
    step: f64,
    s: f64,
    accepts_in_row: usize,
}

impl FlowState {
    pub fn new(problem: &QuantumProblem, u: ControlSignal, config: &FlowConfig) -> Result<Self> {
        let record = propagate(problem, &u)?;
        let cost = cost(record.terminal_state(), problem.theta());
        if !cost.is_finite() {
            return Err(Error::NonFiniteCost(0));
        }
        let gradient = gradient_from_record(problem, &record, u.horizon())?;
        let grad_norm = gradient.norm();
        Ok(Self {
            control: u,
            record,
            cost,
            gradient,
            grad_norm,
            step: config.step,
            s: 0.0,
            accepts_in_row: 0,
        })
    }

    pub fn control(&self) -> &ControlSignal {
        &self.control
    }

    pub fn record(&self) -> &PropagationRecord {
        &self.record
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn gradient(&self) -> &ControlSignal {
        &self.gradient
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad_norm
    }

    /// Current step `eta`.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Flow parameter accumulated over accepted steps.
    pub fn s(&self) -> f64 {
        self.s
    }
}

/// Result of one [`flow_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    /// Step length used by the accepted proposal, or the last one tried.
    pub step: f64,
    pub backtracks: usize,
}

/// One explicit Euler step `u + eta grad J(u)`, shrinking `eta` by `beta`
/// until the cost does not decrease. After two acceptances in a row `eta`
/// grows by `1 / beta`, up to `max_step`.
pub fn flow_step(problem: &QuantumProblem, state: &mut FlowState, config: &FlowConfig) -> Result<StepOutcome> {
    let mut eta = state.step;
    for backtracks in 0..=config.max_backtracks {
        let candidate = state.control.add_scaled(eta, &state.gradient)?;
        let record = propagate(problem, &candidate)?;
        let value = cost(record.terminal_state(), problem.theta());
        if !value.is_finite() {
            return Err(Error::NonFiniteCost(backtracks));
        }
        if value >= state.cost {
            let gradient = gradient_from_record(problem, &record, candidate.horizon())?;
            state.grad_norm = gradient.norm();
            state.gradient = gradient;
            state.control = candidate;
            state.record = record;
            state.cost = value;
            state.s += eta;
            state.accepts_in_row += 1;
            state.step = eta;
            if state.accepts_in_row >= 2 {
                state.step = (eta / config.backtrack).min(config.max_step);
                state.accepts_in_row = 0;
            }
            return Ok(StepOutcome {
                accepted: true,
                step: eta,
                backtracks,
            });
        }
        eta *= config.backtrack;
        state.accepts_in_row = 0;
    }
    state.step = eta;
    Ok(StepOutcome {
        accepted: false,
        step: eta,
        backtracks: config.max_backtracks,
    })
}

/// One row of the flow trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub s: f64,
    pub cost: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub accepted: bool,
    pub backtracks: usize,
    /// Finite-difference gradient error, normalized by at least
    /// [`FD_NOISE_FLOOR`], when a check was due.
    pub fd_error: Option<f64>,
}

/// Per-iteration history of a run. Row 0 describes the initial control.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowTrace {
    pub records: Vec<TraceRecord>,
    pub snapshots: Vec<(usize, ControlSignal)>,
    /// Control at the last accepted iterate.
    pub final_control: Option<ControlSignal>,
}

impl FlowTrace {
    /// Whether the cost never decreases across accepted steps.
    pub fn is_monotone(&self) -> bool {
        let mut last = f64::NEG_INFINITY;
        for r in self.records.iter().filter(|r| r.accepted) {
            if r.cost < last {
                return false;
            }
            last = r.cost;
        }
        true
    }

    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }
}

/// Verdict of a flow run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStatus {
    GlobalMax,
    /// Kinematic critical point other than the maximum, with its Morse index.
    Saddle(usize),
    /// Small gradient without a kinematic match.
    SuspectedNonKinematic,
    MaxIters,
}

impl FlowStatus {
    pub fn label(&self) -> &'static str {
        match self {
            FlowStatus::GlobalMax => "GlobalMax",
            FlowStatus::Saddle(_) => "Saddle",
            FlowStatus::SuspectedNonKinematic => "SuspectedNonKinematic",
            FlowStatus::MaxIters => "MaxIters",
        }
    }
}

/// Closest enumerated critical point of the orbit cost.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestCritical {
    pub permutation: Vec<usize>,
    /// `|rho(T) - rho_c|_F`.
    pub distance: f64,
    pub value: f64,
    pub morse_index: usize,
    pub is_maximum: bool,
}

/// Spectrum of `g Hess(J) g`, `g = G^{1/2}`, in the tangent basis at `rho(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianSummary {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
    /// False when the Gramian is numerically singular.
    pub reliable: bool,
}

/// Second derivatives of the cost along random unit directions.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSummary {
    pub samples: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

/// Thresholds applied when classifying a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub grad_tol: f64,
    pub comm_tol: f64,
    pub gap_tol: f64,
    pub eps_sing: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub status: FlowStatus,
    pub iterations: usize,
    pub converged: bool,
    pub final_cost: f64,
    pub max_cost: f64,
    pub gap: f64,
    pub grad_norm: f64,
    /// `|[rho(T), theta]|_F`.
    pub commutator_norm: f64,
    pub nearest: NearestCritical,
    pub gramian_min: f64,
    pub gramian_max: f64,
    pub control_class: ControlClass,
    pub hessian: Option<HessianSummary>,
    pub curvature: Option<CurvatureSummary>,
    pub thresholds: Thresholds,
    pub warnings: Vec<String>,
}

fn signature(eigenvalues: Vec<f64>, reliable: bool) -> HessianSummary {
    let scale = eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cut = 1e-12 * scale;
    let positive = eigenvalues.iter().filter(|&&l| l > cut).count();
    let negative = eigenvalues.iter().filter(|&&l| l < -cut).count();
    HessianSummary {
        zero: eigenvalues.len() - positive - negative,
        eigenvalues,
        positive,
        negative,
        reliable,
    }
}

/// Signature of the Hessian of the cost at `u`, read off from
/// `g Hess J(rho(T)) g`. Meaningful near kinematic critical points.
pub fn hessian_at_control(problem: &QuantumProblem, u: &ControlSignal, eps_sing: f64) -> Result<HessianSummary> {
    let record = propagate(problem, u)?;
    hessian_along(problem, &record, eps_sing)
}

fn hessian_along(problem: &QuantumProblem, record: &PropagationRecord, eps_sing: f64) -> Result<HessianSummary> {
    let split = problem.splitting()?;
    let g = gramian(problem, record)?;
    let root = g.sqrt();
    let frame: CMatrix = record.final_propagator() * split.basis();
    let h = hessian_in_frame(record.terminal_state(), problem.theta(), &frame);
    let m: DMatrix<f64> = &root * h * &root;
    Ok(signature(symmetric_spectrum(&m), classify_control(&g, eps_sing).is_regular()))
}

/// `Re tr(D^2 End(u)(v, v) theta)` for `count` random directions of unit
/// `L^2` norm.
pub fn curvature_samples(problem: &QuantumProblem, u: &ControlSignal, count: usize, seed: u64) -> Result<CurvatureSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let v = ControlSignal::uniform_noise(u.horizon(), u.len(), 1.0, &mut rng)?;
        let norm = v.norm();
        if norm == 0.0 {
            continue;
        }
        let v = v.scaled(1.0 / norm);
        let r = second_variation(problem, u, &v)?;
        samples.push(trace_product(r.matrix(), problem.theta().matrix()).re);
    }
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CurvatureSummary { samples, min, max })
}

/// Runs the flow from `u0` until the gradient norm drops below
/// `config.grad_tol` or `config.max_iters` is reached, then classifies the
/// end point against the critical landscape of the orbit cost.
pub fn run_flow(problem: &QuantumProblem, u0: &ControlSignal, config: &FlowConfig) -> Result<(FlowTrace, ConvergenceReport)> {
    config.validate()?;
    problem.require_simple_spectra()?;
    let mut warnings = Vec::new();
    if !problem.controllable() {
        warnings.push("H0 and H1 do not generate su(n); the maximum may be unreachable".to_string());
    }
    let mut state = FlowState::new(problem, u0.clone(), config)?;
    if state.grad_norm < config.grad_tol {
        warnings.push(format!("initial control is already critical: |grad| = {:e}", state.grad_norm));
    }
    let mut trace = FlowTrace::default();
    trace.records.push(TraceRecord {
        iteration: 0,
        s: 0.0,
        cost: state.cost,
        grad_norm: state.grad_norm,
        step: state.step,
        accepted: true,
        backtracks: 0,
        fd_error: None,
    });
    let mut iteration = 0;
    while state.grad_norm >= config.grad_tol && iteration < config.max_iters {
        iteration += 1;
        let outcome = flow_step(problem, &mut state, config)?;
        let fd_error = if config.fd_check_every > 0 && iteration % config.fd_check_every == 0 {
            Some(fd_gradient_error_floored(problem, &state.control, 1e-5, FD_NOISE_FLOOR)?)
        } else {
            None
        };
        trace.records.push(TraceRecord {
            iteration,
            s: state.s,
            cost: state.cost,
            grad_norm: state.grad_norm,
            step: outcome.step,
            accepted: outcome.accepted,
            backtracks: outcome.backtracks,
            fd_error,
        });
        if config.snapshot_every > 0 && iteration % config.snapshot_every == 0 {
            trace.snapshots.push((iteration, state.control.clone()));
        }
        if !outcome.accepted {
            warnings.push(format!("line search exhausted at iteration {iteration}"));
            break;
        }
    }
    let converged = state.grad_norm < config.grad_tol;
    let report = classify(problem, &state, iteration, converged, config, warnings)?;
    trace.final_control = Some(state.control);
    Ok((trace, report))
}

fn classify(
    problem: &QuantumProblem,
    state: &FlowState,
    iterations: usize,
    converged: bool,
    config: &FlowConfig,
    warnings: Vec<String>,
) -> Result<ConvergenceReport> {
    let rho = state.record.terminal_state();
    let points = enumerate_critical_points(problem)?;
    let max_cost = points.last().expect("at least two critical points").value;
    let (idx, distance) = points
        .iter()
        .map(|p| (p.rho.matrix() - rho.matrix()).norm())
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty landscape");
    let point = &points[idx];
    let is_maximum = idx + 1 == points.len();
    let nearest = NearestCritical {
        permutation: point.permutation.clone(),
        distance,
        value: point.value,
        morse_index: point.morse_index,
        is_maximum,
    };
    let gap = max_cost - state.cost;
    let commutator_norm = criticality(rho, problem.theta());
    let g = gramian(problem, &state.record)?;
    let control_class = classify_control(&g, config.eps_sing);
    let kinematic = commutator_norm < config.comm_tol;
    let status = if kinematic {
        if is_maximum && gap < config.gap_tol {
            FlowStatus::GlobalMax
        } else {
            FlowStatus::Saddle(point.morse_index)
        }
    } else if converged {
        FlowStatus::SuspectedNonKinematic
    } else {
        FlowStatus::MaxIters
    };
    let hessian = if kinematic {
        Some(hessian_along(problem, &state.record, config.eps_sing)?)
    } else {
        None
    };
    let curvature = if status == FlowStatus::SuspectedNonKinematic && config.curvature_samples > 0 {
        Some(curvature_samples(problem, &state.control, config.curvature_samples, config.seed)?)
    } else {
        None
    };
    Ok(ConvergenceReport {
        status,
        iterations,
        converged,
        final_cost: state.cost,
        max_cost,
        gap,
        grad_norm: state.grad_norm,
        commutator_norm,
        nearest,
        gramian_min: g.lambda_min(),
        gramian_max: g.lambda_max(),
        control_class,
        hessian,
        curvature,
        thresholds: Thresholds {
            grad_tol: config.grad_tol,
            comm_tol: config.comm_tol,
            gap_tol: config.gap_tol,
            eps_sing: config.eps_sing,
        },
        warnings,
    })
}
