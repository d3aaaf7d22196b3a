//! Gradient-flow optimization of a quantum observable over trajectories of
//! the controlled Liouville-von Neumann equation
//!
//! ```text
//! rho'(t) = [H0 + u(t) H1, rho(t)],   rho(0) = rho0,
//! ```
//!
//! with `H0, H1` in su(n). The reachable states lie on the unitary orbit of
//! `rho0`; the cost `J(u) = Re tr(rho(T) theta)` is maximized by ascending
//! its `L^2` gradient in control space.
//!
//! Modules, bottom to top:
//!
//! * [`lie`]: matrix types, commutators, exponentials, the orbit splitting
//!   and the invariant metric.
//! * [`dynamics`]: piecewise-constant propagation and variations of the
//!   end-point map.
//! * [`endpoint`]: switching functions, the adjoint differential, the
//!   controllability Gramian and singular-control witnesses.
//! * [`objective`]: the orbit cost, its critical points and Morse indices,
//!   and the Lie algebra rank test.
//! * [`flow`]: the gradient flow and classification of its limit.
//! * [`generate`]: seeded random problems.

pub mod dynamics;
pub mod endpoint;
pub mod error;
pub mod flow;
pub mod generate;
pub mod lie;
pub mod objective;
pub mod problem;

#[cfg(test)]
mod testutil;

// Book chapters, compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/orbit.md")]
    mod orbit {}
    #[doc = include_str!("../../../book/src/propagation.md")]
    mod propagation {}
    #[doc = include_str!("../../../book/src/switching.md")]
    mod switching {}
    #[doc = include_str!("../../../book/src/landscape.md")]
    mod landscape {}
    #[doc = include_str!("../../../book/src/flow.md")]
    mod flow {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}

pub use dynamics::{propagate, ControlSignal, PropagationRecord};
pub use endpoint::TangentVector;
pub use error::{Error, Result};
pub use lie::{CMatrix, Hermitian, SkewHermitian, SpecialUnitary, Tolerances};
pub use problem::QuantumProblem;
