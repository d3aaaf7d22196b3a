//! Problem data: drift and control Hamiltonians, initial state, observable
//! and horizon, together with the validation flags derived from them.

use crate::error::{Error, Result};
use crate::lie::{Hermitian, OrbitSplitting, SkewHermitian, Tolerances};
use crate::objective::check_controllability;

/// A bilinear control problem `rho' = [H0 + u(t) H1, rho]` on `[0, T]` with
/// the observable `theta` to maximize at the final time.
#[derive(Debug, Clone)]
pub struct QuantumProblem {
    h0: SkewHermitian,
    h1: SkewHermitian,
    rho0: Hermitian,
    theta: Hermitian,
    horizon: f64,
    tolerances: Tolerances,
    splitting: Option<OrbitSplitting>,
    theta_simple: bool,
    controllable: bool,
}

impl QuantumProblem {
    pub fn new(
        h0: SkewHermitian,
        h1: SkewHermitian,
        rho0: Hermitian,
        theta: Hermitian,
        horizon: f64,
    ) -> Result<Self> {
        Self::with_tolerances(h0, h1, rho0, theta, horizon, Tolerances::default())
    }

    pub fn with_tolerances(
        h0: SkewHermitian,
        h1: SkewHermitian,
        rho0: Hermitian,
        theta: Hermitian,
        horizon: f64,
        tolerances: Tolerances,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidHorizon(horizon));
        }
        let n = h0.dim();
        for found in [h1.dim(), rho0.dim(), theta.dim()] {
            if found != n {
                return Err(Error::DimensionMismatch { expected: n, found });
            }
        }
        let splitting = OrbitSplitting::new(&rho0, tolerances.spectral_gap).ok();
        let theta_simple = theta.eigen()?.min_gap() >= tolerances.spectral_gap;
        let controllable = check_controllability(&h0, &h1);
        Ok(Self {
            h0,
            h1,
            rho0,
            theta,
            horizon,
            tolerances,
            splitting,
            theta_simple,
            controllable,
        })
    }

    pub fn n(&self) -> usize {
        self.h0.dim()
    }

    pub fn h0(&self) -> &SkewHermitian {
        &self.h0
    }

    pub fn h1(&self) -> &SkewHermitian {
        &self.h1
    }

    pub fn rho0(&self) -> &Hermitian {
        &self.rho0
    }

    pub fn theta(&self) -> &Hermitian {
        &self.theta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }

    /// Orbit dimension `n^2 - n` under the simple-spectrum assumption.
    pub fn orbit_dim(&self) -> usize {
        self.n() * self.n() - self.n()
    }

    /// Whether both `rho0` and `theta` have simple spectra.
    pub fn h1_ok(&self) -> bool {
        self.splitting.is_some() && self.theta_simple
    }

    /// Whether `H0` and `H1` generate su(n).
    pub fn controllable(&self) -> bool {
        self.controllable
    }

    /// The `h + p` splitting at `rho0`; fails when `rho0` is degenerate.
    pub fn splitting(&self) -> Result<&OrbitSplitting> {
        match &self.splitting {
            Some(s) => Ok(s),
            None => {
                let gap = self.rho0.eigen()?.min_gap();
                Err(Error::DegenerateSpectrum {
                    gap,
                    tol: self.tolerances.spectral_gap,
                })
            }
        }
    }

    /// Fails unless both spectra are simple.
    pub fn require_simple_spectra(&self) -> Result<()> {
        self.splitting()?;
        if !self.theta_simple {
            let gap = self.theta.eigen()?.min_gap();
            return Err(Error::DegenerateSpectrum {
                gap,
                tol: self.tolerances.spectral_gap,
            });
        }
        Ok(())
    }

    /// Same problem with a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidHorizon(horizon));
        }
        Ok(Self {
            horizon,
            ..self.clone()
        })
    }

    /// Same problem with the observable replaced, e.g. by `-theta` to steer
    /// towards the minimum.
    pub fn with_theta(&self, theta: Hermitian) -> Result<Self> {
        Self::with_tolerances(
            self.h0.clone(),
            self.h1.clone(),
            self.rho0.clone(),
            theta,
            self.horizon,
            self.tolerances,
        )
    }
}
