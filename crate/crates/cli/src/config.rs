//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use orbitflow::flow::FlowConfig;

use crate::problem_file::ProblemFile;
use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub problem: ProblemSource,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub checkgrad: CheckgradSection,
    #[serde(default)]
    pub gramian: GramianSection,
    /// Output directory; the `--out` flag takes precedence.
    pub output: Option<PathBuf>,
}

/// Exactly one of `file`, `random` or `inline`. Without any, a random
/// two-level problem with seed 0 is used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSource {
    pub file: Option<PathBuf>,
    pub random: Option<RandomSpec>,
    pub inline: Option<ProblemFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub horizon: Option<f64>,
    pub rho_spectrum: Option<Vec<f64>>,
    pub theta_spectrum: Option<Vec<f64>>,
    pub scale: Option<f64>,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            n: 2,
            seed: 0,
            horizon: None,
            rho_spectrum: None,
            theta_spectrum: None,
            scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub steps: usize,
    /// Overrides the horizon stored with the problem.
    pub horizon: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { steps: 64, horizon: None }
    }
}

/// Mirrors [`FlowConfig`]; absent keys keep the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub step: Option<f64>,
    pub max_step: Option<f64>,
    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub backtrack: Option<f64>,
    pub max_backtracks: Option<usize>,
    pub comm_tol: Option<f64>,
    pub gap_tol: Option<f64>,
    pub eps_sing: Option<f64>,
    pub curvature_samples: Option<usize>,
    pub fd_check_every: Option<usize>,
}

impl FlowSection {
    pub fn to_config(&self, seed: u64) -> FlowConfig {
        let d = FlowConfig::default();
        FlowConfig {
            step: self.step.unwrap_or(d.step),
            max_step: self.max_step.unwrap_or(d.max_step),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            grad_tol: self.grad_tol.unwrap_or(d.grad_tol),
            backtrack: self.backtrack.unwrap_or(d.backtrack),
            max_backtracks: self.max_backtracks.unwrap_or(d.max_backtracks),
            comm_tol: self.comm_tol.unwrap_or(d.comm_tol),
            gap_tol: self.gap_tol.unwrap_or(d.gap_tol),
            eps_sing: self.eps_sing.unwrap_or(d.eps_sing),
            seed,
            curvature_samples: self.curvature_samples.unwrap_or(d.curvature_samples),
            snapshot_every: 0,
            fd_check_every: self.fd_check_every.unwrap_or(d.fd_check_every),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Noise,
    Zero,
    File,
}

/// Initial control for `solve` and the control probed by `gramian`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSection {
    pub kind: InitKind,
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    /// Control CSV in the format written by `solve`.
    pub file: Option<PathBuf>,
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            kind: InitKind::Noise,
            amplitude: 1.0,
            seed: 0,
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckgradSection {
    pub samples: usize,
    pub eps: f64,
    pub threshold: f64,
    /// Test hook: negates the analytic gradient.
    #[serde(default)]
    pub flip_sign: bool,
}

impl Default for CheckgradSection {
    fn default() -> Self {
        Self {
            samples: 20,
            eps: 1e-5,
            threshold: 1e-4,
            flip_sign: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GramianSection {
    pub eps_sing: f64,
    pub witness_tol: f64,
}

impl Default for GramianSection {
    fn default() -> Self {
        Self {
            eps_sing: 1e-8,
            witness_tol: 1e-8,
        }
    }
}

/// Parsed configuration together with the raw bytes it was read from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub raw: String,
    /// Directory relative paths in the config are resolved against.
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self {
                config: ExperimentConfig::default(),
                raw: String::new(),
                base: PathBuf::from("."),
            }),
            Some(path) => {
                let raw = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let config: ExperimentConfig =
                    toml::from_str(&raw).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
                Ok(Self { config, raw, base })
            }
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base.join(path)
        }
    }
}
