//! Output files: trace and control tables, the JSON report, provenance.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use orbitflow::endpoint::ControlClass;
use orbitflow::flow::{ConvergenceReport, FlowTrace, HessianSummary};
use orbitflow::ControlSignal;

use crate::CliError;

/// Full precision: 17 significant digits, so values reparse exactly.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_csv(trace: &FlowTrace) -> String {
    let mut out = String::from("iter,s,cost,grad_norm,step,accepted,backtracks,fd_error\n");
    for r in &trace.records {
        let fd = r.fd_error.map(num).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iteration,
            num(r.s),
            num(r.cost),
            num(r.grad_norm),
            num(r.step),
            r.accepted as u8,
            r.backtracks,
            fd
        )
        .unwrap();
    }
    out
}

pub fn control_csv(u: &ControlSignal) -> String {
    let mut out = String::from("k,t_mid,u\n");
    for (k, (t, v)) in u.midpoints().iter().zip(u.values()).enumerate() {
        writeln!(out, "{k},{},{}", num(*t), num(*v)).unwrap();
    }
    out
}

/// Reads a control table written by [`control_csv`] onto a grid over `[0, horizon]`.
pub fn parse_control_csv(text: &str, horizon: f64) -> Result<ControlSignal, CliError> {
    let mut values = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let field = line
            .split(',')
            .nth(2)
            .ok_or_else(|| CliError::config(format!("control file line {}: expected 3 columns", line_no + 1)))?;
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|e| CliError::config(format!("control file line {}: {e}", line_no + 1)))?;
        values.push(v);
    }
    ControlSignal::new(horizon, values).map_err(|e| CliError::validation(e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct NearestRecord {
    pub permutation: Vec<usize>,
    pub distance: f64,
    pub value: f64,
    pub morse_index: usize,
    pub is_maximum: bool,
}

#[derive(Debug, Serialize)]
pub struct HessianRecord {
    pub eigenvalues: Vec<f64>,
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
    pub reliable: bool,
}

impl From<&HessianSummary> for HessianRecord {
    fn from(h: &HessianSummary) -> Self {
        Self {
            eigenvalues: h.eigenvalues.clone(),
            positive: h.positive,
            negative: h.negative,
            zero: h.zero,
            reliable: h.reliable,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CurvatureRecord {
    pub samples: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Serialize)]
pub struct ThresholdRecord {
    pub grad_tol: f64,
    pub comm_tol: f64,
    pub gap_tol: f64,
    pub eps_sing: f64,
}

/// JSON form of a convergence report.
#[derive(Debug, Serialize)]
pub struct ReportRecord {
    pub status: String,
    pub morse_index: Option<usize>,
    pub exit_code: i32,
    pub iterations: usize,
    pub converged: bool,
    pub final_cost: f64,
    pub max_cost: f64,
    pub gap: f64,
    pub grad_norm: f64,
    pub commutator_norm: f64,
    pub nearest: NearestRecord,
    pub gramian_min: f64,
    pub gramian_max: f64,
    pub control_class: String,
    pub corank: usize,
    pub hessian: Option<HessianRecord>,
    pub curvature: Option<CurvatureRecord>,
    pub thresholds: ThresholdRecord,
    pub warnings: Vec<String>,
}

pub fn class_label(c: &ControlClass) -> (String, usize) {
    match c {
        ControlClass::Regular => ("Regular".into(), 0),
        ControlClass::Singular { corank } => ("Singular".into(), *corank),
    }
}

impl ReportRecord {
    pub fn new(r: &ConvergenceReport, exit_code: i32) -> Self {
        let (control_class, corank) = class_label(&r.control_class);
        Self {
            status: r.status.label().into(),
            morse_index: match r.status {
                orbitflow::flow::FlowStatus::Saddle(k) => Some(k),
                _ => None,
            },
            exit_code,
            iterations: r.iterations,
            converged: r.converged,
            final_cost: r.final_cost,
            max_cost: r.max_cost,
            gap: r.gap,
            grad_norm: r.grad_norm,
            commutator_norm: r.commutator_norm,
            nearest: NearestRecord {
                permutation: r.nearest.permutation.clone(),
                distance: r.nearest.distance,
                value: r.nearest.value,
                morse_index: r.nearest.morse_index,
                is_maximum: r.nearest.is_maximum,
            },
            gramian_min: r.gramian_min,
            gramian_max: r.gramian_max,
            control_class,
            corank,
            hessian: r.hessian.as_ref().map(HessianRecord::from),
            curvature: r.curvature.as_ref().map(|c| CurvatureRecord {
                samples: c.samples.clone(),
                min: c.min,
                max: c.max,
            }),
            thresholds: ThresholdRecord {
                grad_tol: r.thresholds.grad_tol,
                comm_tol: r.thresholds.comm_tol,
                gap_tol: r.thresholds.gap_tol,
                eps_sing: r.thresholds.eps_sing,
            },
            warnings: r.warnings.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub problem_sha256: String,
    pub seed: u64,
    pub run: Option<usize>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("record serializes");
    s.push('\n');
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}
