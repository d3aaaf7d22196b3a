//! Subcommand implementations. Each returns the process exit code or an
//! error that the caller reports.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use orbitflow::dynamics::propagate;
use orbitflow::endpoint::{classify_control, gramian, least_switching_direction, witness_trace_samples};
use orbitflow::flow::{cost_functional, grad_cost_functional, run_flow, FlowStatus};
use orbitflow::generate::ProblemSpec;
use orbitflow::objective::enumerate_critical_points;
use orbitflow::{ControlSignal, QuantumProblem};

use crate::artifacts::{self, class_label, num, Provenance, ReportRecord};
use crate::config::{InitKind, LoadedConfig, RandomSpec};
use crate::problem_file::ProblemFile;
use crate::{output_dir, CliError, CommonArgs, GenerateArgs, EXIT_ERROR, EXIT_MAX_ITERS, EXIT_NON_KINEMATIC, EXIT_OK, EXIT_SADDLE};

/// Everything a command needs after parsing and validation.
struct Setup {
    loaded: LoadedConfig,
    problem: QuantumProblem,
    problem_hash: String,
    steps: usize,
    out: PathBuf,
    seed: u64,
}

fn spec_from(random: &RandomSpec) -> ProblemSpec {
    let mut spec = ProblemSpec::new(random.n);
    if let Some(h) = random.horizon {
        spec.horizon = h;
    }
    if let Some(s) = random.scale {
        spec.hamiltonian_scale = s;
    }
    spec.rho_spectrum = random.rho_spectrum.clone();
    spec.theta_spectrum = random.theta_spectrum.clone();
    spec
}

fn load_problem(loaded: &LoadedConfig) -> Result<QuantumProblem, CliError> {
    let source = &loaded.config.problem;
    let given = [source.file.is_some(), source.random.is_some(), source.inline.is_some()];
    if given.iter().filter(|&&b| b).count() > 1 {
        return Err(CliError::config("[problem] takes exactly one of file, random, inline"));
    }
    if let Some(file) = &source.file {
        return ProblemFile::read(&loaded.resolve(file))?.to_problem();
    }
    if let Some(inline) = &source.inline {
        return inline.to_problem();
    }
    let random = source.random.clone().unwrap_or_default();
    spec_from(&random).generate(random.seed).map_err(|e| CliError::validation(e.to_string()))
}

fn setup(args: &CommonArgs, command: &str) -> Result<Setup, CliError> {
    let loaded = LoadedConfig::load(args.config.as_deref())?;
    let mut problem = load_problem(&loaded)?;
    if let Some(h) = args.horizon.or(loaded.config.grid.horizon) {
        problem = problem.with_horizon(h).map_err(|e| CliError::validation(e.to_string()))?;
    }
    let steps = args.grid.unwrap_or(loaded.config.grid.steps);
    if steps == 0 {
        return Err(CliError::config("grid must have at least one subinterval"));
    }
    if args.runs == 0 {
        return Err(CliError::config("--runs must be at least 1"));
    }
    let problem_hash = artifacts::sha256_hex(ProblemFile::from_problem(&problem).to_json().as_bytes());
    let config_out = loaded.config.output.as_ref().map(|p| loaded.resolve(p));
    let out = output_dir(args.out.as_deref(), config_out.as_deref(), command);
    let seed = args.seed.unwrap_or(loaded.config.init.seed);
    Ok(Setup {
        loaded,
        problem,
        problem_hash,
        steps,
        out,
        seed,
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn provenance(s: &Setup, command: &str, seed: u64, run: Option<usize>) -> String {
    artifacts::to_json(&Provenance {
        tool: "orbitflow",
        version: env!("CARGO_PKG_VERSION"),
        command: command.into(),
        config_sha256: artifacts::sha256_hex(s.loaded.raw.as_bytes()),
        problem_sha256: s.problem_hash.clone(),
        seed,
        run,
    })
}

fn initial_control(s: &Setup, seed: u64) -> Result<ControlSignal, CliError> {
    let init = &s.loaded.config.init;
    let horizon = s.problem.horizon();
    let u = match init.kind {
        InitKind::Zero => ControlSignal::zeros(horizon, s.steps),
        InitKind::Noise => ControlSignal::uniform_noise(horizon, s.steps, init.amplitude, &mut ChaCha8Rng::seed_from_u64(seed)),
        InitKind::File => {
            let file = init.file.as_ref().ok_or_else(|| CliError::config("init.kind = \"file\" requires init.file"))?;
            let path = s.loaded.resolve(file);
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            return artifacts::parse_control_csv(&text, horizon);
        }
    };
    u.map_err(|e| CliError::validation(e.to_string()))
}

fn require_spectra(p: &QuantumProblem) -> Result<(), CliError> {
    p.require_simple_spectra()
        .map_err(|e| CliError::validation(format!("rho0 and theta need simple spectra: {e}")))
}

pub fn status_code(status: FlowStatus) -> i32 {
    match status {
        FlowStatus::GlobalMax => EXIT_OK,
        FlowStatus::Saddle(_) => EXIT_SADDLE,
        FlowStatus::SuspectedNonKinematic => EXIT_NON_KINEMATIC,
        FlowStatus::MaxIters => EXIT_MAX_ITERS,
    }
}

fn solve_one(s: &Setup, seed: u64, run: Option<usize>, dir: &Path, quiet: bool) -> Result<i32, CliError> {
    let u0 = initial_control(s, seed)?;
    let config = s.loaded.config.flow.to_config(seed);
    config.validate().map_err(|e| CliError::config(e.to_string()))?;
    let (trace, report) = run_flow(&s.problem, &u0, &config).map_err(CliError::numeric)?;
    let code = status_code(report.status);
    create_dir(dir)?;
    artifacts::write(dir, "trace.csv", &artifacts::trace_csv(&trace))?;
    artifacts::write(dir, "report.json", &artifacts::to_json(&ReportRecord::new(&report, code)))?;
    let final_control = trace.final_control.as_ref().unwrap_or(&u0);
    artifacts::write(dir, "control.csv", &artifacts::control_csv(final_control))?;
    artifacts::write(dir, "provenance.json", &provenance(s, "solve", seed, run))?;
    if !quiet {
        eprintln!(
            "{}: {} after {} iterations, J = {:.10}, gap = {:.3e}, |grad| = {:.3e}",
            dir.display(),
            report.status.label(),
            report.iterations,
            report.final_cost,
            report.gap,
            report.grad_norm
        );
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(code)
}

/// Runs the flow, writing `trace.csv`, `report.json`, `control.csv` and
/// `provenance.json`. With `--runs K > 1`, run `i` uses seed `seed + i` and
/// writes to `run-<i>/`; the exit code is the largest over all runs.
pub fn cmd_solve(args: &CommonArgs) -> Result<i32, CliError> {
    let s = setup(args, "solve")?;
    require_spectra(&s.problem)?;
    if !s.problem.controllable() {
        return Err(CliError::validation("H0 and H1 do not generate su(n); the problem is not controllable"));
    }
    if args.runs == 1 {
        return solve_one(&s, s.seed, None, &s.out, args.quiet);
    }
    let results: Vec<Result<i32, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..args.runs)
            .map(|i| {
                let s = &s;
                let dir = s.out.join(format!("run-{i:03}"));
                scope.spawn(move || solve_one(s, s.seed + i as u64, Some(i), &dir, args.quiet))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    let mut worst = EXIT_OK;
    for r in results {
        worst = worst.max(r?);
    }
    Ok(worst)
}

#[derive(Serialize)]
struct LandscapeRow {
    index: usize,
    permutation: Vec<usize>,
    value: f64,
    morse_index: usize,
    hessian_min: f64,
    hessian_max: f64,
}

/// Writes `landscape.csv`, one row per critical point in ascending value,
/// and checks for exactly one minimum and one maximum.
pub fn cmd_landscape(args: &CommonArgs) -> Result<i32, CliError> {
    let s = setup(args, "landscape")?;
    require_spectra(&s.problem)?;
    let points = enumerate_critical_points(&s.problem).map_err(CliError::numeric)?;
    let big_n = s.problem.orbit_dim();
    let rows: Vec<LandscapeRow> = points
        .iter()
        .enumerate()
        .map(|(index, p)| LandscapeRow {
            index,
            permutation: p.permutation.clone(),
            value: p.value,
            morse_index: p.morse_index,
            hessian_min: p.hessian_spectrum.first().copied().unwrap_or(0.0),
            hessian_max: p.hessian_spectrum.last().copied().unwrap_or(0.0),
        })
        .collect();
    let mut csv = String::from("index,permutation,value,morse_index,hessian_min,hessian_max\n");
    for r in &rows {
        let perm: Vec<String> = r.permutation.iter().map(|k| k.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.index,
            perm.join(" "),
            num(r.value),
            r.morse_index,
            num(r.hessian_min),
            num(r.hessian_max)
        ));
    }
    create_dir(&s.out)?;
    artifacts::write(&s.out, "landscape.csv", &csv)?;
    artifacts::write(&s.out, "provenance.json", &provenance(&s, "landscape", s.seed, None))?;
    if !args.quiet {
        print!("{csv}");
    }
    let minima = rows.iter().filter(|r| r.morse_index == 0).count();
    let maxima = rows.iter().filter(|r| r.morse_index == big_n).count();
    if minima == 1 && maxima == 1 {
        Ok(EXIT_OK)
    } else {
        Err(CliError::validation(format!("expected one minimum and one maximum, found {minima} and {maxima}")))
    }
}

#[derive(Serialize)]
struct GradSample {
    analytic: f64,
    finite_difference: f64,
    relative_error: f64,
}

#[derive(Serialize)]
struct CheckgradRecord {
    samples: Vec<GradSample>,
    eps: f64,
    threshold: f64,
    max_relative_error: f64,
    pass: bool,
}

/// Directional derivatives `<grad J(u), d>` against central differences for
/// random `(u, d)`. Exit 0 iff the worst relative error is below threshold.
pub fn cmd_checkgrad(args: &CommonArgs) -> Result<i32, CliError> {
    let s = setup(args, "checkgrad")?;
    let cfg = &s.loaded.config.checkgrad;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let horizon = s.problem.horizon();
    let amplitude = s.loaded.config.init.amplitude.max(0.5);
    let numeric = CliError::numeric;
    let mut samples = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let u = ControlSignal::uniform_noise(horizon, s.steps, amplitude, &mut rng).map_err(numeric)?;
        let d = ControlSignal::uniform_noise(horizon, s.steps, 1.0, &mut rng).map_err(numeric)?;
        let g = grad_cost_functional(&s.problem, &u).map_err(numeric)?;
        let mut analytic = g.inner(&d).map_err(numeric)?;
        if cfg.flip_sign {
            analytic = -analytic;
        }
        let plus = cost_functional(&s.problem, &u.add_scaled(cfg.eps, &d).map_err(numeric)?).map_err(numeric)?;
        let minus = cost_functional(&s.problem, &u.add_scaled(-cfg.eps, &d).map_err(numeric)?).map_err(numeric)?;
        let fd = (plus - minus) / (2.0 * cfg.eps);
        let scale = analytic.abs().max(fd.abs());
        // Both sides below rounding level count as agreement.
        let relative_error = if scale < 1e-12 { 0.0 } else { (analytic - fd).abs() / scale };
        samples.push(GradSample {
            analytic,
            finite_difference: fd,
            relative_error,
        });
    }
    let max_relative_error = samples.iter().map(|x| x.relative_error).fold(0.0, f64::max);
    let pass = max_relative_error < cfg.threshold;
    let record = CheckgradRecord {
        samples,
        eps: cfg.eps,
        threshold: cfg.threshold,
        max_relative_error,
        pass,
    };
    create_dir(&s.out)?;
    artifacts::write(&s.out, "checkgrad.json", &artifacts::to_json(&record))?;
    artifacts::write(&s.out, "provenance.json", &provenance(&s, "checkgrad", s.seed, None))?;
    if !args.quiet {
        eprintln!("max relative error {max_relative_error:.3e} (threshold {:.1e})", cfg.threshold);
    }
    Ok(if pass { EXIT_OK } else { EXIT_ERROR })
}

#[derive(Serialize)]
struct WitnessRecord {
    found: bool,
    residual: f64,
    /// Largest `|tr(Omega0 U(t)^dag H1 U(t))|` over subinterval midpoints.
    trace_samples_max: f64,
    omega: crate::problem_file::MatrixRows,
}

#[derive(Serialize)]
struct GramianRecord {
    eigenvalues: Vec<f64>,
    lambda_min: f64,
    lambda_max: f64,
    classification: String,
    corank: usize,
    eps_sing: f64,
    witness_tol: f64,
    witness: WitnessRecord,
}

/// Gramian of the configured control (see `[init]`), its rank class and the
/// best singularity witness.
pub fn cmd_gramian(args: &CommonArgs) -> Result<i32, CliError> {
    let s = setup(args, "gramian")?;
    s.problem
        .splitting()
        .map_err(|e| CliError::validation(format!("rho0 needs a simple spectrum: {e}")))?;
    let cfg = &s.loaded.config.gramian;
    let u = initial_control(&s, s.seed)?;
    let record = propagate(&s.problem, &u).map_err(CliError::numeric)?;
    let g = gramian(&s.problem, &record).map_err(CliError::numeric)?;
    let class = classify_control(&g, cfg.eps_sing);
    let (classification, corank) = class_label(&class);
    let w = least_switching_direction(&s.problem, &record).map_err(CliError::numeric)?;
    let trace_samples_max = witness_trace_samples(&s.problem, &record, &w.omega)
        .into_iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let m = w.omega.matrix();
    let out = GramianRecord {
        eigenvalues: g.eigenvalues().to_vec(),
        lambda_min: g.lambda_min(),
        lambda_max: g.lambda_max(),
        classification: classification.clone(),
        corank,
        eps_sing: cfg.eps_sing,
        witness_tol: cfg.witness_tol,
        witness: WitnessRecord {
            found: w.residual < cfg.witness_tol,
            residual: w.residual,
            trace_samples_max,
            omega: (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect(),
        },
    };
    create_dir(&s.out)?;
    artifacts::write(&s.out, "gramian.json", &artifacts::to_json(&out))?;
    artifacts::write(&s.out, "provenance.json", &provenance(&s, "gramian", s.seed, None))?;
    if !args.quiet {
        eprintln!(
            "{classification} (corank {corank}), lambda in [{:.3e}, {:.3e}], witness residual {:.3e}",
            g.lambda_min(),
            g.lambda_max(),
            w.residual
        );
    }
    Ok(EXIT_OK)
}

/// Writes `problem.json` for a seeded random problem. `--n`, `--seed` and
/// `--horizon` override `[problem.random]` in the config.
pub fn cmd_generate(args: &GenerateArgs) -> Result<i32, CliError> {
    let common = &args.common;
    let loaded = LoadedConfig::load(common.config.as_deref())?;
    let mut random = loaded.config.problem.random.clone().unwrap_or_default();
    if let Some(n) = args.n {
        random.n = n;
    }
    if let Some(seed) = common.seed {
        random.seed = seed;
    }
    if let Some(h) = common.horizon {
        random.horizon = Some(h);
    }
    let problem = spec_from(&random)
        .generate(random.seed)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let json = ProblemFile::from_problem(&problem).to_json();
    let config_out = loaded.config.output.as_ref().map(|p| loaded.resolve(p));
    let out = output_dir(common.out.as_deref(), config_out.as_deref(), "generate");
    create_dir(&out)?;
    artifacts::write(&out, "problem.json", &json)?;
    let prov = Provenance {
        tool: "orbitflow",
        version: env!("CARGO_PKG_VERSION"),
        command: "generate".into(),
        config_sha256: artifacts::sha256_hex(loaded.raw.as_bytes()),
        problem_sha256: artifacts::sha256_hex(json.as_bytes()),
        seed: random.seed,
        run: None,
    };
    artifacts::write(&out, "provenance.json", &artifacts::to_json(&prov))?;
    if !common.quiet {
        eprintln!("wrote {}", out.join("problem.json").display());
    }
    Ok(EXIT_OK)
}
