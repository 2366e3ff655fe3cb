//! Batch front end: configuration, subcommands and output files.
//!
//! Every subcommand resolves a [`RunConfig`] from its flags, overlays an
//! optional JSON `--config` file on top, writes its artifacts into the
//! output directory and returns a process exit code: `0` on success, `2` on
//! usage or precondition errors, `3` when a solve or check does not succeed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::continuation::{sweep_with, zero_energy_with, ZeroEnergyOptions};
use crate::error::{Error, Result};
use crate::functionals::{check_assumptions, Nonlinearity, ProblemSpec};
use crate::mesh::{Field, Mesh};
use crate::minimax::{Algorithm, SaddleResult, Solver, SolverOptions};
use crate::spectral::SpectralData;
use crate::verify::{
    cerami_monitor, embedding_constant, fd_gradient_check, fibering_profile, random_pair, Functional,
    Subspace,
};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "ENRAY_OUT";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Problem definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    /// Absolute `λ`; takes precedence over `lambda_frac`.
    pub lambda: Option<f64>,
    /// `λ` as a fraction of `λ_1`, or `gap:k:θ` for `λ_k + θ(λ_{k+1} − λ_k)`.
    pub lambda_frac: Option<String>,
    pub q: f64,
    pub gamma: f64,
    /// `pure_power` (`c ≡ c_max`) or `pure_power_modulated`
    /// (`c(x) = c_min + (c_max − c_min) sin²(πx)`).
    pub nonlinearity: String,
    pub c_min: f64,
    pub c_max: f64,
    pub n: usize,
    pub quad_order: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            lambda_frac: Some("0.5".into()),
            q: 1.5,
            gamma: 4.0,
            nonlinearity: "pure_power".into(),
            c_min: 1.0,
            c_max: 1.0,
            n: 200,
            quad_order: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Lmm,
    Mpa,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub algo: Algo,
    pub options: SolverOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algo: Algo::Lmm,
            options: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceArg {
    All,
    Wplus,
}

/// Subcommand-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    /// Prescribed energy.
    #[serde(rename = "E")]
    pub energy: f64,
    /// Explicit sweep energies; otherwise a log grid on `[E_min, E_max]`.
    #[serde(rename = "E_list")]
    pub energy_list: Option<Vec<f64>>,
    #[serde(rename = "E_min")]
    pub energy_min: f64,
    /// Upper sweep end; default `0.8·E_k`.
    #[serde(rename = "E_max")]
    pub energy_max: Option<f64>,
    pub points: usize,
    /// Number of eigenpairs reported by `eig`.
    pub k_check: usize,
    /// Fibering grid `t ∈ [0, t_max]` with `t_points` points.
    pub t_max: f64,
    pub t_points: usize,
    /// Zero-energy start and number of halvings.
    #[serde(rename = "E_start")]
    pub energy_start: f64,
    pub halvings: usize,
    /// Exponent, restarts and subspace of `embed`.
    pub r: f64,
    pub restarts: usize,
    pub subspace: SubspaceArg,
    /// Random pairs per functional in `check-gradients`.
    pub samples: usize,
    pub fd_h: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            energy: 0.01,
            energy_list: None,
            energy_min: 0.001,
            energy_max: None,
            points: 8,
            k_check: 5,
            t_max: 100.0,
            t_points: 201,
            energy_start: 0.01,
            halvings: 12,
            r: 4.0,
            restarts: 8,
            subspace: SubspaceArg::All,
            samples: 20,
            fd_h: 1e-5,
        }
    }
}

/// Fully resolved run configuration, echoed into every output.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub task: TaskConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let o = &self.solver.options;
        let tols = [
            ("tol_grad", o.tol_grad),
            ("tol_inner", o.tol_inner),
            ("tol_energy", o.tol_energy),
            ("tol_refine", o.tol_refine),
            ("armijo_c", o.armijo_c),
            ("eps_reg", o.eps_reg),
            ("fd_h", self.task.fd_h),
        ];
        for (name, v) in tols {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(o.backtrack > 0.0 && o.backtrack < 1.0) {
            return Err(Error::InvalidParameter(format!("backtrack = {} must lie in (0, 1)", o.backtrack)));
        }
        Ok(())
    }

    /// Mesh, spectral data and problem described by the `problem` block.
    pub fn build_problem(&self) -> Result<ProblemSpec> {
        let pc = &self.problem;
        let mesh = Mesh::new(pc.n, pc.quad_order)?;
        let base = SpectralData::from_mesh(&mesh, 0.0)?;
        let lambda = resolve_lambda(pc, base.eigenvalues())?;
        let spectral = base.with_lambda(lambda)?;
        let nl = match pc.nonlinearity.as_str() {
            "pure_power" => Nonlinearity::pure_power(pc.gamma, pc.c_max)?,
            "pure_power_modulated" => {
                let (lo, hi) = (pc.c_min, pc.c_max);
                Nonlinearity::pure_power_with(
                    pc.gamma,
                    Arc::new(move |x| {
                        let s = (std::f64::consts::PI * x).sin();
                        lo + (hi - lo) * s * s
                    }),
                    lo,
                    hi,
                )?
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown nonlinearity '{other}' (expected pure_power or pure_power_modulated)"
                )))
            }
        };
        ProblemSpec::with_spectral(mesh, spectral, pc.q, nl)
    }
}

/// `λ` from the absolute value or the fraction / gap specification.
pub fn resolve_lambda(pc: &ProblemConfig, eigenvalues: &[f64]) -> Result<f64> {
    if let Some(l) = pc.lambda {
        return Ok(l);
    }
    let spec = pc.lambda_frac.as_deref().unwrap_or("0.5");
    if let Some(rest) = spec.strip_prefix("gap:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let bad = || Error::InvalidParameter(format!("lambda-frac '{spec}' is not of the form gap:k:θ"));
        if parts.len() != 2 {
            return Err(bad());
        }
        let k: usize = parts[0].parse().map_err(|_| bad())?;
        let theta: f64 = parts[1].parse().map_err(|_| bad())?;
        return SpectralData::gap_point(eigenvalues, k, theta);
    }
    let frac: f64 = spec
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("lambda-frac '{spec}' is neither a number nor gap:k:θ")))?;
    Ok(frac * eigenvalues[0])
}

#[derive(Debug, Parser)]
#[command(name = "enray", version, about = "Prescribed-energy saddle points via the energy-level Rayleigh quotient")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discrete eigenpairs and the splitting index.
    Eig(CommonArgs),
    /// Constants r_k, E_k, C1, C2 and embedding estimates.
    Constants(CommonArgs),
    /// Solve for (u, μ) at one energy level.
    Solve(CommonArgs),
    /// Sweep μ(E) over a list or log grid of energies.
    Sweep(CommonArgs),
    /// Zero-energy limit of the mountain-pass branch.
    ZeroEnergy(CommonArgs),
    /// Fibering profile t ↦ R^E(t ū⁺).
    Fiber(CommonArgs),
    /// Finite-difference checks of the analytic gradients.
    CheckGradients(CommonArgs),
    /// Grid checks of the structural assumptions on g.
    CheckAssumptions(CommonArgs),
    /// Embedding-constant estimate sup |u|_Lr / ‖u‖₁.
    Embed(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration overlaid on the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $ENRAY_OUT or the current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Absolute λ (takes precedence over --lambda-frac).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fraction of λ_1, or gap:k:θ.
    #[arg(long = "lambda-frac")]
    pub lambda_frac: Option<String>,
    /// Prescribed energy (default 0.01).
    #[arg(long = "E")]
    pub energy: Option<f64>,
    /// Comma-separated sweep energies.
    #[arg(long = "E-list", value_delimiter = ',')]
    pub energy_list: Option<Vec<f64>>,
    /// Lower end of the sweep grid (default 0.001).
    #[arg(long = "E-min")]
    pub energy_min: Option<f64>,
    /// Upper end of the sweep grid (default 0.8·E_k).
    #[arg(long = "E-max")]
    pub energy_max: Option<f64>,
    /// Number of sweep energies (default 8).
    #[arg(long)]
    pub points: Option<usize>,
    /// Concave exponent q ∈ (1, 2) (default 1.5).
    #[arg(long)]
    pub q: Option<f64>,
    /// Exponent of the pure-power nonlinearity (default 4).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Number of interior mesh nodes (default 200).
    #[arg(long)]
    pub n: Option<usize>,
    /// Gauss points per element (default 3).
    #[arg(long = "quad-order")]
    pub quad_order: Option<usize>,
    /// Eigenpairs reported by `eig` (default 5).
    #[arg(long = "k-check")]
    pub k_check: Option<usize>,
    /// Seed for randomized starts and samples.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of randomized restarts of the saddle search.
    #[arg(long = "multi-start")]
    pub multi_start: Option<usize>,
    /// Saddle search: local minimax or mountain-pass path (k = 0).
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    /// Right end of the fibering grid (default 100).
    #[arg(long = "t-max")]
    pub t_max: Option<f64>,
    /// Points on the fibering grid (default 201).
    #[arg(long = "t-points")]
    pub t_points: Option<usize>,
    /// Lebesgue exponent for `embed` (default 4).
    #[arg(long)]
    pub r: Option<f64>,
    /// Random restarts for `embed` (default 8).
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Search space for `embed` (default all).
    #[arg(long, value_enum)]
    pub subspace: Option<SubspaceArg>,
    /// Random pairs per functional in `check-gradients` (default 20).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Energy halvings in `zero-energy` (default 12).
    #[arg(long)]
    pub halvings: Option<usize>,
}

/// Deep merge: objects merge key-wise, everything else is replaced.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

/// Treat config problems as usage errors.
fn config_error(msg: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(format!("config: {msg}"))
}

impl CommonArgs {
    /// Resolved configuration: defaults, then flags, then the config file.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let (p, s, t) = (&mut cfg.problem, &mut cfg.solver, &mut cfg.task);
        if let Some(v) = self.lambda {
            p.lambda = Some(v);
        }
        if let Some(v) = &self.lambda_frac {
            p.lambda = None;
            p.lambda_frac = Some(v.clone());
        }
        macro_rules! set {
            ($($dst:expr => $src:expr),* $(,)?) => { $(if let Some(v) = $src.clone() { $dst = v; })* };
        }
        set!(
            p.q => self.q, p.gamma => self.gamma, p.n => self.n, p.quad_order => self.quad_order,
            s.algo => self.algo, s.options.seed => self.seed, s.options.multi_start => self.multi_start,
            t.energy => self.energy, t.energy_min => self.energy_min, t.points => self.points,
            t.k_check => self.k_check, t.t_max => self.t_max, t.t_points => self.t_points,
            t.r => self.r, t.restarts => self.restarts, t.subspace => self.subspace,
            t.samples => self.samples, t.halvings => self.halvings,
        );
        if self.energy_list.is_some() {
            t.energy_list = self.energy_list.clone();
        }
        if self.energy_max.is_some() {
            t.energy_max = self.energy_max;
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
            let over: Value = serde_json::from_str(&text).map_err(config_error)?;
            let mut base = serde_json::to_value(&cfg).map_err(config_error)?;
            merge(&mut base, over);
            cfg = serde_json::from_value(base).map_err(config_error)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

/// A float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| config_error(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| config_error(format!("cannot write {}: {e}", path.display())))
}

fn write_json(dir: &Path, name: &str, command: &str, cfg: &RunConfig, body: Value) -> Result<()> {
    let doc = json!({
        "command": command,
        "version": VERSION,
        "config": cfg,
        "result": body,
    });
    let mut text = serde_json::to_string_pretty(&doc).map_err(config_error)?;
    text.push('\n');
    write_file(dir, name, &text)
}

/// Outcome of a subcommand: success, or a completed run that did not meet its targets.
enum Outcome {
    Ok,
    NotConverged,
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PRECONDITION } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::NotConverged) => EXIT_NOT_CONVERGED,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            if e.is_precondition() {
                EXIT_PRECONDITION
            } else {
                EXIT_NOT_CONVERGED
            }
        }
    }
}

fn execute(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Eig(a) => cmd_eig(a),
        Command::Constants(a) => cmd_constants(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::ZeroEnergy(a) => cmd_zero_energy(a),
        Command::Fiber(a) => cmd_fiber(a),
        Command::CheckGradients(a) => cmd_check_gradients(a),
        Command::CheckAssumptions(a) => cmd_check_assumptions(a),
        Command::Embed(a) => cmd_embed(a),
    }
}

fn cmd_eig(a: &CommonArgs) -> Result<Outcome> {
    let cfg = a.resolve()?;
    let p = cfg.build_problem()?;
    let s = &p.spectral;
    let count = cfg.task.k_check.clamp(1, s.n());
    let mut csv = String::from("index,eigenvalue,continuum,rel_error\n");
    let mut rows = Vec::new();
    for j in 0..count {
        let l = s.eigenvalues()[j];
        let exact = ((j + 1) as f64 * std::f64::consts::PI).powi(2);
        let rel = (l - exact).abs() / exact;
        let _ = writeln!(csv, "{},{},{},{}", j + 1, fmt_f64(l), fmt_f64(exact), fmt_f64(rel));
        rows.push(json!({"index": j + 1, "eigenvalue": l, "continuum": exact, "rel_error": rel}));
    }
    let ortho = orthonormality_error(s);
    let dir = a.out_dir();
    write_file(&dir, "eig.csv", &csv)?;
    write_json(
        &dir,
        "eig.json",
        "eig",
        &cfg,
        json!({"lambda": p.lambda(), "k": p.k(), "eigenpairs": rows, "m_orthonormality_error": ortho}),
    )?;
    println!("lambda = {}, k = {}, M-orthonormality error = {ortho:.3e}", p.lambda(), p.k());
    Ok(Outcome::Ok)
}

/// `max |e_iᵀ M e_j − δ_ij|` over all eigenvector pairs.
pub fn orthonormality_error(s: &SpectralData) -> f64 {
    let n = s.n();
    let me: Vec<Field> = (0..n).map(|i| s.mass().apply(&s.eigenvector(i))).collect();
    let mut worst = 0.0_f64;
    for i in 0..n {
        let ei = s.eigenvector(i);
        for (j, mej) in me.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((ei.dot(mej) - target).abs());
        }
    }
    worst
}

fn cmd_constants(a: &CommonArgs) -> Result<Outcome> {
    let cfg = a.resolve()?;
    let p = cfg.build_problem()?;
    let solver = Solver::new(&p, cfg.solver.options.clone())?;
    let c = solver.constants();
    let e = cfg.task.energy;
    let at_e = (e > 0.0 && e < c.e_k_lambda).then(|| {
        json!({"E": e, "rho": solver.truncation(e).rho, "rho_est": c.rho_est(e), "delta_e": c.delta_e(e)})
    });
    write_json(
        &a.out_dir(),
        "constants.json",
        "constants",
        &cfg,
        json!({"lambda": p.lambda(), "k": p.k(), "constants": c, "at_energy": at_e}),
    )?;
    println!("k = {}, r_k = {}, E_k = {}", p.k(), c.r_k_lambda, c.e_k_lambda);
    Ok(Outcome::Ok)
}

fn solution_csv(mesh: &Mesh, u: &Field) -> String {
    let mut csv = String::from("x,u\n");
    let _ = writeln!(csv, "{},{}", fmt_f64(0.0), fmt_f64(0.0));
    for (i, v) in u.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", fmt_f64(mesh.node(i)), fmt_f64(*v));
    }
    let _ = writeln!(csv, "{},{}", fmt_f64(1.0), fmt_f64(0.0));
    csv
}

/// `|R^E(u) − μ|` for a computed solution.
pub fn identity_defect(p: &ProblemSpec, r: &SaddleResult) -> Result<f64> {
    Ok((p.rayleigh(&r.u, r.energy_target)? - r.mu).abs())
}

fn cmd_solve(a: &CommonArgs) -> Result<Outcome> {
    let cfg = a.resolve()?;
    let p = cfg.build_problem()?;
    let solver = Solver::new(&p, cfg.solver.options.clone())?;
    let e = cfg.task.energy;
    let (result, linking) = match cfg.solver.algo {
        Algo::Lmm => {
            let frame = solver.frame(e)?;
            let lv = solver.linking_values(&frame, e)?;
            (solver.solve_in_frame(&frame, e, None)?, Some(lv))
        }
        Algo::Mpa => (solver.solve_mpa(e)?, None),
    };
    let defect = identity_defect(&p, &result)?;
    let cerami = cerami_monitor(&result.trace).ok();
    let dir = a.out_dir();
    write_file(&dir, "solution.csv", &solution_csv(&p.mesh, &result.u))?;
    write_json(
        &dir,
        "solve.json",
        "solve",
        &cfg,
        json!({
            "lambda": p.lambda(),
            "k": p.k(),
            "constants": solver.constants(),
            "linking": linking,
            "solution": result,
            "rayleigh_identity_defect": defect,
            "cerami": cerami,
        }),
    )?;
    println!(
        "{} mu = {} dual_residual = {:.3e} converged = {}",
        match result.algorithm {
            Algorithm::Lmm => "lmm",
            Algorithm::Mpa => "mpa",
        },
        result.mu,
        result.dual_residual,
        result.converged
    );
    Ok(if result.converged { Outcome::Ok } else { Outcome::NotConverged })
}

/// Log-spaced interior grid of `count` points in `(lo, hi)`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * (i as f64 + 0.5) / count as f64).exp())
        .collect()
}

fn cmd_sweep(a: &CommonArgs) -> Result<Outcome> {
    let cfg = a.resolve()?;
    let p = cfg.build_problem()?;
    let solver = Solver::new(&p, cfg.solver.options.clone())?;
    let ek = solver.constants().e_k_lambda;
    let energies = match &cfg.task.energy_list {
        Some(list) => list.clone(),
        None => {
            let hi = cfg.task.energy_max.unwrap_or(0.8 * ek);
            if !(cfg.task.energy_min > 0.0 && hi > cfg.task.energy_min) {
                return Err(Error::InvalidParameter(format!(
                    "sweep range ({}, {hi}) is empty",
                    cfg.task.energy_min
                )));
            }
            log_grid(cfg.task.energy_min, hi, cfg.task.points.max(1))
        }
    };
    let sweep = sweep_with(&solver, &energies)?;
    let mut csv = String::from("E,mu,residual,iterations,converged\n");
    for r in &sweep.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt_f64(r.energy),
            fmt_f64(r.mu),
            fmt_f64(r.dual_residual),
            r.iterations,
            r.converged
        );
    }
    let dir = a.out_dir();
    write_file(&dir, "sweep.csv", &csv)?;
    write_json(&dir, "sweep.json", "sweep", &cfg, json!({"E_k": ek, "sweep": sweep}))?;
    println!(
        "{} rows, {} converged, monotone = {}",
        sweep.rows.len(),
        sweep.rows.iter().filter(|r| r.converged).count(),
        sweep.monotone
    );
    let all = sweep.rows.iter().all(|r| r.converged);
    Ok(if all && sweep.monotone { Outcome::Ok } else { Outcome::NotConverged })
}

fn cmd_zero_energy(a: &CommonArgs) -> Result<Outcome> {
    let cfg = a.resolve()?;
    let p = cfg.build_problem()?;
    let solver = Solver::new(&p, cfg.solver.options.clone())?;
    let z = zero_energy_with(
        &solver,
        ZeroEnergyOptions {
            e_start: cfg.task.energy_start,
            halvings: cfg.task.halvings,
            ..ZeroEnergyOptions::default()
        },
    )?;
    let mut csv = String::from("m,E,mu,residual,mu_increment,field_increment,converged\n");
    for s in &z.steps {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            s.m,
            fmt_f64(s.energy),
            fmt_f64(s.mu),
            fmt_f64(s.dual_residual),
            opt(s.mu_increment),
            opt(s.field_increment),
            s.converged
        );
    }
    let dir = a.out_dir();
    write_file(&dir, "zero_energy.csv", &csv)?;
    write_file(&dir, "zero_energy_solution.csv", &solution_csv(&p.mesh, &z.solution.u))?;
    write_json(&dir, "zero_energy.json", "zero-energy", &cfg, serde_json::to_value(&z).map_err(config_error)?)?;
    println!(
        "mu_bar(0) = {} |E| = {:.3e} converged = {}",
        z.mu_bar_0,
        z.solution.energy_achieved.abs(),
        z.solution.converged
    );
    Ok(if z.solution.converged && z.monotone { Outcome::Ok } else { Outcome::NotConverged })
}

fn cmd_fiber(a: &CommonArgs) -> Result<Outcome> {
    let cfg = a.resolve()?;
    let p = cfg.build_problem()?;
    let k = p.k();
    let bar = p.spectral.unit_mode(k.min(p.n() - 1));
    let bar = bar.scaled(1.0 / p.spectral.norm1(&bar).total);
    let m = cfg.task.t_points.max(2);
    let grid: Vec<f64> = (0..m).map(|i| cfg.task.t_max * i as f64 / (m - 1) as f64).collect();
    let prof = fibering_profile(&p, &bar, &Field::zeros(p.n()), cfg.task.energy, &grid)?;
    let mut csv = String::from("t,value\n");
    for (t, v) in prof.t_grid.iter().zip(&prof.values) {
        let _ = writeln!(csv, "{},{}", fmt_f64(*t), v.map(fmt_f64).unwrap_or_default());
    }
    let dir = a.out_dir();
    write_file(&dir, "fiber.csv", &csv)?;
    write_json(&dir, "fiber.json", "fiber", &cfg, serde_json::to_value(&prof).map_err(config_error)?)?;
    println!("peak t = {} value = {}", prof.peak_t, prof.peak_value);
    Ok(Outcome::Ok)
}

/// Tolerance of the FD checks outside and inside the truncation band.
pub const FD_TOL: f64 = 1e-6;
pub const FD_TOL_BAND: f64 = 1e-5;

fn cmd_check_gradients(a: &CommonArgs) -> Result<Outcome> {
    let cfg = a.resolve()?;
    let p = cfg.build_problem()?;
    let e = cfg.task.energy;
    let rho = Solver::new(&p, cfg.solver.options.clone())?.truncation(e).rho;
    let mut report = String::new();
    let mut csv = String::from("functional,sample,analytic,finite_difference,rel_error,passed\n");
    let mut all = true;
    let cases = [
        ("energy", Functional::Energy { mu: 1.0 }, None, FD_TOL),
        ("rayleigh", Functional::Rayleigh { energy: e }, None, FD_TOL),
        ("rayleigh_trunc", Functional::RayleighTrunc { energy: e, rho }, None, FD_TOL),
        ("rayleigh_trunc_band", Functional::RayleighTrunc { energy: e, rho }, Some(0.75 * rho), FD_TOL_BAND),
    ];
    for (ci, (name, f, norm, tol)) in cases.iter().enumerate() {
        let mut worst = 0.0_f64;
        for i in 0..cfg.task.samples {
            let seed = cfg.solver.options.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1000 * ci as u64 + i as u64);
            let (u, v) = random_pair(&p.spectral, *norm, seed);
            let c = fd_gradient_check(&p, *f, &u, &v, cfg.task.fd_h)?;
            let ok = c.rel_error <= *tol;
            all &= ok;
            worst = worst.max(c.rel_error);
            let _ = writeln!(
                csv,
                "{name},{i},{},{},{},{ok}",
                fmt_f64(c.analytic),
                fmt_f64(c.finite_difference),
                fmt_f64(c.rel_error)
            );
        }
        let _ = writeln!(
            report,
            "{name:<20} {} worst rel. error {worst:.3e} (tol {tol:.0e})",
            if worst <= *tol { "PASS" } else { "FAIL" }
        );
    }
    let dir = a.out_dir();
    write_file(&dir, "gradients.csv", &csv)?;
    write_file(&dir, "gradients.txt", &report)?;
    print!("{report}");
    Ok(if all { Outcome::Ok } else { Outcome::NotConverged })
}

fn cmd_check_assumptions(a: &CommonArgs) -> Result<Outcome> {
    let cfg = a.resolve()?;
    let p = cfg.build_problem()?;
    let s: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.05).collect();
    let x: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
    let rep = check_assumptions(&p.nonlinearity, &s, &x);
    let dir = a.out_dir();
    let text = rep.to_string();
    write_file(&dir, "assumptions.txt", &text)?;
    write_json(&dir, "assumptions.json", "check-assumptions", &cfg, serde_json::to_value(&rep).map_err(config_error)?)?;
    print!("{text}");
    if rep.all_passed() {
        Ok(Outcome::Ok)
    } else {
        Err(Error::InvalidParameter("nonlinearity violates the structural assumptions".into()))
    }
}

fn cmd_embed(a: &CommonArgs) -> Result<Outcome> {
    let cfg = a.resolve()?;
    let p = cfg.build_problem()?;
    let sub = match cfg.task.subspace {
        SubspaceArg::All => Subspace::All,
        SubspaceArg::Wplus => Subspace::Wplus,
    };
    let est = embedding_constant(
        &p.mesh,
        &p.spectral,
        cfg.task.r,
        cfg.task.restarts.max(1),
        sub,
        cfg.solver.options.seed,
    )?;
    let dir = a.out_dir();
    write_json(
        &dir,
        "embed.json",
        "embed",
        &cfg,
        json!({"r": est.r, "subspace": cfg.task.subspace, "value": est.value, "history": est.history}),
    )?;
    println!("S_{} ≈ {}", est.r, est.value);
    Ok(Outcome::Ok)
}
