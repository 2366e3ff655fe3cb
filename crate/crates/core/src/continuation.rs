//! Continuation in the prescribed energy: sweeps of `μ(E)` over
//! `(0, E^k_λ)` and the zero-energy limit for `λ < λ_1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::ProblemSpec;
use crate::mesh::Field;
use crate::minimax::{newton_refine, Algorithm, LinkingFrame, SaddleResult, Solver, SolverOptions};

/// Allowed increase of `μ` with `E` before a row counts as a branch jump.
pub const TOL_MONO: f64 = 1e-6;
/// Cauchy threshold on successive multipliers in the zero-energy limit.
pub const TOL_CAUCHY_MU: f64 = 1e-4;
/// Cauchy threshold on successive fields in `‖·‖₁`.
pub const TOL_CAUCHY_U: f64 = 1e-3;
/// Energy defect accepted for the refined zero-energy solution.
pub const TOL_ZERO_ENERGY: f64 = 1e-6;
/// Multi-start width used when a row has to be retried.
const RETRY_STARTS: usize = 4;

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub energy: f64,
    pub mu: f64,
    pub dual_residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Solver error for a failed row.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    /// Ascending in `E`.
    pub rows: Vec<SweepRow>,
    pub monotone: bool,
    /// Linear extrapolation of `μ` to `E = 0` from the two lowest converged rows (`k = 0`).
    pub mu_bar_0: Option<f64>,
}

/// `μ` nonincreasing in `E` within [`TOL_MONO`] across converged rows.
pub fn is_monotone(rows: &[SweepRow]) -> bool {
    let conv: Vec<&SweepRow> = rows.iter().filter(|r| r.converged).collect();
    conv.windows(2).all(|w| w[1].mu <= w[0].mu + TOL_MONO)
}

fn row(energy: f64, r: &Result<SaddleResult>) -> SweepRow {
    match r {
        Ok(s) => SweepRow {
            energy,
            mu: s.mu,
            dual_residual: s.dual_residual,
            converged: s.converged,
            iterations: s.iterations,
            error: None,
        },
        Err(e) => SweepRow {
            energy,
            mu: f64::NAN,
            dual_residual: f64::NAN,
            converged: false,
            iterations: 0,
            error: Some(e.to_string()),
        },
    }
}

/// Solve at `energy` warm-started from `prev`, retrying with a multi-start
/// when the warm solve fails or jumps below the previous multiplier.
fn solve_row(
    solver: &Solver<'_>,
    frame: &LinkingFrame,
    energy: f64,
    prev: Option<&SaddleResult>,
) -> Result<SaddleResult> {
    let warm = prev.map(|r| &r.u);
    let first = solver.solve_in_frame(frame, energy, warm);
    let jumped = |r: &SaddleResult| prev.is_some_and(|p| p.converged && r.mu < p.mu - TOL_MONO);
    match &first {
        Ok(r) if r.converged && !jumped(r) => return first,
        _ => {}
    }
    let starts = solver.options().multi_start.max(RETRY_STARTS);
    let retry = solver.solve_multi(frame, energy, starts);
    match (first, retry) {
        (Ok(a), Ok(b)) => {
            // keep the candidate that is converged and continues the branch
            let score = |r: &SaddleResult| (r.converged, !jumped(r), r.mu);
            let (sa, sb) = (score(&a), score(&b));
            if (sb.0, sb.1) > (sa.0, sa.1) || ((sb.0, sb.1) == (sa.0, sa.1) && sb.2 > sa.2) {
                Ok(b)
            } else {
                Ok(a)
            }
        }
        (Ok(a), Err(_)) => Ok(a),
        (Err(_), retry) => retry,
    }
}

/// Sweep `μ(E)` over an ascending list of energies in a frame fixed at the smallest `E`.
pub fn sweep_energy(p: &ProblemSpec, energies: &[f64], opts: SolverOptions) -> Result<SweepResult> {
    let solver = Solver::new(p, opts)?;
    sweep_with(&solver, energies)
}

pub fn sweep_with(solver: &Solver<'_>, energies: &[f64]) -> Result<SweepResult> {
    if energies.is_empty() {
        return Err(Error::InvalidParameter("empty energy list".into()));
    }
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &e in &sorted {
        solver.constants().check_energy(e)?;
    }
    let frame = solver.frame(sorted[0])?;

    let mut rows = Vec::with_capacity(sorted.len());
    let mut prev: Option<SaddleResult> = None;
    for &e in sorted.iter().rev() {
        let res = solver
            .linking_values(&frame, e)
            .and_then(|_| solve_row(solver, &frame, e, prev.as_ref()));
        rows.push(row(e, &res));
        if let Ok(r) = res {
            if r.converged {
                prev = Some(r);
            }
        }
    }
    rows.reverse();
    if !rows.iter().any(|r| r.converged) {
        return Err(Error::AllFailed);
    }
    let monotone = is_monotone(&rows);
    let mu_bar_0 = if solver.problem().k() == 0 {
        let conv: Vec<&SweepRow> = rows.iter().filter(|r| r.converged).collect();
        match conv.as_slice() {
            [a, b, ..] if b.energy > a.energy => {
                Some(a.mu - a.energy * (b.mu - a.mu) / (b.energy - a.energy))
            }
            _ => None,
        }
    } else {
        None
    };
    Ok(SweepResult { rows, monotone, mu_bar_0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroEnergyStep {
    pub m: usize,
    pub energy: f64,
    pub mu: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// `|μ_m − μ_{m−1}|`.
    pub mu_increment: Option<f64>,
    /// `‖u_m − u_{m−1}‖₁`.
    pub field_increment: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroEnergyResult {
    pub steps: Vec<ZeroEnergyStep>,
    /// Refined solution of `DE_μ(u) = 0, E_μ(u) = 0`.
    pub solution: SaddleResult,
    /// `μ̄(0)`, the multiplier of the refined limit.
    pub mu_bar_0: f64,
    /// `μ(E_m)` nondecreasing as `E_m` decreases, within [`TOL_MONO`].
    pub monotone: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ZeroEnergyOptions {
    pub e_start: f64,
    /// Number of halvings `M`; energies `E_start·2^{−m}`, `m = 0..=M`.
    pub halvings: usize,
    /// Trailing iterates that must satisfy the Cauchy thresholds.
    pub cauchy_window: usize,
}

impl Default for ZeroEnergyOptions {
    fn default() -> Self {
        Self {
            e_start: 0.01,
            halvings: 12,
            cauchy_window: 3,
        }
    }
}

/// Limit `E → 0⁺` of the mountain-pass branch, refined at `E = 0`.
pub fn zero_energy_limit(
    p: &ProblemSpec,
    opts: SolverOptions,
    zopts: ZeroEnergyOptions,
) -> Result<ZeroEnergyResult> {
    let solver = Solver::new(p, opts)?;
    zero_energy_with(&solver, zopts)
}

pub fn zero_energy_with(solver: &Solver<'_>, zopts: ZeroEnergyOptions) -> Result<ZeroEnergyResult> {
    let p = solver.problem();
    if p.k() != 0 {
        return Err(Error::InvalidParameter(format!(
            "the zero-energy limit needs λ < λ_1 (k = 0), got k = {}",
            p.k()
        )));
    }
    let energies: Vec<f64> = (0..=zopts.halvings)
        .map(|m| zopts.e_start * 0.5f64.powi(m as i32))
        .collect();
    for &e in &energies {
        solver.constants().check_energy(e)?;
    }
    let frame = solver.frame(*energies.last().unwrap())?;

    let mut steps: Vec<ZeroEnergyStep> = Vec::new();
    let mut prev: Option<SaddleResult> = None;
    for (m, &e) in energies.iter().enumerate() {
        let r = solve_row(solver, &frame, e, prev.as_ref())?;
        let (dmu, du) = match &prev {
            Some(q) => (
                Some((r.mu - q.mu).abs()),
                Some(p.spectral.norm1(&r.u.sub(&q.u)).total),
            ),
            None => (None, None),
        };
        steps.push(ZeroEnergyStep {
            m,
            energy: e,
            mu: r.mu,
            dual_residual: r.dual_residual,
            converged: r.converged,
            mu_increment: dmu,
            field_increment: du,
        });
        prev = Some(r);
    }
    let window = zopts.cauchy_window.max(1).min(steps.len() - 1);
    let tail = &steps[steps.len() - window..];
    let cauchy = tail.iter().all(|s| {
        s.converged
            && s.mu_increment.is_some_and(|d| d <= TOL_CAUCHY_MU)
            && s.field_increment.is_some_and(|d| d <= TOL_CAUCHY_U)
    });
    if !cauchy {
        return Err(Error::NotCauchy(zopts.halvings));
    }
    let monotone = steps.windows(2).all(|w| w[1].mu >= w[0].mu - TOL_MONO);

    let last = prev.unwrap();
    let opts = solver.options();
    let refined = newton_refine(p, &last.u, last.mu, 0.0, opts)?;
    let u: Field = refined.u;
    let mu = refined.mu;
    let energy_achieved = p.energy(&u, mu)?;
    let norm1 = p.spectral.norm1(&u).total;
    let lq_norm = p.lq_norm(&u)?;
    let dual_residual = p.grad_energy(&u, mu)?.dual_residual;
    let converged = dual_residual <= opts.tol_refine
        && energy_achieved.abs() <= TOL_ZERO_ENERGY
        && mu > 0.0
        && lq_norm > 0.0;
    let solution = SaddleResult {
        algorithm: Algorithm::Lmm,
        u,
        mu,
        energy_target: 0.0,
        energy_achieved,
        dual_residual,
        search_residual: last.search_residual,
        norm1,
        lq_norm,
        rho: 0.0,
        iterations: last.iterations,
        newton_iterations: refined.iterations,
        converged,
        trace: last.trace,
        multiplicity_notes: last.multiplicity_notes,
    };
    Ok(ZeroEnergyResult {
        steps,
        solution,
        mu_bar_0: mu,
        monotone,
    })
}
