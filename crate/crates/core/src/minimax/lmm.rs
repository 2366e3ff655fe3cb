//! Local minimax descent over the unit sphere of W⁺.

use super::constants::{estimate_constants, AscentEmbedding, Constants};
use super::linking::{select_frame, verify_linking_values, LinkingFrame, LinkingValues};
use super::newton::newton_refine;
use super::peak::{peak_selection, ray_local_maxima, Peak, PeakOptions};
use super::{Algorithm, SaddleResult, SolverOptions, TraceRecord};
use crate::error::{Error, Result};
use crate::functionals::{ProblemSpec, TruncationParams};
use crate::mesh::Field;

/// Below this `|u|_Lq` an iterate counts as collapsed onto the origin.
const TOL_COLLAPSE: f64 = 1e-10;

/// Saddle searches for one problem, sharing the estimated constants.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    p: &'a ProblemSpec,
    opts: SolverOptions,
    consts: Constants,
}

impl<'a> Solver<'a> {
    pub fn new(p: &'a ProblemSpec, opts: SolverOptions) -> Result<Self> {
        let embed = AscentEmbedding {
            restarts: opts.embedding_restarts,
            seed: opts.seed,
        };
        let consts = estimate_constants(p, &embed)?;
        Ok(Self { p, opts, consts })
    }

    pub fn with_constants(p: &'a ProblemSpec, opts: SolverOptions, consts: Constants) -> Self {
        Self { p, opts, consts }
    }

    pub fn problem(&self) -> &'a ProblemSpec {
        self.p
    }

    pub fn constants(&self) -> &Constants {
        &self.consts
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn truncation(&self, energy: f64) -> TruncationParams {
        TruncationParams {
            rho: self.opts.rho.unwrap_or_else(|| self.consts.default_rho(energy)),
        }
    }

    /// Initial `W⁺` direction number `i` of the multi-start family.
    pub fn start_direction(&self, i: usize) -> Field {
        let s = &self.p.spectral;
        let k = s.k();
        let n = s.n();
        let mode = |j: usize| s.unit_mode((k + j).min(n - 1));
        let v = match i {
            0 => mode(0),
            1 => mode(1),
            2 => mode(0).add_scaled(0.5, &mode(1)),
            3 => mode(0).add_scaled(-0.5, &mode(1)),
            j => mode(j - 2),
        };
        let nrm = s.norm1(&v).total;
        v.scaled(1.0 / nrm)
    }

    /// Linking frame around `ū⁺ = ē_{k+1}` valid at `energy` and every larger level.
    pub fn frame(&self, energy: f64) -> Result<LinkingFrame> {
        self.consts.check_energy(energy)?;
        select_frame(
            self.p,
            &self.consts,
            self.start_direction(0),
            energy,
            self.truncation(energy),
            self.opts.frame_samples,
            self.opts.frame_t,
            self.opts.seed,
        )
    }

    pub fn linking_values(&self, frame: &LinkingFrame, energy: f64) -> Result<LinkingValues> {
        verify_linking_values(
            self.p,
            frame,
            &self.consts,
            energy,
            self.truncation(energy),
            self.opts.seed,
        )
    }

    /// Local minimax solve with the configured multi-start.
    pub fn solve(&self, energy: f64) -> Result<SaddleResult> {
        let frame = self.frame(energy)?;
        self.linking_values(&frame, energy)?;
        self.solve_in_frame(&frame, energy, None)
    }

    /// Solve inside a fixed frame, optionally warm-started from a nearby solution.
    pub fn solve_in_frame(
        &self,
        frame: &LinkingFrame,
        energy: f64,
        warm: Option<&Field>,
    ) -> Result<SaddleResult> {
        self.consts.check_energy(energy)?;
        if let Some(prev) = warm {
            let (v, coords) = self.warm_start(prev);
            return self.descend(frame, energy, v, Some(coords));
        }
        let starts = self.opts.multi_start.max(1);
        let mut results = Vec::new();
        let mut first_err = None;
        for i in 0..starts {
            match self.descend(frame, energy, self.start_direction(i), None) {
                Ok(r) => results.push(r),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        merge_results(results, self.opts.tol_refine).ok_or_else(|| first_err.unwrap())
    }

    /// Multi-start solve ignoring any warm start.
    pub fn solve_multi(&self, frame: &LinkingFrame, energy: f64, starts: usize) -> Result<SaddleResult> {
        let mut results = Vec::new();
        let mut first_err = None;
        for i in 0..starts.max(1) {
            match self.descend(frame, energy, self.start_direction(i), None) {
                Ok(r) => results.push(r),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        merge_results(results, self.opts.tol_refine).ok_or_else(|| first_err.unwrap())
    }

    /// Direction and peak coordinates reproducing `prev`.
    fn warm_start(&self, prev: &Field) -> (Field, Vec<f64>) {
        let s = &self.p.spectral;
        let (plus, _) = s.split(prev);
        let t = s.norm1(&plus).total;
        let mut coords: Vec<f64> = s
            .minus_coefficients(prev)
            .iter()
            .enumerate()
            .map(|(i, c)| c * (s.lambda() - s.eigenvalues()[i]).sqrt())
            .collect();
        coords.push(t);
        (plus.scaled(1.0 / t), coords)
    }

    fn peak(&self, frame: &LinkingFrame, v: &Field, energy: f64, warm: Option<&[f64]>) -> Result<Peak> {
        peak_selection(
            self.p,
            frame,
            v,
            energy,
            self.truncation(energy),
            warm,
            PeakOptions {
                start_t: self.consts.r_k_lambda,
                tol: self.opts.tol_inner,
                max_iter: self.opts.max_inner,
            },
        )
    }

    fn descend(
        &self,
        frame: &LinkingFrame,
        energy: f64,
        v0: Field,
        warm: Option<Vec<f64>>,
    ) -> Result<SaddleResult> {
        let p = self.p;
        let spec = &p.spectral;
        let opts = &self.opts;
        let tp = self.truncation(energy);

        let mut v = spec.project_plus(&v0);
        v = v.scaled(1.0 / spec.norm1(&v).total);
        let mut peak = self.peak(frame, &v, energy, warm.as_deref())?;
        let mut trace = Vec::new();
        let mut step = 1.0_f64;
        let mut converged = false;
        let mut residual = f64::INFINITY;
        let mut iterations = 0;

        for m in 0..opts.max_outer {
            iterations = m;
            let grad = p.riesz(peak.form.clone())?;
            let norm1 = spec.norm1(&peak.u).total;
            let lq = p.lq_norm(&peak.u)?;
            if lq < TOL_COLLAPSE {
                return Err(Error::CollapseToZero(lq));
            }
            residual = grad.dual_residual;
            trace.push(TraceRecord {
                iteration: m,
                value: peak.value,
                residual,
                norm1,
                lq_norm: lq,
            });
            if residual <= opts.tol_grad * (1.0 + norm1) {
                converged = true;
                break;
            }

            let d = spec.project_plus(&grad.field).scaled(-1.0);
            let slope = -peak.form.dot(&d) * peak.t();
            let mut s = (2.0 * step).min(1e4);
            let mut accepted = None;
            for _ in 0..opts.max_backtrack {
                let trial = v.add_scaled(s, &d);
                let nrm = spec.norm1(&trial).total;
                if nrm > 0.0 {
                    let vt = trial.scaled(1.0 / nrm);
                    let mut warm = peak.coords.clone();
                    *warm.last_mut().unwrap() *= nrm;
                    if let Ok(pk) = self.peak(frame, &vt, energy, Some(&warm)) {
                        if pk.value <= peak.value - opts.armijo_c * s * slope {
                            accepted = Some((vt, pk));
                            break;
                        }
                    }
                }
                s *= opts.backtrack;
            }
            match accepted {
                Some((vt, pk)) => {
                    v = vt;
                    peak = pk;
                    step = s;
                }
                None => {
                    // Armijo fails only at roundoff level of the composed value.
                    if residual <= 10.0 * opts.tol_grad * (1.0 + norm1) {
                        converged = true;
                        break;
                    }
                    return Err(Error::MaxIterOuter {
                        iterations: m,
                        residual,
                    });
                }
            }
        }
        if !converged {
            return Err(Error::MaxIterOuter {
                iterations: opts.max_outer,
                residual,
            });
        }
        let multiplicity = usize::from(ray_local_maxima(p, &peak.u, energy, tp) > 1);
        finish(p, Algorithm::Lmm, peak.u, energy, tp, opts, trace, iterations, residual, multiplicity)
    }
}

/// Refine, check postconditions and assemble the result.
#[allow(clippy::too_many_arguments)]
pub(super) fn finish(
    p: &ProblemSpec,
    algorithm: Algorithm,
    u: Field,
    energy: f64,
    tp: TruncationParams,
    opts: &SolverOptions,
    mut trace: Vec<TraceRecord>,
    iterations: usize,
    search_residual: f64,
    multiplicity_notes: usize,
) -> Result<SaddleResult> {
    let mu0 = p.rayleigh(&u, energy)?;
    let refined = newton_refine(p, &u, mu0, energy, opts)?;
    let u = refined.u;
    let mu = refined.mu;
    let norm1 = p.spectral.norm1(&u).total;
    let lq_norm = p.lq_norm(&u)?;
    if lq_norm < TOL_COLLAPSE {
        return Err(Error::CollapseToZero(lq_norm));
    }
    let after = p.grad_rayleigh_trunc(&u, energy, tp)?;
    trace.push(TraceRecord {
        iteration: iterations + 1,
        value: p.rayleigh_trunc(&u, energy, tp)?,
        residual: after.dual_residual,
        norm1,
        lq_norm,
    });
    let energy_achieved = p.energy(&u, mu)?;
    let dual_residual = p.grad_energy(&u, mu)?.dual_residual;
    let converged = dual_residual <= opts.tol_refine
        && (energy_achieved - energy).abs() <= opts.tol_energy
        && mu > 0.0
        && norm1 > tp.rho;
    Ok(SaddleResult {
        algorithm,
        u,
        mu,
        energy_target: energy,
        energy_achieved,
        dual_residual,
        search_residual,
        norm1,
        lq_norm,
        rho: tp.rho,
        iterations,
        newton_iterations: refined.iterations,
        converged,
        trace,
        multiplicity_notes,
    })
}

/// Converged first, then refined residual class, then highest `μ`.
fn merge_results(mut results: Vec<SaddleResult>, tol_refine: f64) -> Option<SaddleResult> {
    results.sort_by(|a, b| {
        b.converged
            .cmp(&a.converged)
            .then((b.dual_residual <= tol_refine).cmp(&(a.dual_residual <= tol_refine)))
            .then(b.mu.total_cmp(&a.mu))
            .then(a.dual_residual.total_cmp(&b.dual_residual))
    });
    results.into_iter().next()
}

/// Local minimax solve with default frame selection.
pub fn solve_saddle(p: &ProblemSpec, energy: f64, opts: SolverOptions) -> Result<SaddleResult> {
    Solver::new(p, opts)?.solve(energy)
}
