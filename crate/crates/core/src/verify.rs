//! Diagnostic probes and independent checks: finite-difference gradients,
//! discrete Sobolev embedding constants, fibering profiles, small-ball
//! negativity and Cerami monitoring of solver traces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{ProblemSpec, TruncationParams};
use crate::mesh::{Field, Mesh};
use crate::minimax::TraceRecord;
use crate::spectral::SpectralData;

/// Which functional an FD check differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Functional {
    Energy { mu: f64 },
    Rayleigh { energy: f64 },
    RayleighTrunc { energy: f64, rho: f64 },
}

impl Functional {
    pub fn value(&self, p: &ProblemSpec, u: &Field) -> Result<f64> {
        match *self {
            Functional::Energy { mu } => p.energy(u, mu),
            Functional::Rayleigh { energy } => p.rayleigh(u, energy),
            Functional::RayleighTrunc { energy, rho } => {
                p.rayleigh_trunc(u, energy, TruncationParams { rho })
            }
        }
    }

    pub fn form(&self, p: &ProblemSpec, u: &Field) -> Result<Field> {
        match *self {
            Functional::Energy { mu } => p.energy_form(u, mu),
            Functional::Rayleigh { energy } => Ok(p.rayleigh_with_form(u, energy)?.form),
            Functional::RayleighTrunc { energy, rho } => {
                Ok(p.rayleigh_trunc_with_form(u, energy, TruncationParams { rho })?.form)
            }
        }
    }
}

/// Result of comparing an analytic directional derivative with central differences.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FdCheck {
    pub analytic: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
}

pub fn fd_gradient_check(
    p: &ProblemSpec,
    functional: Functional,
    u: &Field,
    v: &Field,
    h: f64,
) -> Result<FdCheck> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("fd step h = {h}")));
    }
    let analytic = functional.form(p, u)?.dot(v);
    let plus = functional.value(p, &u.add_scaled(h, v))?;
    let minus = functional.value(p, &u.add_scaled(-h, v))?;
    let finite_difference = (plus - minus) / (2.0 * h);
    Ok(FdCheck {
        analytic,
        finite_difference,
        rel_error: (analytic - finite_difference).abs() / (analytic.abs() + 1e-12),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberingProfile {
    pub t_grid: Vec<f64>,
    /// `R^E(t u + v)`; `None` where `t u + v` vanishes.
    pub values: Vec<Option<f64>>,
    pub peak_t: f64,
    pub peak_value: f64,
}

/// Above this magnitude the quotient is recomputed with compensated sums.
const LARGE_VALUE: f64 = 1e12;

/// `R^E(u)` with Kahan-compensated quadrature sums.
fn rayleigh_compensated(p: &ProblemSpec, u: &Field, energy: f64) -> Result<f64> {
    let mut lq = Kahan::default();
    let mut g = Kahan::default();
    for qp in p.mesh.quad_points() {
        let s = qp.eval(u.as_slice());
        lq.add(qp.weight * s.abs().powf(p.q));
        g.add(qp.weight * (p.nonlinearity.primitive)(qp.x, s));
    }
    let ku = p.stiffness().apply(u);
    let mu = p.spectral.mass().apply(u);
    let mut h = Kahan::default();
    for i in 0..u.len() {
        h.add(u[i] * (ku[i] - p.lambda() * mu[i]));
    }
    let d = lq.sum / p.q;
    if !(lq.sum > 0.0) {
        return Err(Error::ZeroDenominator(0.0));
    }
    let mut num = Kahan::default();
    num.add(0.5 * h.sum);
    num.add(-g.sum);
    num.add(-energy);
    Ok(num.sum / d)
}

#[derive(Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

pub fn fibering_profile(
    p: &ProblemSpec,
    u: &Field,
    v: &Field,
    energy: f64,
    t_grid: &[f64],
) -> Result<FiberingProfile> {
    if u.max_abs() == 0.0 {
        return Err(Error::ZeroDenominator(0.0));
    }
    let mut values = Vec::with_capacity(t_grid.len());
    let (mut peak_t, mut peak_value) = (f64::NAN, f64::NEG_INFINITY);
    for &t in t_grid {
        let w = v.add_scaled(t, u);
        let val = match p.rayleigh(&w, energy) {
            Ok(r) if r.abs() > LARGE_VALUE => Some(rayleigh_compensated(p, &w, energy)?),
            Ok(r) => Some(r),
            Err(Error::ZeroDenominator(_)) => None,
            Err(e) => return Err(e),
        };
        if let Some(r) = val {
            if r > peak_value {
                peak_value = r;
                peak_t = t;
            }
        }
        values.push(val);
    }
    Ok(FiberingProfile {
        t_grid: t_grid.to_vec(),
        values,
        peak_t,
        peak_value,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallBallReport {
    pub energy: f64,
    pub rho_probe: f64,
    pub samples: usize,
    /// Largest sampled quotient.
    pub worst: f64,
    pub witness_norm1: f64,
    /// Whether the radius lies inside the guaranteed-negative ball and `E > 0`.
    pub asserted: bool,
    pub negative: bool,
}

/// Random unit-`‖·‖₁` field built from a few low modes plus a random high mode.
fn random_direction(spec: &SpectralData, rng: &mut ChaCha8Rng, plus_only: bool) -> Field {
    let n = spec.n();
    let start = if plus_only { spec.k() } else { 0 };
    let low = (start + 8).min(n);
    let mut u = Field::zeros(n);
    for i in start..low {
        let c: f64 = rng.gen_range(-1.0..1.0) / (1.0 + (i - start) as f64);
        u.axpy(c, &spec.unit_mode(i));
    }
    let hi = rng.gen_range(start..n);
    u.axpy(rng.gen_range(-0.3..0.3), &spec.unit_mode(hi));
    let norm = spec.norm1(&u).total;
    if norm == 0.0 {
        return spec.unit_mode(start);
    }
    u.scaled(1.0 / norm)
}

/// Seeded random pair `(u, v)` of the kind used by the gradient checks.
///
/// The base point `u` is a smooth combination of the eight lowest modes, so
/// it has few sign changes and the `|u|^q` integrand stays smooth at the
/// scale of the difference step; the direction `v` additionally carries a
/// random high mode. Both have `‖·‖₁ = norm` (random in `[0.5, 4]` if `None`),
/// so the difference step is relative to the field size.
pub fn random_pair(spec: &SpectralData, norm: Option<f64>, seed: u64) -> (Field, Field) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = norm.unwrap_or_else(|| rng.gen_range(0.5..4.0));
    let mut u = Field::zeros(spec.n());
    for i in 0..8.min(spec.n()) {
        let c: f64 = rng.gen_range(-1.0..1.0) / (1.0 + i as f64);
        u.axpy(c, &spec.unit_mode(i));
    }
    let nu = spec.norm1(&u).total;
    let u = if nu > 0.0 { u.scaled(r / nu) } else { spec.unit_mode(0).scaled(r) };
    let v = random_direction(spec, &mut rng, false).scaled(r);
    (u, v)
}

pub fn small_ball_negativity(
    p: &ProblemSpec,
    energy: f64,
    rho_probe: f64,
    samples: usize,
    seed: u64,
) -> Result<SmallBallReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut witness) = (f64::NEG_INFINITY, 0.0);
    for _ in 0..samples {
        let dir = random_direction(&p.spectral, &mut rng, false);
        let r = rho_probe * rng.gen_range(0.01..=1.0_f64);
        let u = dir.scaled(r);
        let val = p.rayleigh(&u, energy)?;
        if val > worst {
            worst = val;
            witness = p.spectral.norm1(&u).total;
        }
    }
    let asserted = energy > 0.0 && rho_probe <= (2.0 * energy).sqrt();
    Ok(SmallBallReport {
        energy,
        rho_probe,
        samples,
        worst,
        witness_norm1: witness,
        asserted,
        negative: worst < 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Subspace {
    All,
    Wplus,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingEstimate {
    pub r: f64,
    /// Best `|u|_Lr / ‖u‖₁` found.
    pub value: f64,
    /// Best-so-far value after each restart.
    pub history: Vec<f64>,
    pub maximizer: Field,
}

/// Lower bound on the discrete embedding constant `sup |u|_Lr / ‖u‖₁`.
///
/// Each restart runs the conditional-gradient iteration
/// `u ← normalize(Riesz₁ D|u|^r_Lr)`, which increases the convex functional
/// `|u|^r_Lr` monotonically on the unit sphere.
pub fn embedding_constant(
    mesh: &Mesh,
    spec: &SpectralData,
    r: f64,
    restarts: usize,
    subspace: Subspace,
    seed: u64,
) -> Result<EmbeddingEstimate> {
    if !(r >= 1.0) || restarts == 0 {
        return Err(Error::InvalidParameter(format!(
            "embedding constant needs r ≥ 1 and restarts ≥ 1 (r = {r}, restarts = {restarts})"
        )));
    }
    let plus_only = subspace == Subspace::Wplus;
    let first = if plus_only { spec.k() } else { 0 };
    if first >= spec.n() {
        return Err(Error::NoGap(spec.k()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lr = |u: &Field| -> Result<f64> { mesh.integrate(u, |_, s| s.abs().powf(r)) };
    let mut best = f64::NEG_INFINITY;
    let mut best_u = spec.unit_mode(first);
    let mut history = Vec::with_capacity(restarts);
    for restart in 0..restarts {
        let mut u = if restart == 0 {
            spec.unit_mode(first)
        } else {
            random_direction(spec, &mut rng, plus_only)
        };
        let mut val = lr(&u)?;
        for _ in 0..2000 {
            let form = mesh.load(&u, |_, s| r * s.abs().powf(r - 1.0) * s.signum())?;
            let w = spec.riesz_norm1(&form, plus_only);
            let norm = spec.norm1(&w).total;
            if norm == 0.0 {
                break;
            }
            let next = w.scaled(1.0 / norm);
            let next_val = lr(&next)?;
            let done = next_val - val <= 1e-15 * val.abs();
            if next_val >= val {
                u = next;
                val = next_val;
            }
            if done {
                break;
            }
        }
        let ratio = val.powf(1.0 / r);
        if ratio > best {
            best = ratio;
            best_u = u;
        }
        history.push(best);
    }
    Ok(EmbeddingEstimate {
        r,
        value: best,
        history,
        maximizer: best_u,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CeramiReport {
    pub sup_norm1: f64,
    pub final_norm1: f64,
    pub final_residual: f64,
    /// `(1 + ‖u‖₁)·residual` at the last record.
    pub final_scaled_residual: f64,
    pub min_lq_norm: f64,
    pub final_lq_norm: f64,
    pub bounded: bool,
    pub lq_collapsing: bool,
}

/// Growth factor beyond which iterates are flagged as unbounded.
const BOUNDED_FACTOR: f64 = 10.0;

pub fn cerami_monitor(trace: &[TraceRecord]) -> Result<CeramiReport> {
    let last = trace.last().ok_or(Error::EmptyTrace)?;
    let first = &trace[0];
    let sup_norm1 = trace.iter().fold(0.0_f64, |m, r| m.max(r.norm1));
    let min_lq = trace.iter().fold(f64::INFINITY, |m, r| m.min(r.lq_norm));
    let reference = first.norm1.max(last.norm1).max(1.0);
    let lq_ref = trace.iter().fold(0.0_f64, |m, r| m.max(r.lq_norm));
    Ok(CeramiReport {
        sup_norm1,
        final_norm1: last.norm1,
        final_residual: last.residual,
        final_scaled_residual: (1.0 + last.norm1) * last.residual,
        min_lq_norm: min_lq,
        final_lq_norm: last.lq_norm,
        bounded: sup_norm1 <= BOUNDED_FACTOR * reference,
        lq_collapsing: !(last.lq_norm > 1e-6 * lq_ref),
    })
}
