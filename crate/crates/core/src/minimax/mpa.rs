//! Path-based mountain-pass search for `k = 0`.
//!
//! A discrete path from `0` to an endpoint `u₁` with `R^E_ρ(u₁) < 0` is
//! relaxed by a string method: nodes with positive value descend along the
//! component of the gradient normal to the path, while the highest node
//! climbs along the path tangent. The two sub-strings on either side of the
//! climbing node are re-splined to equal `H¹₀` arclength after every step.

use super::lmm::{finish, Solver};
use super::{Algorithm, SaddleResult, TraceRecord};
use crate::error::{Error, Result};
use crate::functionals::{ProblemSpec, TruncationParams};
use crate::mesh::Field;

/// Largest endpoint scale tried, relative to `r_k`.
const ENDPOINT_CAP: f64 = 1048576.0;

fn k_dot(p: &ProblemSpec, a: &Field, b: &Field) -> f64 {
    a.dot(&p.spectral.stiffness().apply(b))
}

fn k_norm(p: &ProblemSpec, a: &Field) -> f64 {
    p.spectral.stiffness().quad_form(a).max(0.0).sqrt()
}

/// Nodes evenly spaced in `H¹₀` arclength along the polyline `pts`.
fn respline(p: &ProblemSpec, pts: &[Field], count: usize) -> Vec<Field> {
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        let l = k_norm(p, &w[1].sub(&w[0]));
        cum.push(cum.last().unwrap() + l);
    }
    let total = *cum.last().unwrap();
    if count < 2 || total <= 0.0 {
        return pts.to_vec();
    }
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for j in 0..count {
        let target = total * j as f64 / (count - 1) as f64;
        if j == count - 1 {
            out.push(pts.last().unwrap().clone());
            break;
        }
        while seg + 1 < cum.len() - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let w = if len > 0.0 { (target - cum[seg]) / len } else { 0.0 };
        out.push(pts[seg].scaled(1.0 - w).add_scaled(w, &pts[seg + 1]));
    }
    out
}

impl Solver<'_> {
    /// Endpoint `t ū⁺` with negative quotient, doubling `t` from `r_k`.
    fn endpoint(&self, energy: f64, tp: TruncationParams) -> Result<Field> {
        let p = self.problem();
        let bar = self.start_direction(0);
        let r = self.constants().r_k_lambda;
        let mut t = r;
        loop {
            let u = bar.scaled(t);
            if p.rayleigh_trunc(&u, energy, tp)? < 0.0 {
                return Ok(u);
            }
            t *= 2.0;
            if t > ENDPOINT_CAP * r {
                return Err(Error::EndpointNotFound(t));
            }
        }
    }

    /// Mountain-pass path search; requires `k = 0`.
    pub fn solve_mpa(&self, energy: f64) -> Result<SaddleResult> {
        let p = self.problem();
        let opts = self.options();
        if p.k() != 0 {
            return Err(Error::InvalidParameter(format!(
                "the mountain-pass path search needs k = 0, got k = {}",
                p.k()
            )));
        }
        self.constants().check_energy(energy)?;
        let tp = self.truncation(energy);
        let end = self.endpoint(energy, tp)?;
        let np = opts.path_points.max(5);
        let mut path: Vec<Field> = (0..np)
            .map(|j| end.scaled(j as f64 / (np - 1) as f64))
            .collect();

        let mut trace = Vec::new();
        // dimensionless step; node j moves by s·D(u_j) times its direction,
        // D = |u|_q^q/q being the scale that makes the quotient gradient O(1)
        let mut s = 0.5_f64;
        let mut residual = f64::INFINITY;
        let mut prev: Option<(Vec<Field>, f64)> = None;

        for it in 0..opts.max_outer {
            let evals = path
                .iter()
                .map(|u| p.rayleigh_trunc_with_form(u, energy, tp))
                .collect::<Result<Vec<_>>>()?;
            let c = (1..np - 1)
                .max_by(|&a, &b| evals[a].value.total_cmp(&evals[b].value))
                .unwrap();
            let grad = p.riesz(evals[c].form.clone())?;
            let cur = grad.dual_residual;
            if let Some((old, old_res)) = prev.take() {
                if !(cur <= 2.0 * old_res) {
                    // reject: restore the previous path and halve the step
                    path = old;
                    s *= opts.backtrack;
                    if s < 1e-14 {
                        break;
                    }
                    continue;
                }
                s = if cur < old_res { (1.2 * s).min(1.0) } else { s * 0.9 };
            }
            let norm1 = p.spectral.norm1(&path[c]).total;
            let lq = p.lq_norm(&path[c])?;
            residual = cur;
            trace.push(TraceRecord {
                iteration: it,
                value: evals[c].value,
                residual,
                norm1,
                lq_norm: lq,
            });
            if residual <= opts.tol_grad * (1.0 + norm1) {
                return finish(p, Algorithm::Mpa, path[c].clone(), energy, tp, opts, trace, it, residual, 0);
            }

            let mut next = path.clone();
            for j in 1..np - 1 {
                let tau = path[j + 1].sub(&path[j - 1]);
                let tn = k_norm(p, &tau);
                if tn <= 0.0 || !(j == c || evals[j].value > 0.0) {
                    continue;
                }
                let tau = tau.scaled(1.0 / tn);
                let gj = if j == c { grad.clone() } else { p.riesz(evals[j].form.clone())? };
                let along = k_dot(p, &gj.field, &tau);
                let weight = if j == c { 2.0 } else { 1.0 };
                let dir = gj.field.add_scaled(-weight * along, &tau);
                let dj = p.parts(&path[j])?.lq / p.q;
                let mut disp = s * dj;
                // never move a node further than a tenth of its own size
                let len = disp * k_norm(p, &dir);
                let cap = 0.1 * k_norm(p, &path[j]);
                if len > cap {
                    disp *= cap / len;
                }
                next[j] = path[j].add_scaled(-disp, &dir);
            }
            let mut left = respline(p, &next[..=c], c + 1);
            let right = respline(p, &next[c..], np - c);
            left.extend_from_slice(&right[1..]);
            prev = Some((std::mem::replace(&mut path, left), cur));
        }
        Err(Error::MaxIter {
            iterations: opts.max_outer,
            residual,
        })
    }
}

/// Mountain-pass path search with default options handling.
pub fn solve_mountain_pass_path(
    p: &ProblemSpec,
    energy: f64,
    opts: super::SolverOptions,
) -> Result<SaddleResult> {
    Solver::new(p, opts)?.solve_mpa(energy)
}
