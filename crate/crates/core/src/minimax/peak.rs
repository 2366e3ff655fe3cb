//! Peak selection: maximize `R^E_ρ` over `W⁻ ⊕ {t v : t ≥ 0}` by BFGS
//! ascent in the `k + 1` coordinates of the `‖·‖₁`-unit basis
//! `(ē_1, …, ē_k, v)`.

use super::LinkingFrame;
use crate::error::{Error, Result};
use crate::functionals::{ProblemSpec, TruncationParams};
use crate::mesh::Field;

#[derive(Debug, Clone)]
pub struct Peak {
    pub u: Field,
    /// Coordinates `(c_1, …, c_k, t)`.
    pub coords: Vec<f64>,
    pub value: f64,
    /// Form of `DR^E_ρ` at `u`.
    pub form: Field,
    pub grad_norm: f64,
    pub iterations: usize,
}

impl Peak {
    /// Coefficient of the direction `v`.
    pub fn t(&self) -> f64 {
        *self.coords.last().unwrap()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PeakOptions {
    /// Starting coefficient of `v` without a warm start.
    pub start_t: f64,
    pub tol: f64,
    pub max_iter: usize,
}

const COORD_CAP: f64 = 1e8;

struct Subspace<'a> {
    p: &'a ProblemSpec,
    basis: Vec<&'a Field>,
    energy: f64,
    tp: TruncationParams,
}

impl Subspace<'_> {
    fn point(&self, c: &[f64]) -> Field {
        let mut u = Field::zeros(self.p.n());
        for (ci, b) in c.iter().zip(&self.basis) {
            u.axpy(*ci, b);
        }
        u
    }

    /// Value, coordinate gradient, field and form; `None` outside the domain.
    fn eval(&self, c: &[f64]) -> Option<(f64, Vec<f64>, Field, Field)> {
        let u = self.point(c);
        let ev = self.p.rayleigh_trunc_with_form(&u, self.energy, self.tp).ok()?;
        if !ev.value.is_finite() {
            return None;
        }
        let g = self.basis.iter().map(|b| ev.form.dot(b)).collect();
        Some((ev.value, g, u, ev.form))
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn peak_selection(
    p: &ProblemSpec,
    frame: &LinkingFrame,
    v: &Field,
    energy: f64,
    tp: TruncationParams,
    warm: Option<&[f64]>,
    opts: PeakOptions,
) -> Result<Peak> {
    let mut basis: Vec<&Field> = frame.minus_basis.iter().collect();
    basis.push(v);
    let dim = basis.len();
    let sub = Subspace { p, basis, energy, tp };

    let mut c: Vec<f64> = match warm {
        Some(w) if w.len() == dim && w[dim - 1] > 0.0 => w.to_vec(),
        _ => {
            let mut c = vec![0.0; dim];
            c[dim - 1] = opts.start_t;
            c
        }
    };
    let (mut f, mut g, mut u, mut form) = sub
        .eval(&c)
        .ok_or_else(|| Error::InvalidParameter("peak selection started outside the domain".into()))?;

    // inverse Hessian approximation of −f
    let mut hinv = identity(dim);
    let mut fresh = true;
    for iter in 0..opts.max_iter {
        let gn = inf_norm(&g);
        if gn <= opts.tol {
            return Ok(Peak { u, coords: c, value: f, form, grad_norm: gn, iterations: iter });
        }
        // ascent direction d = H g
        let d: Vec<f64> = (0..dim).map(|i| (0..dim).map(|j| hinv[i][j] * g[j]).sum()).collect();
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        let d = if slope > 0.0 { d } else { g.clone() };
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();

        let mut alpha = 1.0_f64;
        let scale = inf_norm(&c).max(1.0);
        let dn = inf_norm(&d);
        if dn * alpha > scale {
            alpha = scale / dn;
        }
        let last = dim - 1;
        if d[last] < 0.0 {
            alpha = alpha.min(-0.5 * c[last] / d[last]);
        }
        let mut accepted = None;
        // value changes below this are roundoff; there the step is judged by
        // the reduction of the directional derivative instead
        let noise = 64.0 * f64::EPSILON * f.abs().max(1.0);
        for _ in 0..60 {
            let trial: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            if trial == c {
                break;
            }
            if let Some(ev) = sub.eval(&trial) {
                let armijo = ev.0 >= f + 1e-4 * alpha * slope;
                let flat = (ev.0 - f).abs() <= noise && {
                    let new_slope: f64 = ev.1.iter().zip(&d).map(|(a, b)| a * b).sum();
                    new_slope.abs() <= 0.9 * slope
                };
                if armijo || flat {
                    accepted = Some((trial, ev));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((trial, (f_new, g_new, u_new, form_new))) = accepted else {
            if !fresh {
                hinv = identity(dim);
                fresh = true;
                continue;
            }
            if gn <= 1e3 * opts.tol {
                return Ok(Peak { u, coords: c, value: f, form, grad_norm: gn, iterations: iter });
            }
            return Err(Error::MaxIterInner(iter));
        };
        if inf_norm(&trial) > COORD_CAP {
            return Err(Error::UnboundedAscent(inf_norm(&trial)));
        }
        // BFGS update for the minimization of −f
        let s: Vec<f64> = trial.iter().zip(&c).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g.iter().zip(&g_new).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-14 * inf_norm(&s) * inf_norm(&y) && sy > 0.0 {
            if fresh {
                let yy: f64 = y.iter().map(|a| a * a).sum();
                let gamma = sy / yy;
                for (i, row) in hinv.iter_mut().enumerate() {
                    for (j, h) in row.iter_mut().enumerate() {
                        *h = if i == j { gamma } else { 0.0 };
                    }
                }
                fresh = false;
            }
            bfgs_update(&mut hinv, &s, &y, sy);
        }
        c = trial;
        f = f_new;
        g = g_new;
        u = u_new;
        form = form_new;
    }
    Err(Error::MaxIterInner(opts.max_iter))
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Number of interior local maxima of `t ↦ R^E_ρ(t·u/‖u‖₁)` on a coarse grid.
pub(crate) fn ray_local_maxima(p: &ProblemSpec, u: &Field, energy: f64, tp: TruncationParams) -> usize {
    let norm = p.spectral.norm1(u).total;
    if norm == 0.0 {
        return 0;
    }
    let dir = u.scaled(1.0 / norm);
    let vals: Vec<f64> = (1..=96)
        .map(|i| {
            let t = 3.0 * norm * i as f64 / 96.0;
            p.rayleigh_trunc(&dir.scaled(t), energy, tp).unwrap_or(f64::NEG_INFINITY)
        })
        .collect();
    vals.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2] && w[1] > 0.0).count()
}
