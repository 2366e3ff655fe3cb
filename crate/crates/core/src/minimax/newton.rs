//! Newton's method on the augmented prescribed-energy system
//!
//! ```text
//! F(u, μ) = DE_μ(u) = 0,    E_μ(u) − E = 0
//! ```
//!
//! in the `n + 1` unknowns `(u, μ)`, with backtracking on the merit
//! `‖F‖²_* + (E_μ(u) − E)²`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::SolverOptions;
use crate::error::{Error, Result};
use crate::functionals::ProblemSpec;
use crate::mesh::Field;

#[derive(Debug, Clone, Serialize)]
pub struct NewtonReport {
    pub u: Field,
    pub mu: f64,
    pub iterations: usize,
    pub dual_residual: f64,
    pub energy_defect: f64,
}

struct State {
    form: Field,
    dual: f64,
    defect: f64,
}

impl State {
    fn merit(&self) -> f64 {
        self.dual * self.dual + self.defect * self.defect
    }
}

fn state(p: &ProblemSpec, u: &Field, mu: f64, energy: f64) -> Result<State> {
    let ev = p.energy_with_form(u, mu)?;
    let g = p.riesz(ev.form)?;
    Ok(State {
        form: g.form,
        dual: g.dual_residual,
        defect: ev.value - energy,
    })
}

pub fn newton_refine(
    p: &ProblemSpec,
    u0: &Field,
    mu0: f64,
    energy: f64,
    opts: &SolverOptions,
) -> Result<NewtonReport> {
    let n = p.n();
    let mut u = u0.clone();
    let mut mu = mu0;
    let mut st = state(p, &u, mu, energy)?;
    // roundoff floor of the dual residual for this field
    let floor = 1e-14 * (1.0 + p.stiffness().quad_form(&u).sqrt());
    let tol_dual = (0.01 * opts.tol_refine).max(floor);
    let tol_defect = 0.01 * opts.tol_energy;

    for iter in 0..=opts.max_newton {
        if st.dual <= tol_dual && st.defect.abs() <= tol_defect {
            return Ok(NewtonReport {
                u,
                mu,
                iterations: iter,
                dual_residual: st.dual,
                energy_defect: st.defect,
            });
        }
        if iter == opts.max_newton {
            break;
        }
        let hess = p.energy_hessian(&u, mu, opts.eps_reg)?;
        let b = p.lq_form(&u)?;
        let lq = p.parts(&u)?.lq;

        let mut jac = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            jac[(i, i)] = hess.diag[i];
            if i + 1 < n {
                jac[(i, i + 1)] = hess.off[i];
                jac[(i + 1, i)] = hess.off[i];
            }
            jac[(i, n)] = -b[i];
            jac[(n, i)] = st.form[i];
        }
        jac[(n, n)] = -lq / p.q;
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for i in 0..n {
            rhs[i] = -st.form[i];
        }
        rhs[n] = -st.defect;
        let step = jac.lu().solve(&rhs).ok_or(Error::SingularJacobian)?;
        if step.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularJacobian);
        }
        let du = Field(step.rows(0, n).iter().copied().collect());
        let dmu = step[n];

        let m0 = st.merit();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let un = u.add_scaled(alpha, &du);
            let mun = mu + alpha * dmu;
            if let Ok(sn) = state(p, &un, mun, energy) {
                if sn.merit() <= (1.0 - 1e-4 * alpha) * m0 {
                    accepted = Some((un, mun, sn));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((un, mun, sn)) => {
                u = un;
                mu = mun;
                st = sn;
            }
            None => {
                if st.dual <= opts.tol_refine && st.defect.abs() <= opts.tol_energy {
                    return Ok(NewtonReport {
                        u,
                        mu,
                        iterations: iter,
                        dual_residual: st.dual,
                        energy_defect: st.defect,
                    });
                }
                return Err(Error::NoProgress(st.merit().sqrt()));
            }
        }
    }
    if st.dual <= opts.tol_refine && st.defect.abs() <= opts.tol_energy {
        return Ok(NewtonReport {
            u,
            mu,
            iterations: opts.max_newton,
            dual_residual: st.dual,
            energy_defect: st.defect,
        });
    }
    Err(Error::NoProgress(st.merit().sqrt()))
}
