//! Energy functional, energy-level Rayleigh quotient and its truncation,
//! together with their derivative forms and Sobolev gradients.
//!
//! For a field `u` the building blocks are
//!
//! * `H_λ(u) = uᵀKu − λ uᵀMu`,
//! * `L_q(u) = ∫|u|^q`,
//! * `𝒢(u) = ∫G(x, u)`,
//!
//! with `E_μ(u) = ½H_λ − (μ/q)L_q − 𝒢` and
//! `R^E(u) = (½H_λ − 𝒢 − E) / (L_q / q)`.
//!
//! A *form* is the assembled derivative `F_i = DΦ(u)(φ_i)` over the hat
//! basis; its Sobolev gradient is the Riesz representative `K⁻¹F` and its
//! dual norm is `√(FᵀK⁻¹F)`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{Field, Mesh, Tridiag};
use crate::spectral::SpectralData;

/// Pointwise function of `(x, s)`.
pub type PointFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Below this `|u|_Lq` the quotient is treated as undefined.
pub const TOL_ZERO_DENOMINATOR: f64 = 1e-14;

/// The nonlinearity `g(x, s)` with primitive `G` and derivative `∂g/∂s`.
#[derive(Clone)]
pub struct Nonlinearity {
    pub name: String,
    pub g: PointFn,
    pub primitive: PointFn,
    pub dg_ds: PointFn,
    pub gamma: f64,
    pub alpha: f64,
    pub r0: f64,
    pub c_min: f64,
    pub c_max: f64,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("gamma", &self.gamma)
            .field("alpha", &self.alpha)
            .field("r0", &self.r0)
            .field("c_min", &self.c_min)
            .field("c_max", &self.c_max)
            .finish_non_exhaustive()
    }
}

impl Nonlinearity {
    /// Pure power `g = c(x)|s|^{γ−2}s`, `G = c(x)|s|^γ/γ` with constant `c`.
    pub fn pure_power(gamma: f64, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("c = {c} must be positive")));
        }
        Self::pure_power_with(gamma, Arc::new(move |_| c), c, c)
    }

    /// Pure power with a spatially varying coefficient bounded by `[c_min, c_max]`.
    pub fn pure_power_with(
        gamma: f64,
        c: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        c_min: f64,
        c_max: f64,
    ) -> Result<Self> {
        if !(gamma > 2.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} must exceed 2")));
        }
        if !(c_min > 0.0) || c_max < c_min {
            return Err(Error::InvalidParameter(format!(
                "coefficient bounds [{c_min}, {c_max}] must satisfy 0 < c_min ≤ c_max"
            )));
        }
        let (c1, c2, c3) = (c.clone(), c.clone(), c);
        Ok(Self {
            name: format!("power(gamma={gamma})"),
            g: Arc::new(move |x, s| c1(x) * s.abs().powf(gamma - 2.0) * s),
            primitive: Arc::new(move |x, s| c2(x) * s.abs().powf(gamma) / gamma),
            dg_ds: Arc::new(move |x, s| c3(x) * (gamma - 1.0) * s.abs().powf(gamma - 2.0)),
            gamma,
            alpha: gamma,
            r0: 1.0,
            c_min,
            c_max,
        })
    }

    /// Plugin hook for user-supplied nonlinearities.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        name: impl Into<String>,
        g: PointFn,
        primitive: PointFn,
        dg_ds: PointFn,
        gamma: f64,
        alpha: f64,
        r0: f64,
        c_bounds: (f64, f64),
    ) -> Self {
        Self {
            name: name.into(),
            g,
            primitive,
            dg_ds,
            gamma,
            alpha,
            r0,
            c_min: c_bounds.0,
            c_max: c_bounds.1,
        }
    }

    /// Constant `C(ε)` of the growth bound `G ≤ ε/2 s² + C(ε)|s|^γ`.
    ///
    /// For the pure power the bound holds with `C(ε) = c_max/γ` for every `ε`.
    pub fn growth_constant(&self, _epsilon: f64) -> f64 {
        self.c_max / self.gamma
    }
}

/// Outcome of one assumption test.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub estimate: f64,
    pub detail: String,
    pub witness: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(
                f,
                "{:<10} {}  estimate={:.6e}  {}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.estimate,
                c.detail
            )?;
            if let Some((x, s)) = c.witness {
                write!(f, "  witness=(x={x:.6}, s={s:.6e})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Tolerance for the small-|s| limsup in (A1).
pub const TOL_A1: f64 = 1e-8;

/// Grid evaluation of (A1)–(A3) plus consistency of the primitive.
pub fn check_assumptions(nl: &Nonlinearity, s_grid: &[f64], x_grid: &[f64]) -> AssumptionReport {
    let mut checks = Vec::new();

    // G(x, s) − ∫₀ˢ g by composite Simpson.
    let mut worst = (0.0_f64, None);
    for &x in x_grid {
        for &s in s_grid {
            let m = 200;
            let hs = s / m as f64;
            let mut acc = (nl.g)(x, 0.0) + (nl.g)(x, s);
            for j in 1..m {
                let w = if j % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * (nl.g)(x, j as f64 * hs);
            }
            let quad = acc * hs / 3.0;
            let big = (nl.primitive)(x, s);
            let err = (big - quad).abs() / (1.0 + big.abs());
            if err > worst.0 {
                worst = (err, Some((x, s)));
            }
        }
    }
    checks.push(AssumptionCheck {
        name: "primitive",
        passed: worst.0 <= 1e-6 && x_grid.iter().all(|&x| (nl.primitive)(x, 0.0) == 0.0),
        estimate: worst.0,
        detail: "max relative |G − ∫g|".into(),
        witness: worst.1,
    });

    // (A1)
    let mut g0 = 0.0_f64;
    let mut limsup = f64::NEG_INFINITY;
    let mut wit = None;
    // g/s on the scales 10^{-6}, 10^{-7}, 10^{-8} on each side of zero,
    // extrapolated to s → 0 by Aitken's Δ² (exact for c + C·s^β decay)
    for &x in x_grid {
        g0 = g0.max((nl.g)(x, 0.0).abs());
        for sign in [1.0, -1.0] {
            let r: Vec<f64> = (6..=8)
                .map(|j| {
                    let s = sign * 10f64.powi(-j);
                    (nl.g)(x, s) / s
                })
                .collect();
            let d1 = r[2] - r[1];
            let d2 = r[2] - 2.0 * r[1] + r[0];
            let lim = if d2.abs() > 1e-300 && (d1 * d1 / d2).is_finite() {
                r[2] - d1 * d1 / d2
            } else {
                r[2]
            };
            if !(lim <= limsup) {
                limsup = lim;
                wit = Some((x, sign * 1e-8));
            }
        }
    }
    checks.push(AssumptionCheck {
        name: "A1",
        passed: g0 <= 1e-12 && limsup <= TOL_A1,
        estimate: limsup,
        detail: format!("g(x,0) max {g0:.3e}; limsup g/s near 0"),
        witness: if limsup > TOL_A1 { wit } else { None },
    });

    // (A2)
    let gm1 = nl.gamma - 1.0;
    let ratio = |x: f64, s: f64| (nl.g)(x, s).abs() / (1.0 + s.abs().powf(gm1));
    let mut c_hat = 0.0_f64;
    let mut wit = None;
    for &x in x_grid {
        for &s in s_grid {
            let r = ratio(x, s);
            if !(r <= c_hat) {
                c_hat = r;
                wit = Some((x, s));
            }
        }
    }
    let s_top = s_grid.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    let tail_ok = x_grid.iter().all(|&x| {
        let r = ratio(x, 4.0 * s_top).max(ratio(x, -4.0 * s_top));
        r.is_finite() && r <= 2.0 * c_hat.max(1e-300)
    });
    let gamma_ok = nl.gamma > 2.0;
    checks.push(AssumptionCheck {
        name: "A2",
        passed: c_hat.is_finite() && tail_ok && gamma_ok,
        estimate: c_hat,
        detail: format!("C estimate of |g| ≤ C(1+|s|^(γ−1)), γ = {}", nl.gamma),
        witness: if c_hat.is_finite() && tail_ok { None } else { wit },
    });

    // (A3)
    let mut min_g = f64::INFINITY;
    let mut wit_pos = None;
    let mut worst_ar = f64::NEG_INFINITY;
    let mut wit_ar = None;
    for &x in x_grid {
        for &s in s_grid {
            if s == 0.0 {
                continue;
            }
            let big = (nl.primitive)(x, s);
            if big < min_g {
                min_g = big;
                wit_pos = Some((x, s));
            }
            if s.abs() >= nl.r0 {
                let gs = (nl.g)(x, s) * s;
                let excess = (nl.alpha * big - gs) / (1.0 + gs.abs());
                if excess > worst_ar {
                    worst_ar = excess;
                    wit_ar = Some((x, s));
                }
            }
        }
    }
    let pos_ok = min_g > 0.0;
    let ar_ok = worst_ar <= 1e-12 && nl.alpha > 2.0;
    checks.push(AssumptionCheck {
        name: "A3",
        passed: pos_ok && ar_ok,
        estimate: if pos_ok { worst_ar } else { min_g },
        detail: format!(
            "min G = {min_g:.3e}; max (αG − gs)/(1+|gs|) for |s| ≥ R0 = {worst_ar:.3e}"
        ),
        witness: if !pos_ok {
            wit_pos
        } else if !ar_ok {
            wit_ar
        } else {
            None
        },
    });

    AssumptionReport { checks }
}

/// Smooth cutoff `φ_ρ(s)`: 0 for `|s| ≤ ρ/2`, 1 for `|s| ≥ ρ`.
pub fn phi_rho(rho: f64, s: f64) -> f64 {
    smoothstep(2.0 * s.abs() / rho - 1.0)
}

/// Derivative of [`phi_rho`] in `s`.
pub fn dphi_rho(rho: f64, s: f64) -> f64 {
    smoothstep_derivative(2.0 * s.abs() / rho - 1.0) * 2.0 / rho * s.signum()
}

fn psi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

fn dpsi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp() / (x * x)
    }
}

fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = psi(x);
        a / (a + psi(1.0 - x))
    }
}

fn smoothstep_derivative(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let (a, b) = (psi(x), psi(1.0 - x));
    (dpsi(x) * b + a * dpsi(1.0 - x)) / ((a + b) * (a + b))
}

/// Radius below which `R^E < 0` is guaranteed: `√(2E)` in `‖·‖₁`.
pub fn rho_estimate(energy: f64) -> f64 {
    (2.0 * energy.max(0.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationParams {
    pub rho: f64,
}

/// Integrals entering every functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parts {
    /// `H_λ(u)`
    pub h: f64,
    /// `∫|u|^q`
    pub lq: f64,
    /// `∫G(x, u)`
    pub g: f64,
}

/// A value together with its assembled derivative form.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub value: f64,
    pub form: Field,
}

/// Sobolev gradient of a form.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub form: Field,
    /// Riesz representative `K⁻¹F`.
    pub field: Field,
    pub dual_residual: f64,
}

/// Problem data independent of `μ` and `E`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub mesh: Mesh,
    pub q: f64,
    pub nonlinearity: Nonlinearity,
    pub spectral: SpectralData,
}

impl ProblemSpec {
    pub fn new(mesh: Mesh, lambda: f64, q: f64, nonlinearity: Nonlinearity) -> Result<Self> {
        let spectral = SpectralData::from_mesh(&mesh, lambda)?;
        Self::with_spectral(mesh, spectral, q, nonlinearity)
    }

    pub fn with_spectral(
        mesh: Mesh,
        spectral: SpectralData,
        q: f64,
        nonlinearity: Nonlinearity,
    ) -> Result<Self> {
        if !(q > 1.0 && q < 2.0) {
            return Err(Error::InvalidParameter(format!("q = {q} must lie in (1, 2)")));
        }
        if !(nonlinearity.gamma > 2.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {} must exceed 2",
                nonlinearity.gamma
            )));
        }
        if spectral.n() != mesh.n() {
            return Err(Error::LengthMismatch {
                expected: mesh.n(),
                got: spectral.n(),
            });
        }
        Ok(Self {
            mesh,
            q,
            nonlinearity,
            spectral,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.spectral.lambda()
    }

    pub fn k(&self) -> usize {
        self.spectral.k()
    }

    pub fn n(&self) -> usize {
        self.mesh.n()
    }

    pub fn stiffness(&self) -> &Tridiag {
        self.spectral.stiffness()
    }

    pub fn h_lambda(&self, u: &Field) -> f64 {
        self.spectral.h_lambda(u)
    }

    /// `∫|u|^q` and `∫G(x,u)` in one quadrature sweep.
    pub fn parts(&self, u: &Field) -> Result<Parts> {
        self.mesh.check(u)?;
        let q = self.q;
        let big = &self.nonlinearity.primitive;
        let (mut lq, mut g) = (0.0, 0.0);
        for qp in self.mesh.quad_points() {
            let s = qp.eval(u.as_slice());
            let gv = big(qp.x, s);
            if !gv.is_finite() {
                return Err(Error::NonFinite { x: qp.x });
            }
            lq += qp.weight * s.abs().powf(q);
            g += qp.weight * gv;
        }
        Ok(Parts {
            h: self.h_lambda(u),
            lq,
            g,
        })
    }

    /// Forms of `L_q` (divided by `q`, i.e. `∫|u|^{q−2}uφ_i`) and of `𝒢`.
    fn nonlinear_forms(&self, u: &Field) -> Result<(Field, Field)> {
        let q = self.q;
        let g = &self.nonlinearity.g;
        let n = self.n();
        let (mut bq, mut bg) = (vec![0.0; n], vec![0.0; n]);
        for qp in self.mesh.quad_points() {
            let s = qp.eval(u.as_slice());
            let a = qp.weight * s.abs().powf(q - 1.0) * s.signum();
            let b = qp.weight * g(qp.x, s);
            if !b.is_finite() {
                return Err(Error::NonFinite { x: qp.x });
            }
            if let Some(i) = qp.left {
                bq[i] += a * qp.phi_left;
                bg[i] += b * qp.phi_left;
            }
            if let Some(i) = qp.right {
                bq[i] += a * qp.phi_right;
                bg[i] += b * qp.phi_right;
            }
        }
        Ok((Field(bq), Field(bg)))
    }

    /// `(K − λM)u`
    fn linear_form(&self, u: &Field) -> Field {
        let ku = self.spectral.stiffness().apply(u);
        let mu = self.spectral.mass().apply(u);
        ku.add_scaled(-self.lambda(), &mu)
    }

    pub fn energy(&self, u: &Field, mu: f64) -> Result<f64> {
        let p = self.parts(u)?;
        Ok(0.5 * p.h - mu / self.q * p.lq - p.g)
    }

    pub fn energy_with_form(&self, u: &Field, mu: f64) -> Result<Evaluated> {
        let value = self.energy(u, mu)?;
        let (bq, bg) = self.nonlinear_forms(u)?;
        let mut form = self.linear_form(u);
        form.axpy(-mu, &bq);
        form.axpy(-1.0, &bg);
        Ok(Evaluated { value, form })
    }

    /// Assembled `DE_μ(u)(φ_i)`.
    pub fn energy_form(&self, u: &Field, mu: f64) -> Result<Field> {
        Ok(self.energy_with_form(u, mu)?.form)
    }

    fn denominator(&self, p: &Parts) -> Result<f64> {
        let norm = p.lq.powf(1.0 / self.q);
        if !(norm > TOL_ZERO_DENOMINATOR) {
            return Err(Error::ZeroDenominator(norm));
        }
        Ok(p.lq / self.q)
    }

    /// Energy-level Rayleigh quotient `R^E(u)`.
    pub fn rayleigh(&self, u: &Field, energy: f64) -> Result<f64> {
        let p = self.parts(u)?;
        let d = self.denominator(&p)?;
        Ok((0.5 * p.h - p.g - energy) / d)
    }

    /// `R^E(u)` and its form `(∇N − R ∇D)/D = DE_{R}(u)/D`.
    pub fn rayleigh_with_form(&self, u: &Field, energy: f64) -> Result<Evaluated> {
        let p = self.parts(u)?;
        let d = self.denominator(&p)?;
        let value = (0.5 * p.h - p.g - energy) / d;
        let (bq, bg) = self.nonlinear_forms(u)?;
        let mut form = self.linear_form(u);
        form.axpy(-value, &bq);
        form.axpy(-1.0, &bg);
        Ok(Evaluated {
            value,
            form: form.scaled(1.0 / d),
        })
    }

    /// Truncated quotient `φ_ρ(‖u‖₁) R^E(u)`, zero on the ball of radius `ρ/2`.
    pub fn rayleigh_trunc(&self, u: &Field, energy: f64, tp: TruncationParams) -> Result<f64> {
        let norm = self.spectral.norm1(u).total;
        if norm <= 0.5 * tp.rho {
            return Ok(0.0);
        }
        let r = self.rayleigh(u, energy)?;
        Ok(phi_rho(tp.rho, norm) * r)
    }

    pub fn rayleigh_trunc_with_form(
        &self,
        u: &Field,
        energy: f64,
        tp: TruncationParams,
    ) -> Result<Evaluated> {
        let norm = self.spectral.norm1(u).total;
        if norm <= 0.5 * tp.rho {
            return Ok(Evaluated {
                value: 0.0,
                form: Field::zeros(self.n()),
            });
        }
        let inner = self.rayleigh_with_form(u, energy)?;
        if norm >= tp.rho {
            return Ok(inner);
        }
        let phi = phi_rho(tp.rho, norm);
        let dphi = dphi_rho(tp.rho, norm);
        let dnorm = self.spectral.norm1_sq_form(u).scaled(0.5 / norm);
        let mut form = inner.form.scaled(phi);
        form.axpy(dphi * inner.value, &dnorm);
        Ok(Evaluated {
            value: phi * inner.value,
            form,
        })
    }

    /// Sobolev gradient of an assembled form in the H¹₀ metric.
    pub fn riesz(&self, form: Field) -> Result<Gradient> {
        let field = self.spectral.stiffness().solve_spd(&form)?;
        let dual_residual = form.dot(&field).max(0.0).sqrt();
        Ok(Gradient {
            form,
            field,
            dual_residual,
        })
    }

    pub fn grad_energy(&self, u: &Field, mu: f64) -> Result<Gradient> {
        self.riesz(self.energy_form(u, mu)?)
    }

    pub fn grad_rayleigh(&self, u: &Field, energy: f64) -> Result<Gradient> {
        self.riesz(self.rayleigh_with_form(u, energy)?.form)
    }

    pub fn grad_rayleigh_trunc(
        &self,
        u: &Field,
        energy: f64,
        tp: TruncationParams,
    ) -> Result<Gradient> {
        self.riesz(self.rayleigh_trunc_with_form(u, energy, tp)?.form)
    }

    /// `∂F/∂μ = −∫|u|^{q−2}uφ_i` negated, i.e. the form of `L_q/q`.
    pub fn lq_form(&self, u: &Field) -> Result<Field> {
        Ok(self.nonlinear_forms(u)?.0)
    }

    /// Jacobian of the assembled form of `E_μ` in `u`, with `|u|^{q−2}`
    /// regularized as `(u² + ε²)^{(q−2)/2}`.
    pub fn energy_hessian(&self, u: &Field, mu: f64, eps_reg: f64) -> Result<Tridiag> {
        let q = self.q;
        let dg = self.nonlinearity.dg_ds.clone();
        let w = self.mesh.weighted_mass(u, move |x, s| {
            mu * (q - 1.0) * (s * s + eps_reg * eps_reg).powf(0.5 * (q - 2.0)) + dg(x, s)
        })?;
        let lin = self
            .spectral
            .stiffness()
            .add_scaled(-self.lambda(), self.spectral.mass());
        Ok(lin.add_scaled(-1.0, &w))
    }

    /// `|u|_Lq`
    pub fn lq_norm(&self, u: &Field) -> Result<f64> {
        let p = self.parts(u)?;
        Ok(p.lq.powf(1.0 / self.q))
    }
}
