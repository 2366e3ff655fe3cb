//! Generalized eigendecomposition `K e = λ M e` of the discrete Dirichlet
//! Laplacian and the spectral splitting `W = W⁺ ⊕ W⁻` around a fixed `λ`.
//!
//! Eigenvectors are M-orthonormal, so `|e_i|²_L2 = 1` and `‖e_i‖²_W = λ_i`.
//! They are also K-orthogonal, which makes the spectral projections
//! orthogonal in both the L2 and the H¹₀ inner product.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{Field, Mesh, Tridiag};

/// Relative distance to an eigenvalue below which `λ` counts as resonant.
pub const TOL_RESONANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SpectralData {
    eigenvalues: Vec<f64>,
    /// Eigenvectors stored as columns.
    vectors: DMatrix<f64>,
    lambda: f64,
    k: usize,
    stiffness: Tridiag,
    mass: Tridiag,
}

/// Components of the equivalent norm `‖u‖₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norm1 {
    pub plus: f64,
    pub minus: f64,
    pub total: f64,
}

/// `H_λ(u) = uᵀKu − λ uᵀMu`.
pub fn h_lambda(stiffness: &Tridiag, mass: &Tridiag, lambda: f64, u: &Field) -> f64 {
    stiffness.quad_form(u) - lambda * mass.quad_form(u)
}

/// Full generalized eigendecomposition, splitting index `k = #{λ_i < λ}`.
pub fn eigendecompose(stiffness: &Tridiag, mass: &Tridiag, lambda: f64) -> Result<SpectralData> {
    let n = stiffness.n();
    if mass.n() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: mass.n(),
        });
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda = {lambda}")));
    }
    let chol = mass
        .to_dense()
        .cholesky()
        .ok_or_else(|| Error::LinearSolve("mass matrix not SPD".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::LinearSolve("cholesky factor singular".into()))?;
    let c = &linv * stiffness.to_dense() * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let back = linv.transpose();
    let mut vectors = DMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (col, &j) in order.iter().enumerate() {
        let mut v = &back * eig.eigenvectors.column(j);
        let scale = v.amax();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * scale) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(col, &v);
        eigenvalues.push(eig.eigenvalues[j]);
    }

    for (i, &ev) in eigenvalues.iter().enumerate() {
        if (lambda - ev).abs() <= TOL_RESONANCE * ev.abs().max(1.0) {
            return Err(Error::ResonantLambda {
                lambda,
                index: i + 1,
                eigenvalue: ev,
            });
        }
    }
    let k = eigenvalues.iter().filter(|&&ev| ev < lambda).count();
    Ok(SpectralData {
        eigenvalues,
        vectors,
        lambda,
        k,
        stiffness: stiffness.clone(),
        mass: mass.clone(),
    })
}

impl SpectralData {
    pub fn from_mesh(mesh: &Mesh, lambda: f64) -> Result<Self> {
        eigendecompose(&mesh.stiffness(), &mesh.mass(), lambda)
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ascending eigenvalues `λ_1 < λ_2 < …` (index 0 holds `λ_1`).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of eigenvalues below `λ`, i.e. `dim W⁻`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn stiffness(&self) -> &Tridiag {
        &self.stiffness
    }

    pub fn mass(&self) -> &Tridiag {
        &self.mass
    }

    /// Same decomposition with a different `λ`; fails on resonance.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        for (i, &ev) in self.eigenvalues.iter().enumerate() {
            if (lambda - ev).abs() <= TOL_RESONANCE * ev.abs().max(1.0) {
                return Err(Error::ResonantLambda {
                    lambda,
                    index: i + 1,
                    eigenvalue: ev,
                });
            }
        }
        let mut out = self.clone();
        out.lambda = lambda;
        out.k = self.eigenvalues.iter().filter(|&&ev| ev < lambda).count();
        Ok(out)
    }

    /// Eigenvector `e_{i+1}` (zero-based index).
    pub fn eigenvector(&self, i: usize) -> Field {
        Field(self.vectors.column(i).iter().copied().collect())
    }

    /// `|λ_i − λ|` for zero-based `i`.
    pub fn gap_weight(&self, i: usize) -> f64 {
        (self.eigenvalues[i] - self.lambda).abs()
    }

    /// Eigenvector scaled to unit `‖·‖₁`.
    pub fn unit_mode(&self, i: usize) -> Field {
        self.eigenvector(i).scaled(1.0 / self.gap_weight(i).sqrt())
    }

    /// Full expansion coefficients `u_i = e_iᵀ M u`.
    pub fn coefficients(&self, u: &Field) -> Vec<f64> {
        let mu = self.mass.apply(u);
        let v = nalgebra::DVector::from_column_slice(mu.as_slice());
        (self.vectors.transpose() * v).iter().copied().collect()
    }

    /// Coefficients of the W⁻ part only.
    pub fn minus_coefficients(&self, u: &Field) -> Vec<f64> {
        let mu = self.mass.apply(u);
        (0..self.k)
            .map(|i| self.vectors.column(i).iter().zip(mu.iter()).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Form coefficients `e_iᵀ F` for the first `k` modes.
    fn minus_form_coefficients(&self, form: &Field) -> Vec<f64> {
        (0..self.k)
            .map(|i| self.vectors.column(i).iter().zip(form.iter()).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn combine(&self, coeffs: &[f64]) -> Field {
        let mut out = Field::zeros(self.n());
        for (i, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                for (o, v) in out.0.iter_mut().zip(self.vectors.column(i).iter()) {
                    *o += c * v;
                }
            }
        }
        out
    }

    /// `u = u⁺ + u⁻` with `u⁻ ∈ span{e_1, …, e_k}`.
    pub fn split(&self, u: &Field) -> (Field, Field) {
        let minus = self.combine(&self.minus_coefficients(u));
        (u.sub(&minus), minus)
    }

    /// Orthogonal projection onto W⁺.
    pub fn project_plus(&self, u: &Field) -> Field {
        self.split(u).0
    }

    pub fn h_lambda(&self, u: &Field) -> f64 {
        h_lambda(&self.stiffness, &self.mass, self.lambda, u)
    }

    /// `‖u‖₁` via `H_λ` and the `k` lowest coefficients.
    pub fn norm1(&self, u: &Field) -> Norm1 {
        let minus_sq: f64 = self
            .minus_coefficients(u)
            .iter()
            .enumerate()
            .map(|(i, c)| (self.lambda - self.eigenvalues[i]) * c * c)
            .sum();
        let plus_sq = (self.h_lambda(u) + minus_sq).max(0.0);
        Norm1 {
            plus: plus_sq.sqrt(),
            minus: minus_sq.sqrt(),
            total: (plus_sq + minus_sq).sqrt(),
        }
    }

    /// Derivative form of `‖u‖₁²`: `2(K − λM)u + 4 Σ_{i≤k} (λ − λ_i) u_i M e_i`.
    pub fn norm1_sq_form(&self, u: &Field) -> Field {
        let ku = self.stiffness.apply(u);
        let mu = self.mass.apply(u);
        let mut form = ku.add_scaled(-self.lambda, &mu).scaled(2.0);
        if self.k > 0 {
            let c = self.minus_coefficients(u);
            let weighted: Vec<f64> = c
                .iter()
                .enumerate()
                .map(|(i, ci)| 4.0 * (self.lambda - self.eigenvalues[i]) * ci)
                .collect();
            let v = self.combine(&weighted);
            form.axpy(1.0, &self.mass.apply(&v));
        }
        form
    }

    /// Riesz representative of a form in the `‖·‖₁` inner product,
    /// optionally restricted to W⁺.
    pub fn riesz_norm1(&self, form: &Field, plus_only: bool) -> Field {
        let v = nalgebra::DVector::from_column_slice(form.as_slice());
        let fc = self.vectors.transpose() * v;
        let start = if plus_only { self.k } else { 0 };
        let coeffs: Vec<f64> = (0..self.n())
            .map(|i| if i < start { 0.0 } else { fc[i] / self.gap_weight(i) })
            .collect();
        self.combine(&coeffs)
    }

    /// Removes the W⁻ components of a form, so that it annihilates W⁻.
    pub fn form_plus(&self, form: &Field) -> Field {
        if self.k == 0 {
            return form.clone();
        }
        let fc = self.minus_form_coefficients(form);
        let back = self.mass.apply(&self.combine(&fc));
        form.sub(&back)
    }

    /// Constants `(c₀, c₁)` with `c₀‖u‖₁² ≤ ‖u‖²_W ≤ c₁‖u‖₁²` on the discrete space.
    pub fn norm_equivalence(&self) -> (f64, f64) {
        let ratios = (0..self.n()).map(|i| self.eigenvalues[i] / self.gap_weight(i));
        ratios.fold((f64::INFINITY, 0.0_f64), |(lo, hi), r| (lo.min(r), hi.max(r)))
    }

    /// Fixed `λ` as the point `λ_k + θ(λ_{k+1} − λ_k)` of the spectral gap.
    pub fn gap_point(eigenvalues: &[f64], k: usize, theta: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&theta) || theta == 0.0 || k == 0 {
            return Err(Error::InvalidParameter(format!(
                "gap:{k}:{theta} needs k ≥ 1 and θ in (0, 1)"
            )));
        }
        if k >= eigenvalues.len() {
            return Err(Error::NoGap(k));
        }
        Ok(eigenvalues[k - 1] + theta * (eigenvalues[k] - eigenvalues[k - 1]))
    }
}
