//! Uniform P1 finite elements on the unit interval with homogeneous
//! Dirichlet boundary values.
//!
//! A [`Field`] stores nodal values at the `n` interior nodes
//! `x_i = (i + 1) h`, `h = 1 / (n + 1)`. Boundary values are implicitly
//! zero. Nonlinear integrals are evaluated by composite Gauss–Legendre
//! quadrature applied to the piecewise-linear interpolant.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss–Legendre abscissae and weights on [-1, 1].
fn gauss_legendre(order: usize) -> Option<(&'static [f64], &'static [f64])> {
    const P2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
    const W2: [f64; 2] = [1.0, 1.0];
    const P3: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W3: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    const P4: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const W4: [f64; 4] = [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    const P5: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const W5: [f64; 5] = [
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];
    match order {
        2 => Some((&P2, &W2)),
        3 => Some((&P3, &W3)),
        4 => Some((&P4, &W4)),
        5 => Some((&P5, &W5)),
        _ => None,
    }
}

/// One quadrature point of the composite rule.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub x: f64,
    pub weight: f64,
    /// Interior index of the left node of the element, if it is not the boundary.
    pub left: Option<usize>,
    /// Interior index of the right node of the element, if it is not the boundary.
    pub right: Option<usize>,
    pub phi_left: f64,
    pub phi_right: f64,
}

impl QuadPoint {
    #[inline]
    pub fn eval(&self, u: &[f64]) -> f64 {
        let ul = self.left.map_or(0.0, |i| u[i]);
        let ur = self.right.map_or(0.0, |i| u[i]);
        ul * self.phi_left + ur * self.phi_right
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    h: f64,
    quad_order: usize,
    points: Vec<QuadPoint>,
}

impl Mesh {
    pub fn new(n: usize, quad_order: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::DegenerateMesh(n));
        }
        let (xi, wi) = gauss_legendre(quad_order).ok_or(Error::QuadratureOrder(quad_order))?;
        let h = 1.0 / (n as f64 + 1.0);
        let mut points = Vec::with_capacity((n + 1) * quad_order);
        for e in 0..=n {
            let x0 = e as f64 * h;
            for (&p, &w) in xi.iter().zip(wi) {
                points.push(QuadPoint {
                    x: x0 + 0.5 * h * (1.0 + p),
                    weight: 0.5 * h * w,
                    left: e.checked_sub(1),
                    right: (e < n).then_some(e),
                    phi_left: 0.5 * (1.0 - p),
                    phi_right: 0.5 * (1.0 + p),
                });
            }
        }
        Ok(Self {
            n,
            h,
            quad_order,
            points,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    pub fn quad_points(&self) -> &[QuadPoint] {
        &self.points
    }

    /// Coordinate of interior node `i`.
    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Nodal interpolant of a continuous function.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> Field {
        Field((0..self.n).map(|i| f(self.node(i))).collect())
    }

    pub fn check(&self, u: &Field) -> Result<()> {
        if u.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Composite Gauss quadrature of `f(x, u_h(x))` over (0, 1).
    pub fn integrate(&self, u: &Field, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
        self.check(u)?;
        let mut acc = 0.0;
        for qp in &self.points {
            let v = f(qp.x, qp.eval(u.as_slice()));
            if !v.is_finite() {
                return Err(Error::NonFinite { x: qp.x });
            }
            acc += qp.weight * v;
        }
        Ok(acc)
    }

    /// Load vector `b_i = ∫ f(x, u_h) φ_i`.
    pub fn load(&self, u: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check(u)?;
        let mut b = vec![0.0; self.n];
        for qp in &self.points {
            let v = f(qp.x, qp.eval(u.as_slice()));
            if !v.is_finite() {
                return Err(Error::NonFinite { x: qp.x });
            }
            let wv = qp.weight * v;
            if let Some(i) = qp.left {
                b[i] += wv * qp.phi_left;
            }
            if let Some(i) = qp.right {
                b[i] += wv * qp.phi_right;
            }
        }
        Ok(Field(b))
    }

    /// Weighted mass matrix `A_ij = ∫ f(x, u_h) φ_i φ_j`.
    pub fn weighted_mass(&self, u: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Tridiag> {
        self.check(u)?;
        let mut a = Tridiag::zeros(self.n);
        for qp in &self.points {
            let v = f(qp.x, qp.eval(u.as_slice()));
            if !v.is_finite() {
                return Err(Error::NonFinite { x: qp.x });
            }
            let wv = qp.weight * v;
            if let Some(i) = qp.left {
                a.diag[i] += wv * qp.phi_left * qp.phi_left;
            }
            if let Some(j) = qp.right {
                a.diag[j] += wv * qp.phi_right * qp.phi_right;
            }
            if let (Some(i), Some(_)) = (qp.left, qp.right) {
                a.off[i] += wv * qp.phi_left * qp.phi_right;
            }
        }
        Ok(a)
    }

    /// Stiffness matrix of the hat basis: `2/h` on the diagonal, `-1/h` off it.
    pub fn stiffness(&self) -> Tridiag {
        Tridiag {
            diag: vec![2.0 / self.h; self.n],
            off: vec![-1.0 / self.h; self.n - 1],
        }
    }

    /// Consistent mass matrix: `2h/3` on the diagonal, `h/6` off it.
    pub fn mass(&self) -> Tridiag {
        Tridiag {
            diag: vec![2.0 * self.h / 3.0; self.n],
            off: vec![self.h / 6.0; self.n - 1],
        }
    }
}

/// Convenience constructor matching the command-line vocabulary.
pub fn build_mesh(n: usize, quad_order: usize) -> Result<Mesh> {
    Mesh::new(n, quad_order)
}

/// Nodal coefficients of a P1 function over the interior nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Euclidean dot product of coefficient vectors (form applied to a field).
    pub fn dot(&self, other: &Field) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field(self.0.iter().map(|v| s * v).collect())
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &Field) -> Field {
        Field(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    pub fn axpy(&mut self, s: f64, other: &Field) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.add_scaled(-1.0, other)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Field {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, u: &Field) -> Field {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * u[i];
            if i > 0 {
                s += self.off[i - 1] * u[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * u[i + 1];
            }
            y[i] = s;
        }
        Field(y)
    }

    pub fn quad_form(&self, u: &Field) -> f64 {
        self.apply(u).dot(u)
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &Tridiag) -> Tridiag {
        Tridiag {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a + s * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| a + s * b).collect(),
        }
    }

    /// Solve `A x = b` for symmetric positive definite `A` by an LDLᵀ sweep.
    pub fn solve_spd(&self, b: &Field) -> Result<Field> {
        let n = self.n();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        d[0] = self.diag[0];
        for i in 1..n {
            if d[i - 1] <= 0.0 || !d[i - 1].is_finite() {
                return Err(Error::LinearSolve("matrix not positive definite".into()));
            }
            l[i - 1] = self.off[i - 1] / d[i - 1];
            d[i] = self.diag[i] - l[i - 1] * self.off[i - 1];
        }
        if d[n - 1] <= 0.0 {
            return Err(Error::LinearSolve("matrix not positive definite".into()));
        }
        let mut y = b.0.clone();
        for i in 1..n {
            y[i] -= l[i - 1] * y[i - 1];
        }
        for i in 0..n {
            y[i] /= d[i];
        }
        for i in (0..n - 1).rev() {
            y[i] -= l[i] * y[i + 1];
        }
        Ok(Field(y))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = self.diag[i];
            if i + 1 < n {
                a[(i, i + 1)] = self.off[i];
                a[(i + 1, i)] = self.off[i];
            }
        }
        a
    }
}
