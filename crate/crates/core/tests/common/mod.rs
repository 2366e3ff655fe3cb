#![allow(dead_code)]

use enray::{Mesh, Nonlinearity, ProblemSpec, SpectralData};

pub const N: usize = 200;
pub const Q: f64 = 1.5;
pub const GAMMA: f64 = 4.0;

/// Standard desk-scale problem with `λ = frac·λ_1`.
pub fn fraction_problem(n: usize, frac: f64) -> ProblemSpec {
    let mesh = Mesh::new(n, 3).unwrap();
    let l1 = SpectralData::from_mesh(&mesh, 0.0).unwrap().eigenvalues()[0];
    ProblemSpec::new(mesh, frac * l1, Q, Nonlinearity::pure_power(GAMMA, 1.0).unwrap()).unwrap()
}

/// Standard problem with `λ = λ_k + θ(λ_{k+1} − λ_k)`.
pub fn gap_problem(n: usize, k: usize, theta: f64) -> ProblemSpec {
    let mesh = Mesh::new(n, 3).unwrap();
    let base = SpectralData::from_mesh(&mesh, 0.0).unwrap();
    let lambda = SpectralData::gap_point(base.eigenvalues(), k, theta).unwrap();
    ProblemSpec::new(mesh, lambda, Q, Nonlinearity::pure_power(GAMMA, 1.0).unwrap()).unwrap()
}

/// Value of the P1 interpolant with interior nodal values `u` at `x ∈ [0, 1]`.
pub fn p1_eval(u: &[f64], x: f64) -> f64 {
    let n = u.len();
    let h = 1.0 / (n + 1) as f64;
    let s = x / h;
    let j = (s.floor() as usize).min(n);
    let w = s - j as f64;
    let left = if j == 0 { 0.0 } else { u[j - 1] };
    let right = if j == n { 0.0 } else { u[j] };
    (1.0 - w) * left + w * right
}

/// Midpoint Riemann sum of `f(x, u_h(x))` with `m` cells.
pub fn riemann(u: &[f64], m: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let dx = 1.0 / m as f64;
    (0..m)
        .map(|i| {
            let x = (i as f64 + 0.5) * dx;
            f(x, p1_eval(u, x))
        })
        .sum::<f64>()
        * dx
}
