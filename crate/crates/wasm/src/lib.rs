//! Browser bindings for the enray solver.
//!
//! Three operations are exposed to JavaScript, each returning a JSON string:
//!
//! * [`solve_profile`] — saddle point `u` and multiplier `μ` at one energy;
//! * [`fibering_curve`] — the map `t ↦ R^E(t ū⁺)` along the first positive mode;
//! * [`mu_sweep`] — the curve `μ(E)` on a logarithmic grid in `(0, 0.8 E_k)`.
//!
//! The `*_json` functions hold the logic and are plain Rust, so they can be
//! tested natively; the `#[wasm_bindgen]` wrappers only convert errors.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use enray::continuation::sweep_with;
use enray::verify::fibering_profile;
use enray::{Field, Mesh, Nonlinearity, ProblemSpec, Solver, SolverOptions, SpectralData};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest mesh accepted from the page; the dense eigensolve is `O(n³)`.
pub const MAX_N: usize = 400;

const Q: f64 = 1.5;
const GAMMA: f64 = 4.0;

/// `λ` from `"0.5"` (fraction of `λ_1`) or `"gap:k:θ"` (`λ_k + θ(λ_{k+1} − λ_k)`).
fn resolve_lambda(spec: &str, eigenvalues: &[f64]) -> Result<f64, String> {
    let spec = spec.trim();
    if let Some(rest) = spec.strip_prefix("gap:") {
        let (k, theta) = rest
            .split_once(':')
            .ok_or_else(|| format!("expected gap:k:theta, got {spec}"))?;
        let k: usize = k.parse().map_err(|_| format!("bad gap index in {spec}"))?;
        let theta: f64 = theta.parse().map_err(|_| format!("bad gap position in {spec}"))?;
        return SpectralData::gap_point(eigenvalues, k, theta).map_err(|e| e.to_string());
    }
    let frac: f64 = spec.parse().map_err(|_| format!("bad lambda fraction {spec}"))?;
    Ok(frac * eigenvalues[0])
}

fn build(lambda: &str, n: usize) -> Result<ProblemSpec, String> {
    if n > MAX_N {
        return Err(format!("n = {n} exceeds the demo limit {MAX_N}"));
    }
    let mesh = Mesh::new(n, 3).map_err(|e| e.to_string())?;
    let base = SpectralData::from_mesh(&mesh, 0.0).map_err(|e| e.to_string())?;
    let lambda = resolve_lambda(lambda, base.eigenvalues())?;
    let nl = Nonlinearity::pure_power(GAMMA, 1.0).map_err(|e| e.to_string())?;
    ProblemSpec::new(mesh, lambda, Q, nl).map_err(|e| e.to_string())
}

fn with_boundary(mesh: &Mesh, u: &Field) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0];
    x.extend(mesh.nodes());
    x.push(1.0);
    let mut v = vec![0.0];
    v.extend(u.iter().copied());
    v.push(0.0);
    (x, v)
}

/// Solve at energy `energy` (`algo` is `"lmm"` or `"mpa"`).
pub fn solve_profile_json(lambda: &str, energy: f64, n: usize, algo: &str) -> Result<String, String> {
    let p = build(lambda, n)?;
    let s = Solver::new(&p, SolverOptions::default()).map_err(|e| e.to_string())?;
    let r = match algo {
        "lmm" => s.solve(energy),
        "mpa" => s.solve_mpa(energy),
        other => return Err(format!("unknown algorithm {other}")),
    }
    .map_err(|e| e.to_string())?;
    let (x, u) = with_boundary(&p.mesh, &r.u);
    let doc = json!({
        "lambda": p.lambda(),
        "k": p.k(),
        "e_k": s.constants().e_k_lambda,
        "energy": energy,
        "mu": r.mu,
        "dual_residual": r.dual_residual,
        "norm1": r.norm1,
        "iterations": r.iterations,
        "converged": r.converged,
        "x": x,
        "u": u,
    });
    Ok(doc.to_string())
}

/// `R^E(t ū⁺)` for `points` values of `t` on `(0, t_max]`.
pub fn fibering_curve_json(lambda: &str, energy: f64, n: usize, t_max: f64, points: usize) -> Result<String, String> {
    if !(t_max > 0.0) || points < 2 {
        return Err(format!("need t_max > 0 and at least 2 points (t_max = {t_max}, points = {points})"));
    }
    let p = build(lambda, n)?;
    let bar = p.spectral.unit_mode(p.k());
    let grid: Vec<f64> = (1..=points).map(|i| t_max * i as f64 / points as f64).collect();
    let prof = fibering_profile(&p, &bar, &Field::zeros(p.n()), energy, &grid).map_err(|e| e.to_string())?;
    let values: Vec<Value> = prof.values.iter().map(|v| v.map_or(Value::Null, Value::from)).collect();
    let doc = json!({
        "lambda": p.lambda(),
        "k": p.k(),
        "energy": energy,
        "t": grid,
        "values": values,
        "peak_t": prof.peak_t,
        "peak_value": prof.peak_value,
        "rho_est": (2.0 * energy).sqrt(),
    });
    Ok(doc.to_string())
}

/// `μ(E)` at `points` log-spaced energies strictly inside `(0.001, 0.8 E_k)`.
pub fn mu_sweep_json(lambda: &str, n: usize, points: usize) -> Result<String, String> {
    if points == 0 {
        return Err("need at least one sweep point".into());
    }
    let p = build(lambda, n)?;
    let s = Solver::new(&p, SolverOptions::default()).map_err(|e| e.to_string())?;
    let ek = s.constants().e_k_lambda;
    let (lo, hi) = (0.001f64.ln(), (0.8 * ek).ln());
    if !(hi > lo) {
        return Err(format!("E_k = {ek} leaves no room above 0.001"));
    }
    let energies: Vec<f64> = (0..points)
        .map(|i| (lo + (hi - lo) * (i as f64 + 0.5) / points as f64).exp())
        .collect();
    let r = sweep_with(&s, &energies).map_err(|e| e.to_string())?;
    let doc = json!({
        "lambda": p.lambda(),
        "k": p.k(),
        "e_k": ek,
        "monotone": r.monotone,
        "mu_bar_0": r.mu_bar_0,
        "rows": r.rows,
    });
    Ok(doc.to_string())
}

#[wasm_bindgen]
pub fn solve_profile(lambda: &str, energy: f64, n: usize, algo: &str) -> Result<String, JsValue> {
    solve_profile_json(lambda, energy, n, algo).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn fibering_curve(lambda: &str, energy: f64, n: usize, t_max: f64, points: usize) -> Result<String, JsValue> {
    fibering_curve_json(lambda, energy, n, t_max, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn mu_sweep(lambda: &str, n: usize, points: usize) -> Result<String, JsValue> {
    mu_sweep_json(lambda, n, points).map_err(|e| JsValue::from_str(&e))
}
