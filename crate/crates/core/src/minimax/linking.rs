//! Linking sets `B₀ = B₀^c ∪ B₀^d` around the sphere `S⁺_{r_k}` and their
//! sampled sup/inf values.
//!
//! With `ū⁺ ∈ S⁺₁` and `v ∈ S⁻₁`:
//! `B₀^c = {tū⁺ + Tv : 0 < t < T}` and
//! `B₀^d = {tū⁺ + sv : t ∈ {0, T}, 0 ≤ s ≤ T}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Constants;
use crate::error::{Error, Result};
use crate::functionals::{ProblemSpec, TruncationParams};
use crate::mesh::Field;
use crate::spectral::SpectralData;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameSamples {
    /// Interior `t` values on `B₀^c`.
    pub t: usize,
    /// `s` values on `[0, T]` for `B₀^d`.
    pub s: usize,
    /// Points on `S⁻₁` when `k ≥ 2` (for `k = 1` the sphere is `{±ē₁}`).
    pub sphere: usize,
    /// Samples of `S⁺_{r_k}` for the infimum `a`.
    pub plus_sphere: usize,
}

impl Default for FrameSamples {
    fn default() -> Self {
        Self {
            t: 33,
            s: 33,
            sphere: 16,
            plus_sphere: 400,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinkingFrame {
    pub k: usize,
    pub u_bar_plus: Field,
    pub t_max: f64,
    /// `‖·‖₁`-unit vectors `ē_1, …, ē_k` spanning W⁻.
    pub minus_basis: Vec<Field>,
    /// Coefficients (in `minus_basis`) of the points of `S⁻₁`.
    pub sphere: Vec<Vec<f64>>,
    pub samples: FrameSamples,
}

/// Deterministic sample grids over `B₀^c` and `B₀^d`.
pub fn build_linking_frame(
    spec: &SpectralData,
    u_bar_plus: Field,
    t_max: f64,
    samples: FrameSamples,
    seed: u64,
) -> LinkingFrame {
    let k = spec.k();
    let minus_basis: Vec<Field> = (0..k).map(|i| spec.unit_mode(i)).collect();
    let sphere = match k {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts = Vec::with_capacity(samples.sphere);
            // coordinate poles first, then random points
            for i in 0..k.min(samples.sphere / 2) {
                for sign in [1.0, -1.0] {
                    let mut c = vec![0.0; k];
                    c[i] = sign;
                    pts.push(c);
                }
            }
            while pts.len() < samples.sphere {
                let c: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let nrm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
                if nrm > 1e-3 {
                    pts.push(c.iter().map(|x| x / nrm).collect());
                }
            }
            pts
        }
    };
    LinkingFrame {
        k,
        u_bar_plus,
        t_max,
        minus_basis,
        sphere,
        samples,
    }
}

impl LinkingFrame {
    fn minus_point(&self, coeffs: &[f64], scale: f64) -> Field {
        let mut w = Field::zeros(self.u_bar_plus.len());
        for (c, b) in coeffs.iter().zip(&self.minus_basis) {
            w.axpy(scale * c, b);
        }
        w
    }

    /// Sample points of `B₀^c`; empty when `k = 0`.
    pub fn cap_points(&self) -> Vec<Field> {
        let big_t = self.t_max;
        let mut out = Vec::new();
        for j in 1..=self.samples.t {
            let t = big_t * j as f64 / (self.samples.t + 1) as f64;
            for v in &self.sphere {
                out.push(self.minus_point(v, big_t).add_scaled(t, &self.u_bar_plus));
            }
        }
        out
    }

    /// Sample points of `B₀^d`; for `k = 0` these are `{0, Tū⁺}`.
    pub fn side_points(&self) -> Vec<Field> {
        let big_t = self.t_max;
        if self.k == 0 {
            return vec![Field::zeros(self.u_bar_plus.len()), self.u_bar_plus.scaled(big_t)];
        }
        let m = self.samples.s.max(2);
        let mut out = Vec::new();
        for t in [0.0, big_t] {
            for j in 0..m {
                let s = big_t * j as f64 / (m - 1) as f64;
                for v in &self.sphere {
                    out.push(self.minus_point(v, s).add_scaled(t, &self.u_bar_plus));
                    if s == 0.0 {
                        break;
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LinkingValues {
    pub b_c: f64,
    pub b_d: f64,
    pub b: f64,
    pub a: f64,
    pub delta_e: f64,
    pub frame_t: f64,
    /// Point of `S⁺_{r_k}` attaining the sampled infimum.
    #[serde(skip)]
    pub a_witness: Field,
}

fn sup_over(p: &ProblemSpec, pts: &[Field], energy: f64, tp: TruncationParams) -> Result<(f64, Option<Field>)> {
    let mut best = f64::NEG_INFINITY;
    let mut wit = None;
    for u in pts {
        let v = p.rayleigh_trunc(u, energy, tp)?;
        if v > best {
            best = v;
            wit = Some(u.clone());
        }
    }
    Ok((best, wit))
}

/// Samples of the sphere `S⁺_r`: a circle in the two lowest W⁺ modes,
/// random combinations of the eight lowest, and random high modes.
pub fn plus_sphere_samples(spec: &SpectralData, r: f64, count: usize, seed: u64) -> Vec<Field> {
    let k = spec.k();
    let n = spec.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a11c);
    let mut out = Vec::with_capacity(count);
    let m1 = spec.unit_mode(k);
    let m2 = if k + 1 < n { spec.unit_mode(k + 1) } else { m1.clone() };
    let circle = count / 4;
    for j in 0..circle {
        let th = std::f64::consts::TAU * j as f64 / circle as f64;
        out.push(m1.scaled(th.cos()).add_scaled(th.sin(), &m2));
    }
    let low = (k + 8).min(n);
    while out.len() < count {
        let mut w = Field::zeros(n);
        if out.len() % 3 == 2 {
            let j = rng.gen_range(k..n);
            w.axpy(1.0, &spec.unit_mode(j));
            w.axpy(rng.gen_range(-1.0..1.0), &m1);
        } else {
            for i in k..low {
                let c: f64 = rng.gen_range(-1.0..1.0);
                w.axpy(c, &spec.unit_mode(i));
            }
        }
        out.push(w);
    }
    out.into_iter()
        .map(|w| {
            let nrm = spec.norm1(&w).total;
            w.scaled(r / nrm)
        })
        .collect()
}

/// Sampled `b^c, b^d, b = max(b^c, b^d)` and `a = inf_{S⁺_{r_k}} R^E_ρ`.
pub fn verify_linking_values(
    p: &ProblemSpec,
    frame: &LinkingFrame,
    consts: &Constants,
    energy: f64,
    tp: TruncationParams,
    seed: u64,
) -> Result<LinkingValues> {
    let (b_c, wc) = sup_over(p, &frame.cap_points(), energy, tp)?;
    let (b_d, wd) = sup_over(p, &frame.side_points(), energy, tp)?;
    let b = b_c.max(b_d);
    let sphere = plus_sphere_samples(&p.spectral, consts.r_k_lambda, frame.samples.plus_sphere, seed);
    let mut a = f64::INFINITY;
    let mut a_witness = Field::zeros(p.n());
    for u in &sphere {
        let v = p.rayleigh_trunc(u, energy, tp)?;
        if v < a {
            a = v;
            a_witness = u.clone();
        }
    }
    if b > 0.0 {
        let w = if b_c >= b_d { wc } else { wd };
        return Err(Error::GeometryBroken {
            detail: format!("sup over B0 = {b:.3e} > 0; increase T (now {}) or decrease E", frame.t_max),
            witness: w.map(|f| f.0).unwrap_or_default(),
        });
    }
    if !(a > 0.0) {
        return Err(Error::GeometryBroken {
            detail: format!("inf over S+ = {a:.3e} ≤ 0; decrease E"),
            witness: a_witness.0,
        });
    }
    Ok(LinkingValues {
        b_c,
        b_d,
        b,
        a,
        delta_e: consts.delta_e(energy),
        frame_t: frame.t_max,
        a_witness,
    })
}

/// Frame with `T` doubled from `4 r_k` until the sampled `b^d ≤ 0`.
#[allow(clippy::too_many_arguments)]
pub fn select_frame(
    p: &ProblemSpec,
    consts: &Constants,
    u_bar_plus: Field,
    energy: f64,
    tp: TruncationParams,
    samples: FrameSamples,
    fixed_t: Option<f64>,
    seed: u64,
) -> Result<LinkingFrame> {
    if let Some(t) = fixed_t {
        if !(t > consts.r_k_lambda) {
            return Err(Error::InvalidParameter(format!(
                "frame T = {t} must exceed r_k = {}",
                consts.r_k_lambda
            )));
        }
        return Ok(build_linking_frame(&p.spectral, u_bar_plus, t, samples, seed));
    }
    let mut t = 4.0 * consts.r_k_lambda;
    let cap = 1024.0 * consts.r_k_lambda;
    loop {
        let frame = build_linking_frame(&p.spectral, u_bar_plus.clone(), t, samples, seed);
        let (b_d, w) = sup_over(p, &frame.side_points(), energy, tp)?;
        if b_d <= 0.0 {
            return Ok(frame);
        }
        t *= 2.0;
        if t > cap {
            return Err(Error::GeometryBroken {
                detail: format!("b_d = {b_d:.3e} > 0 up to T = {cap}"),
                witness: w.map(|f| f.0).unwrap_or_default(),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    #[test]
    fn frame_shapes() {
        let mesh = Mesh::new(30, 3).unwrap();
        let s = SpectralData::from_mesh(&mesh, 1.0).unwrap();
        let samples = FrameSamples { t: 5, s: 4, sphere: 6, plus_sphere: 10 };
        let f0 = build_linking_frame(&s, s.unit_mode(0), 3.0, samples, 0);
        assert!(f0.cap_points().is_empty());
        let side = f0.side_points();
        assert_eq!(side.len(), 2);
        assert_eq!(side[0].max_abs(), 0.0);

        let l = s.eigenvalues();
        let s1 = s.with_lambda(0.5 * (l[0] + l[1])).unwrap();
        let f1 = build_linking_frame(&s1, s1.unit_mode(1), 3.0, samples, 0);
        assert_eq!(f1.sphere, vec![vec![1.0], vec![-1.0]]);
        assert!((s1.norm1(&f1.minus_basis[0]).total - 1.0).abs() < 1e-10);
        assert_eq!(f1.cap_points().len(), 5 * 2);
        // t ∈ {0, T}, s = 0 counted once per t
        assert_eq!(f1.side_points().len(), 2 * (1 + 3 * 2));

        let s2 = s.with_lambda(0.5 * (l[1] + l[2])).unwrap();
        let f2 = build_linking_frame(&s2, s2.unit_mode(2), 3.0, samples, 0);
        assert_eq!(f2.sphere.len(), 6);
        assert_eq!(plus_sphere_samples(&s2, 2.0, 10, 1).len(), 10);
    }
}
