use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{rho_estimate, ProblemSpec};
use crate::verify::{embedding_constant, Subspace};

/// Supplies `S_r = sup_{W⁺} |u|_Lr / ‖u‖₁`.
pub trait EmbeddingProvider {
    fn constant(&self, p: &ProblemSpec, r: f64) -> Result<f64>;
}

/// Multi-start conditional-gradient ascent on the discrete space.
#[derive(Debug, Clone, Copy)]
pub struct AscentEmbedding {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for AscentEmbedding {
    fn default() -> Self {
        Self {
            restarts: 4,
            seed: 0,
        }
    }
}

impl EmbeddingProvider for AscentEmbedding {
    fn constant(&self, p: &ProblemSpec, r: f64) -> Result<f64> {
        Ok(embedding_constant(&p.mesh, &p.spectral, r, self.restarts, Subspace::Wplus, self.seed)?.value)
    }
}

/// Constants of the positivity estimate on `S⁺_r`.
///
/// With `f(r) = ½(1 − C₁ε)r² − C₂r^γ`, the maximizer is
/// `r_k = [(1 − C₁ε)/(γC₂)]^{1/(γ−2)}` and `E_k = f(r_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub epsilon: f64,
    pub c1: f64,
    pub c2: f64,
    pub gamma: f64,
    pub q: f64,
    /// Embedding constant for `L^q` on W⁺.
    pub s_q: f64,
    pub r_k_lambda: f64,
    pub e_k_lambda: f64,
}

impl Constants {
    pub fn from_parts(epsilon: f64, c1: f64, c2: f64, gamma: f64, q: f64, s_q: f64) -> Result<Self> {
        let coercive = 1.0 - c1 * epsilon;
        if !(coercive > 0.0 && coercive < 1.0) {
            return Err(Error::InvalidParameter(format!("C1·ε = {} not in (0, 1)", c1 * epsilon)));
        }
        if !(c2 > 0.0) || !(gamma > 2.0) {
            return Err(Error::InvalidParameter(format!("C2 = {c2}, gamma = {gamma}")));
        }
        let r = (coercive / (gamma * c2)).powf(1.0 / (gamma - 2.0));
        let e = 0.5 * coercive * r * r - c2 * r.powf(gamma);
        Ok(Self {
            epsilon,
            c1,
            c2,
            gamma,
            q,
            s_q,
            r_k_lambda: r,
            e_k_lambda: e,
        })
    }

    pub fn f(&self, r: f64) -> f64 {
        0.5 * (1.0 - self.c1 * self.epsilon) * r * r - self.c2 * r.powf(self.gamma)
    }

    /// Lower bound `q(E_k − E)/(S_q^q r_k^q)` of the quotient on `S⁺_{r_k}`.
    pub fn delta_e(&self, energy: f64) -> f64 {
        self.q * (self.e_k_lambda - energy) / (self.s_q.powf(self.q) * self.r_k_lambda.powf(self.q))
    }

    pub fn rho_est(&self, energy: f64) -> f64 {
        rho_estimate(energy)
    }

    /// Default truncation radius `½ min(r_k, √(2E))`.
    pub fn default_rho(&self, energy: f64) -> f64 {
        0.5 * self.r_k_lambda.min(self.rho_est(energy))
    }

    pub fn check_energy(&self, energy: f64) -> Result<()> {
        if !(energy > 0.0 && energy < self.e_k_lambda) {
            return Err(Error::EnergyOutOfRange {
                energy,
                bound: self.e_k_lambda,
            });
        }
        Ok(())
    }
}

/// `C₁ = 1/(λ_{k+1} − λ)`, `C₁ε = ¼`, `C₂ = C(ε) S_γ^γ`.
pub fn estimate_constants(p: &ProblemSpec, embed: &dyn EmbeddingProvider) -> Result<Constants> {
    let k = p.k();
    let ev = p.spectral.eigenvalues();
    if k >= ev.len() {
        return Err(Error::NoGap(k));
    }
    let c1 = 1.0 / (ev[k] - p.lambda());
    let epsilon = 0.25 / c1;
    let gamma = p.nonlinearity.gamma;
    let s_gamma = embed.constant(p, gamma)?;
    let s_q = embed.constant(p, p.q)?;
    let c2 = p.nonlinearity.growth_constant(epsilon) * s_gamma.powf(gamma);
    Constants::from_parts(epsilon, c1, c2, gamma, p.q, s_q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_closed_forms() {
        // 1 − C1ε = 0.75 with C1 = 1, ε = 0.25
        let c = Constants::from_parts(0.25, 1.0, 0.25, 4.0, 1.5, 1.0).unwrap();
        // scan f over (0, 3] to bracket the maximizer, then bisect on f'
        let m = 3000;
        let grid: Vec<f64> = (1..=m).map(|i| 3.0 * i as f64 / m as f64).collect();
        let i_best = (0..m).max_by(|&a, &b| c.f(grid[a]).total_cmp(&c.f(grid[b]))).unwrap();
        let df = |r: f64| 0.75 * r - 4.0 * 0.25 * r.powi(3);
        let (mut lo, mut hi) = (grid[i_best.saturating_sub(1)], grid[(i_best + 1).min(m - 1)]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if df(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let best_r = 0.5 * (lo + hi);
        let best_f = grid.iter().map(|&r| c.f(r)).fold(f64::NEG_INFINITY, f64::max);
        assert!((c.r_k_lambda - 0.866_025_403_784_438_6).abs() < 1e-9);
        assert!((c.r_k_lambda - best_r).abs() < 1e-9);
        assert!((c.e_k_lambda - 0.140_625).abs() < 1e-9);
        assert!(c.e_k_lambda >= best_f);
    }

    #[test]
    fn energy_range() {
        let c = Constants::from_parts(0.25, 1.0, 0.25, 4.0, 1.5, 1.0).unwrap();
        assert!(c.check_energy(0.1).is_ok());
        assert!(matches!(c.check_energy(0.2), Err(Error::EnergyOutOfRange { .. })));
        assert!(c.check_energy(0.0).is_err());
        assert!(c.delta_e(0.1) > 0.0);
    }
}
