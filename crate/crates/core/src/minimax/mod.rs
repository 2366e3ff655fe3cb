//! Numerical realization of the linking minimax and mountain-pass
//! characterizations of `μ(E)`.
//!
//! The local minimax method alternates a *peak selection*, maximizing the
//! truncated quotient over `W⁻ ⊕ span{v}`, with a projected Sobolev
//! gradient step on the direction `v` over the unit sphere of `W⁺`. The
//! converged peak is polished by Newton's method on the augmented system
//! `DE_μ(u) = 0, E_μ(u) = E` in the unknowns `(u, μ)`.

mod constants;
mod linking;
mod lmm;
mod mpa;
mod newton;
mod peak;

pub use constants::{estimate_constants, AscentEmbedding, Constants, EmbeddingProvider};
pub use linking::{build_linking_frame, select_frame, verify_linking_values, FrameSamples, LinkingFrame, LinkingValues};
pub use lmm::{solve_saddle, Solver};
pub use mpa::solve_mountain_pass_path;
pub use newton::{newton_refine, NewtonReport};
pub use peak::{peak_selection, Peak, PeakOptions};

use serde::{Deserialize, Serialize};

use crate::mesh::Field;

/// Which saddle search produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Local minimax method over the linking geometry.
    Lmm,
    /// Path-based mountain-pass algorithm (`k = 0` only).
    Mpa,
}

/// One outer iteration of a saddle search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub value: f64,
    pub residual: f64,
    pub norm1: f64,
    pub lq_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SaddleResult {
    pub algorithm: Algorithm,
    pub u: Field,
    pub mu: f64,
    pub energy_target: f64,
    pub energy_achieved: f64,
    /// Dual norm of `DE_μ(u)` after refinement.
    pub dual_residual: f64,
    /// Dual norm of the truncated quotient gradient when the search stopped.
    pub search_residual: f64,
    pub norm1: f64,
    pub lq_norm: f64,
    pub rho: f64,
    pub iterations: usize,
    pub newton_iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRecord>,
    /// Peak-selection basins that were seen with more than one local maximum.
    pub multiplicity_notes: usize,
}

/// Tolerances and iteration limits of the saddle searches.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Relative Cerami-style stopping threshold: residual ≤ `tol_grad·(1 + ‖u‖₁)`.
    pub tol_grad: f64,
    /// Coordinate-gradient threshold inside peak selection.
    pub tol_inner: f64,
    /// Energy defect accepted after refinement.
    pub tol_energy: f64,
    /// Dual residual accepted after refinement.
    pub tol_refine: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_backtrack: usize,
    /// Number of initial directions tried (1 = `e_{k+1}` only).
    pub multi_start: usize,
    pub seed: u64,
    /// Fixed truncation radius; default `½ min(r_k, √(2E))`.
    pub rho: Option<f64>,
    /// Fixed frame size `T`; default doubling from `4 r_k`.
    pub frame_t: Option<f64>,
    pub frame_samples: FrameSamples,
    /// Restarts for the embedding-constant ascent.
    pub embedding_restarts: usize,
    /// Nodes of the mountain-pass path.
    pub path_points: usize,
    /// Regularization of `|u|^{q−2}` in the Newton jacobian.
    pub eps_reg: f64,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_grad: 1e-6,
            tol_inner: 1e-10,
            tol_energy: 1e-8,
            tol_refine: 1e-10,
            max_outer: 5000,
            max_inner: 500,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_backtrack: 40,
            multi_start: 1,
            seed: 0,
            rho: None,
            frame_t: None,
            frame_samples: FrameSamples::default(),
            embedding_restarts: 4,
            path_points: 33,
            eps_reg: 1e-10,
            max_newton: 30,
        }
    }
}
