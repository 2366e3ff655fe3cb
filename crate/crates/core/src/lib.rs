//! Prescribed-energy saddle points of the indefinite 1-D Dirichlet problem
//!
//! ```text
//! −u'' − λu = μ|u|^{q−2}u + g(x, u)  on (0, 1),   u(0) = u(1) = 0,
//! ```
//!
//! where the Lagrange multiplier `μ > 0` is an output, fixed by the energy
//! constraint `E_μ(u) = E`. Solutions are critical points of the energy-level
//! Rayleigh quotient `R^E(u) = (½H_λ(u) − 𝒢(u) − E)/(|u|_q^q/q)`, found by a
//! local minimax method over the linking geometry of the spectral splitting
//! `H¹₀ = W⁻ ⊕ W⁺` of `−d²/dx² − λ`.
//!
//! Module map: [`mesh`] (P1 elements and quadrature), [`spectral`]
//! (eigenpairs, splitting, equivalent norm), [`functionals`] (energy,
//! quotient, truncation, gradients), [`minimax`] (constants, linking frame,
//! saddle searches, Newton refinement), [`continuation`] (energy sweeps and
//! the zero-energy limit) and [`verify`] (finite-difference, fibering,
//! embedding and Cerami diagnostics).

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(feature = "cli")]
pub mod cli;
pub mod continuation;
pub mod error;
pub mod functionals;
pub mod mesh;
pub mod minimax;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use functionals::{Nonlinearity, ProblemSpec, TruncationParams};
pub use mesh::{build_mesh, Field, Mesh};
pub use minimax::{solve_mountain_pass_path, solve_saddle, SaddleResult, Solver, SolverOptions};
pub use spectral::SpectralData;
