use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the solver stack can report.
///
/// Variants split into precondition failures (bad input, exit code 2 at the
/// command line) and numerical failures (non-convergence, exit code 3).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mesh: need at least 2 interior nodes, got {0}")]
    DegenerateMesh(usize),
    #[error("mesh: unsupported quadrature order {0} (expected 2..=5)")]
    QuadratureOrder(usize),
    #[error("mesh: field length {got} does not match mesh size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("mesh: non-finite integrand at x = {x}")]
    NonFinite { x: f64 },
    #[error("spectral: lambda = {lambda} resonates with eigenvalue {index} ({eigenvalue})")]
    ResonantLambda {
        lambda: f64,
        index: usize,
        eigenvalue: f64,
    },
    #[error("spectral: no eigenvalue above lambda, spectral gap above index {0} missing")]
    NoGap(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("functionals: |u|_Lq vanishes (denominator {0:e})")]
    ZeroDenominator(f64),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("energy level {energy} outside (0, E_k) with E_k = {bound}")]
    EnergyOutOfRange { energy: f64, bound: f64 },
    #[error("minimax: linking geometry broken ({detail})")]
    GeometryBroken { detail: String, witness: Vec<f64> },
    #[error("minimax: peak selection did not converge in {0} iterations")]
    MaxIterInner(usize),
    #[error("minimax: peak selection diverged (coordinate norm {0:e})")]
    UnboundedAscent(f64),
    #[error("minimax: outer iteration did not converge in {iterations} steps (residual {residual:e})")]
    MaxIterOuter { iterations: usize, residual: f64 },
    #[error("minimax: iterate collapsed to zero (|u|_Lq = {0:e})")]
    CollapseToZero(f64),
    #[error("newton: singular jacobian")]
    SingularJacobian,
    #[error("newton: no progress (residual {0:e})")]
    NoProgress(f64),
    #[error("mountain pass: no endpoint with negative quotient found up to t = {0}")]
    EndpointNotFound(f64),
    #[error("mountain pass: path did not converge in {iterations} steps (residual {residual:e})")]
    MaxIter { iterations: usize, residual: f64 },
    #[error("continuation: no energy level converged")]
    AllFailed,
    #[error("continuation: zero-energy sequence not Cauchy after {0} halvings")]
    NotCauchy(usize),
    #[error("verify: empty trace")]
    EmptyTrace,
}

impl Error {
    /// Precondition failures as opposed to numerical non-convergence.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::DegenerateMesh(_)
                | Error::QuadratureOrder(_)
                | Error::LengthMismatch { .. }
                | Error::ResonantLambda { .. }
                | Error::NoGap(_)
                | Error::InvalidParameter(_)
                | Error::EnergyOutOfRange { .. }
                | Error::EmptyTrace
        )
    }

    /// Module-qualified code used in command-line diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DegenerateMesh(_) => "mesh.degenerate",
            Error::QuadratureOrder(_) => "mesh.quad_order",
            Error::LengthMismatch { .. } => "mesh.length",
            Error::NonFinite { .. } => "mesh.non_finite",
            Error::ResonantLambda { .. } => "spectral.resonant_lambda",
            Error::NoGap(_) => "spectral.no_gap",
            Error::InvalidParameter(_) => "config.invalid",
            Error::ZeroDenominator(_) => "functionals.zero_denominator",
            Error::LinearSolve(_) => "linalg.solve",
            Error::EnergyOutOfRange { .. } => "minimax.energy_range",
            Error::GeometryBroken { .. } => "minimax.geometry_broken",
            Error::MaxIterInner(_) => "minimax.max_iter_inner",
            Error::UnboundedAscent(_) => "minimax.unbounded_ascent",
            Error::MaxIterOuter { .. } => "minimax.max_iter_outer",
            Error::CollapseToZero(_) => "minimax.collapse_to_zero",
            Error::SingularJacobian => "newton.singular_jacobian",
            Error::NoProgress(_) => "newton.no_progress",
            Error::EndpointNotFound(_) => "mpa.endpoint_not_found",
            Error::MaxIter { .. } => "mpa.max_iter",
            Error::AllFailed => "continuation.all_failed",
            Error::NotCauchy(_) => "continuation.not_cauchy",
            Error::EmptyTrace => "verify.empty_trace",
        }
    }
}
