//! Error type shared by all solver modules.

use thiserror::Error;

/// Errors reported by the spectral solver.
#[derive(Debug, Clone, Error)]
pub enum SolverError {
    /// Invalid construction parameter (nonpositive κ, zero coupling, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Requested level index does not exist.
    #[error("level index {index} out of range: {reason}")]
    LevelOutOfRange { index: usize, reason: String },

    /// Energy too close to an eigenvalue of the base problem.
    #[error("energy {energy} within guard band of level at {pole}")]
    PoleProximity { energy: f64, pole: f64 },

    /// Real energy inside the continuous spectrum with no closed-form kernel.
    #[error("energy {energy} lies on the continuum cut (infimum {infimum}) and no closed form applies")]
    CutViolation { energy: f64, infimum: f64 },

    /// Operation requires a capability this problem does not provide.
    #[error("unsupported for problem '{problem}': {reason}")]
    Unsupported { problem: String, reason: String },

    /// Energy coincides with a zero of the principal function.
    #[error("energy {energy} is a perturbed eigenvalue (Φ = 0)")]
    ZeroOfPhi { energy: f64 },

    /// Wavefunction requested at an energy that is not a root of Φ.
    #[error("energy {energy} is not a root of Φ (residual {residual})")]
    NotARoot { energy: f64, residual: f64 },

    /// Perturbative corrections vanish identically (support at a node),
    /// or the level does not exist.
    #[error("level {level}: {reason}")]
    NodeLevel { level: usize, reason: String },

    /// The new ground state lies below the requested window.
    #[error("ground-state root {root} lies below the window")]
    WindowTooNarrow { root: f64 },

    /// No sign change of the secular function inside the window.
    #[error("no root found in window ({lo}, {hi})")]
    NoRootInWindow { lo: f64, hi: f64 },

    /// Principal matrix nearly singular away from a root.
    #[error("principal matrix ill-conditioned near E = {energy} (cond ≈ {condition:.3e})")]
    IllConditioned { energy: f64, condition: f64 },

    /// Point dimensionality does not match the problem.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Renormalized evaluation requested on a problem without the
    /// required structure.
    #[error("problem '{0}' does not support renormalized evaluation")]
    NonRenormalizedProblem(String),

    /// Quadrature failed to reach the requested tolerance.
    #[error("quadrature error estimate {estimate:.3e} exceeds tolerance {tol:.3e}")]
    QuadratureFailure { estimate: f64, tol: f64 },

    /// Root refinement did not converge.
    #[error("root refinement failed in bracket ({lo}, {hi}): {reason}")]
    RootFailure { lo: f64, hi: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, SolverError>;
