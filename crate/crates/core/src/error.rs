use thiserror::Error;

/// Errors raised while setting up or running an optimization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid boundary conditions: {0}")]
    InvalidBoundary(String),

    /// The free-DOF stiffness matrix could not be factorized.
    #[error(
        "singular stiffness system ({free_dofs} free of {total_dofs} dofs, {fixed_dofs} fixed): {detail}"
    )]
    SingularSystem {
        free_dofs: usize,
        fixed_dofs: usize,
        total_dofs: usize,
        detail: String,
    },

    /// The requested material amount lies outside `[N·lo, N·hi]`.
    #[error("material target {target} outside attainable range [{min}, {max}]")]
    UnreachableTarget { target: f64, min: f64, max: f64 },

    #[error("distribution loop made no progress after {passes} passes (remaining {remaining:e})")]
    StagnantInnerLoop { passes: usize, remaining: f64 },

    #[error("lagrange multiplier bisection failed: {0}")]
    BisectionFailure(String),

    #[error("invalid problem spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
