//! Proportional topology optimization (PTO) for 2-D plane-stress structures.
//!
//! Two non-gradient optimizers share one structured-grid finite element
//! core: a stress-constrained volume minimizer and a volume-constrained
//! compliance minimizer. An optimality-criteria compliance minimizer is
//! included as a gradient-based reference.

pub mod analysis;
pub mod bench;
pub mod config;
pub mod error;
pub mod fem;
pub mod oc;
pub mod output;
pub mod filter;
pub mod problem;
pub mod pto;

pub use error::{Error, Result};
pub use fem::{BoundaryConditions, FemSolution, FemSystem, Material, StructuredGrid};
pub use filter::DensityFilter;
pub use problem::{Problem, ProblemKind, ProblemSpec};
pub use pto::{Objective, OptimizerConfig, RunOutcome};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/filter.md")]
    mod filter {}
    #[doc = include_str!("../../../book/src/distribution.md")]
    mod distribution {}
    #[doc = include_str!("../../../book/src/optimizers.md")]
    mod optimizers {}
    #[doc = include_str!("../../../book/src/oc.md")]
    mod oc {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
