//! Parameter-free partially penalized immersed finite elements for the
//! elliptic interface problem
//!
//! ```text
//! -∇·(β∇u) = f  in Ω⁻ ∪ Ω⁺,   [u] = 0,   [β∇u·n] = 0  on Γ,   u = g  on ∂Ω,
//! ```
//!
//! on Cartesian triangulations that do not fit the interface. The penalty on
//! interface edges is expressed through local liftings of jumps, so the
//! scheme has no tunable stabilization parameter.

pub mod analysis;
pub mod assembly;
pub mod coefficient;
pub mod experiment;
pub mod geometry;
pub mod ife3d;
pub mod ife_space;
pub mod lifting;
pub mod linalg;
pub mod mesh;
pub mod problem;
pub mod quadrature;
#[cfg(feature = "verification")]
pub mod verify;

pub use geometry::{Side, Vec2};

/// Errors surfaced by the high-level drivers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Ife(#[from] ife_space::IfeError),
    #[error(transparent)]
    Solver(#[from] linalg::SolverError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    Config(#[from] experiment::ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("problem has no exact solution to measure errors against")]
    NoExactSolution,
}
