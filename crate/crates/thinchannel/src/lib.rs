//! Darcy–Stokes flow through a thin curved channel over a porous block, its
//! Darcy–Brinkman interface limit as the channel width ε → 0, and a numerical
//! harness that checks the limit structure.
//!
//! The numerical core is generic over the scalar type (`Real`); the aliases
//! below fix it to `f64`, which is what the CLI and the tests use.

pub mod asymptotics;
pub mod cli;
pub mod config;
pub mod discretization;
pub mod eps_solver;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod limit_solver;
pub mod linalg;
pub mod operators;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Chart = geometry::InterfaceChart<f64>;
pub type Domain = geometry::DomainSpec<f64>;
pub type Mesh = discretization::Mesh<f64>;
pub type Coefficients = eps_solver::ProblemCoefficients<f64>;
pub type EpsSystem = eps_solver::EpsSystem<f64>;
pub type EpsSolution = eps_solver::EpsSolution<f64>;
pub type LimitSystem = limit_solver::LimitSystem<f64>;
pub type LimitSolution = limit_solver::LimitSolution<f64>;
