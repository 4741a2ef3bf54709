//! Sparse storage, orderings, a banded direct solver, saddle-point solvers and dense eigenvalue routines.

pub mod banded;
pub mod dense;
pub mod ordering;
pub mod saddle;
pub mod sparse;

pub use banded::{is_positive_semidefinite, solve_refined, BandedLu};
pub use dense::{scaled_min_singular_value, Dense, INFSUP_MAX_DOFS};
pub use saddle::{saddle_matrix, solve_saddle, uzawa_cg, SaddleSolution};
pub use sparse::{dot, norm2, CsrMatrix};
