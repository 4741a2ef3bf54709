//! Mesh, finite element spaces, quadrature and assembly.

pub mod assembly;
pub mod elements;
pub mod mesh;
pub mod norms;
pub mod quadrature;
pub mod space;
pub mod vtk;

pub use assembly::{assemble_bilinear, assemble_form, assemble_linear, FormSpec, QPoint};
pub use mesh::{build_mesh, Mesh, Region};
pub use space::{BasisEval, FeSpace, Field, ScalarField, SpaceKind, VectorField};
