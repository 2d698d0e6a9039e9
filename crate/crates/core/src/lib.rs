//! Numerical construction and verification of compactly supported
//! solutions of the saturated Schrodinger equation
//! `i u_t + Delta u = a u/|u| + f`.
//!
//! The stationary problem `-Delta u + a U + b u + V u = F` is discretized by
//! a conservative finite-difference scheme on intervals and radial meshes,
//! solved by continuation through Lipschitz regularizations, and audited
//! against the energy identities and a priori bounds it must satisfy.
//! Self-similar solutions are obtained by solving the gauge-transformed
//! profile equation.

pub mod audit;
pub mod error;
pub mod gauge;
pub mod linalg;
pub mod mesh;
pub mod saturation;
pub mod solver;
pub mod support;

pub use error::{Error, Result};
pub use mesh::{BoundaryCondition, ComplexGridFn, Mesh, MeshKind};
pub use solver::{solve_saturated, ProblemSpec, SolveConfig, SolveReport};
