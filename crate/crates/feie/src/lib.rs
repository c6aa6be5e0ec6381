//! Coupled finite element / integral equation solvers for two-dimensional
//! Poisson problems on embedded meshes.
//!
//! The library provides three solver drivers built from the same pieces:
//!
//! - an interior solver for a Dirichlet problem on a smooth domain embedded
//!   in a rectangle (finite elements on the rectangle, a second-kind double
//!   layer equation on the embedded boundary, combined by forward
//!   substitution);
//! - an exclusion solver for a rectangle with a smooth hole (finite elements
//!   on the full rectangle coupled to an exterior integral equation through a
//!   Schur complement solved with GMRES);
//! - an interface solver for transmission conditions across an embedded
//!   curve, coupling an interior and an exterior subproblem through a
//!   two-density second-kind system.
//!
//! Layer potentials are discretized with composite Gauss-Legendre panels and
//! a Nystrom method; on- and near-surface values are evaluated by quadrature
//! by expansion (QBX). Finite element spaces are tensor-product Lagrange
//! elements on uniform rectangular grids.

pub mod fem;
pub mod geometry;
pub mod potentials;
pub mod problems;
pub mod solvers;
