//! Boundary-degenerate elliptic and parabolic operators
//! A u = -tr(a D^2 u) - <b, Du> + c u (and L u = -u_t + A u) whose diffusion
//! matrix vanishes on part of the boundary.  The degenerate boundary portion
//! behaves like the interior and carries no Dirichlet data; everything here
//! is organized around that fact:
//!
//! - [`operator`]: boundary classification, the Fichera function,
//!   coefficient-regularity probes, pointwise operator application, and the
//!   second-derivative boundary diagnostic;
//! - [`special`]: Kummer M and Tricomi U reference solutions of the
//!   one-dimensional model equation, with derivative recurrences and the
//!   regularity classification at the degenerate endpoint;
//! - [`perturbation`]: the local-maximum perturbation construction (Hopf
//!   check, constants selection, quadratic w, cut cylinder, sampling
//!   certificate);
//! - [`transform`]: boundary straightening and the tangential-drift killing
//!   map, with analytic and chain-rule-numeric coefficient transforms;
//! - [`solver`]: upwind M-matrix finite differences with degenerate-boundary
//!   rows, partial Dirichlet data, direct banded and preconditioned
//!   iterative solves, the backward-from-terminal parabolic march, and
//!   discrete maximum-principle checks;
//! - [`obstacle`]: projected SOR for min{A u - f, u - psi} = 0 with
//!   comparison and uniqueness checks;
//! - [`config`], [`expr`], [`report`], [`cli`], [`suite`]: JSON problem
//!   configs, the value-expression grammar, deterministic serialization,
//!   the command-line surface, and the verification battery.

pub mod cli;
pub mod coefficients;
pub mod config;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod obstacle;
pub mod operator;
pub mod perturbation;
pub mod report;
pub mod solver;
pub mod special;
pub mod suite;
pub mod transform;

pub use coefficients::{CoefficientField, SmoothField, SymMat};
pub use error::{Error, Result};
pub use geometry::{Grid, Point, SpatialDomain};
pub use operator::BoundaryClassification;
pub use solver::{DiscreteOperator, SolveReport};
