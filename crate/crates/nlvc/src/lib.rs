//! Nonlocal vector calculus on meshfree box discretizations.
//!
//! The crate implements the discrete nonlocal divergence/gradient/curl
//! operator family for antisymmetric two-point kernels with bounded horizon,
//! the interaction ("nonlocal boundary") operators, and the constructive
//! Helmholtz–Hodge decomposition of two-point vector fields
//! `u = G phi + C* w + h`, together with the supporting machinery:
//!
//! * [`geometry`] — uniform cell-center grids over a box, interaction-domain
//!   classification, and exact horizon neighbor search;
//! * [`kernels`] — the kernel families (unit-direction, planar-scaled,
//!   fractional prototype, constant-gamma) plus the micromodulus
//!   correspondence and the kernel-weighted energy seminorm;
//! * [`fields`] — one-point and two-point fields, the one-point → two-point
//!   lifts, the worked planar example fields, and CSV I/O;
//! * [`operators`] — quadrature applications of every operator and the
//!   assembled sparse forms used by the solvers;
//! * [`solver`] — deflated conjugate gradients for the two consistent
//!   positive-semidefinite systems, with compatibility and solvability
//!   diagnostics;
//! * [`decomposition`] — the potential/stream solves and the full
//!   decomposition pipeline with orthogonality and flux diagnostics;
//! * [`convergence`] — ball-moment quadrature and the vanishing-horizon
//!   limit studies of the scaled Laplacian and curl-curl operators;
//! * [`verify`] — the operator identity suite (Gauss theorem, Green's first
//!   identity, dualities, composition identities) as checkable routines.
//!
//! All applies are deterministic: row-parallel evaluation uses a fixed
//! per-row summation order, so results are bit-identical for any thread
//! count.

pub mod analytic;
pub mod convergence;
pub mod decomposition;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod operators;
pub mod solver;
pub mod verify;

pub use error::{NlvcError, Result};
