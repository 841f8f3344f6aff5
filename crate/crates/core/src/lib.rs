//! Generalized h-Wasserstein barycenters on constant-curvature manifolds.
//!
//! The crate solves weighted barycenter problems `min_y sum_i l_i h(d(y, x_i))`
//! on Euclidean space, round spheres and the Poincare ball, lifts them to
//! exact multi-marginal transport between discrete measures, and ships the
//! numerical diagnostics (inverse map, Hessian bounds, `E_{eps,delta}`
//! membership) used to study the resulting barycenter measures.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barycenter;
pub mod cli;
pub mod cost;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod invmap;
mod linalg;
mod serde_inf;
pub mod tolerances;
pub mod transport;

pub use barycenter::{solve_barycenter, BarycenterSolution, BarycenterSolver, Configuration, SolverOptions};
pub use cost::{counterexample_profile, custom_profile, power_profile, CostProfile, ProfileSpec};
pub use error::{Error, Result};
pub use geometry::{Chart, Point, TangentVec};
pub use tolerances::Tolerances;
pub use transport::{solve_mmot, DiscreteMeasure, MmotSolution, MultiPlan};
