//! Numerical tolerances shared across the crate.
//!
//! Every threshold that a routine compares against lives in [`Tolerances`];
//! the defaults are the values the test-suite is pinned to.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative error allowed on `|x| = 1/sqrt(K)` for sphere points.
    pub sphere_membership: f64,
    /// Orthogonality slack for sphere tangent vectors.
    pub tangent_orthogonality: f64,
    /// `log` is refused when `dist >= inj - cut_guard`.
    pub cut_guard: f64,
    /// Two points closer than this are treated as coincident.
    pub coincidence: f64,
    /// Weight vectors must sum to one within this.
    pub weight_sum: f64,
    /// First-order residual target on flat and hyperbolic charts.
    pub grad_residual: f64,
    /// First-order residual target on spheres.
    pub grad_residual_sphere: f64,
    /// Near-equal minimizers (value gap below this) are ties.
    pub tie_gap: f64,
    /// Reduced-cost threshold used by the simplex pricing step.
    pub reduced_cost: f64,
    /// Dual-constraint slack accepted as "active".
    pub dual_slack: f64,
    /// Active-set width when locating c-transform competitors.
    pub active_set: f64,
    /// Barycenters closer than this are "shared" in the injectivity scan.
    pub injectivity_bary: f64,
    /// Configurations further apart than this violate injectivity.
    pub injectivity_config: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sphere_membership: 1e-12,
            tangent_orthogonality: 1e-10,
            cut_guard: 1e-7,
            coincidence: 1e-10,
            weight_sum: 1e-12,
            grad_residual: 1e-8,
            grad_residual_sphere: 1e-7,
            tie_gap: 1e-9,
            reduced_cost: 1e-11,
            dual_slack: 1e-8,
            active_set: 1e-9,
            injectivity_bary: 1e-6,
            injectivity_config: 1e-5,
        }
    }
}

impl Tolerances {
    /// Scales the solver-facing targets (residuals) by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.grad_residual *= factor;
        self.grad_residual_sphere *= factor;
        self
    }
}
