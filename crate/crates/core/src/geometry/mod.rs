//! Closed-form differential geometry on the three constant-curvature model
//! spaces: Euclidean space, the round sphere and the hyperbolic plane.
//!
//! Coordinates:
//!
//! * `Euclidean { dim }`: points and tangent vectors are plain `dim`-vectors.
//! * `Sphere { dim, curvature }`: points are ambient `(dim + 1)`-vectors on the
//!   sphere of radius `1/sqrt(K)`; tangent vectors are ambient vectors
//!   orthogonal to the base point.
//! * `Hyperbolic { dim, curvature }`: points live in the open unit Poincaré
//!   ball with the metric `4 |dx|^2 / (|K| (1 - |x|^2)^2)`. Tangent vectors are
//!   stored in the orthonormal frame `e_i * sqrt(|K|) (1 - |x|^2) / 2`, so the
//!   Euclidean norm of the components is the Riemannian norm.
//!
//! With these conventions every tangent vector's Riemannian inner product is
//! the plain dot product of its components, on all three charts.

mod cells;

pub use cells::{uniform_cell_volumes, Ball, CellPartition};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, scale, sub};
use crate::tolerances::Tolerances;

/// A point in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        Point(coords.into())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

/// Tangent vector components in the orthonormal frame of the base point it
/// was produced for (see the module docs). The base point is not stored;
/// callers pass it alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TangentVec(pub Vec<f64>);

impl TangentVec {
    pub fn zeros(n: usize) -> Self {
        TangentVec(vec![0.0; n])
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &TangentVec) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn scaled(&self, s: f64) -> TangentVec {
        TangentVec(scale(&self.0, s))
    }
}

impl std::ops::Deref for TangentVec {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// The geometry backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Chart {
    Euclidean { dim: usize },
    Sphere { dim: usize, curvature: f64 },
    Hyperbolic { dim: usize, curvature: f64 },
}

impl std::fmt::Display for Chart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Chart::Euclidean { dim } => write!(f, "euclidean(dim {dim})"),
            Chart::Sphere { dim, curvature } => write!(f, "sphere(dim {dim}, K={curvature})"),
            Chart::Hyperbolic { dim, curvature } => {
                write!(f, "hyperbolic(dim {dim}, K={curvature})")
            }
        }
    }
}

/// Symmetric bilinear form on `T_z M`, stored in an orthonormal tangent frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianForm {
    /// Orthonormal tangent frame at the base point, in tangent-vector components.
    pub frame: Vec<Vec<f64>>,
    /// `matrix[a][b] = H(frame[a], frame[b])`.
    pub matrix: Vec<Vec<f64>>,
}

impl HessianForm {
    pub fn zeros(frame: Vec<Vec<f64>>) -> Self {
        let k = frame.len();
        HessianForm {
            frame,
            matrix: vec![vec![0.0; k]; k],
        }
    }

    /// `s * g`, the metric scaled by `s`.
    pub fn scaled_metric(frame: Vec<Vec<f64>>, s: f64) -> Self {
        let mut h = HessianForm::zeros(frame);
        for (a, row) in h.matrix.iter_mut().enumerate() {
            row[a] = s;
        }
        h
    }

    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    /// Frame coordinates of a tangent vector.
    pub fn to_frame(&self, v: &[f64]) -> Vec<f64> {
        self.frame.iter().map(|e| dot(e, v)).collect()
    }

    /// Tangent-vector components from frame coordinates.
    pub fn from_frame(&self, c: &[f64]) -> Vec<f64> {
        let n = self.frame.first().map_or(0, Vec::len);
        let mut out = vec![0.0; n];
        for (e, ci) in self.frame.iter().zip(c) {
            axpy(&mut out, *ci, e);
        }
        out
    }

    /// `H(u, v)` for tangent vectors given in components.
    pub fn apply(&self, u: &[f64], v: &[f64]) -> f64 {
        let a = self.to_frame(u);
        let b = self.to_frame(v);
        let mut s = 0.0;
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                s += ai * self.matrix[i][j] * bj;
            }
        }
        s
    }

    /// `self += s * other`; both forms must share the same frame.
    pub fn add_scaled(&mut self, s: f64, other: &HessianForm) {
        for (row, orow) in self.matrix.iter_mut().zip(&other.matrix) {
            axpy(row, s, orow);
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let k = self.dim();
        let mut m: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                m = m.max((self.matrix[i][j] - self.matrix[j][i]).abs());
            }
        }
        m
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        let k = self.dim();
        nalgebra::DMatrix::from_fn(k, k, |i, j| 0.5 * (self.matrix[i][j] + self.matrix[j][i]))
    }

    /// Eigenvalues (ascending) with eigenvectors as tangent-vector components.
    pub fn eigen(&self) -> Vec<(f64, Vec<f64>)> {
        let eig = nalgebra::SymmetricEigen::new(self.to_nalgebra());
        let mut pairs: Vec<(f64, Vec<f64>)> = (0..self.dim())
            .map(|i| {
                let c: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                (eig.eigenvalues[i], self.from_frame(&c))
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    }

    /// Spectral norm.
    pub fn op_norm(&self) -> f64 {
        self.eigen().iter().map(|(l, _)| l.abs()).fold(0.0, f64::max)
    }
}

fn membership(chart: &Chart, coords: &[f64], reason: impl Into<String>) -> Error {
    Error::ChartMembership {
        chart: chart.to_string(),
        coords: coords.to_vec(),
        reason: reason.into(),
    }
}

impl Chart {
    pub fn euclidean(dim: usize) -> Self {
        Chart::Euclidean { dim }
    }

    pub fn sphere(dim: usize, curvature: f64) -> Self {
        Chart::Sphere { dim, curvature }
    }

    pub fn hyperbolic(dim: usize, curvature: f64) -> Self {
        Chart::Hyperbolic { dim, curvature }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match *self {
            Chart::Euclidean { dim } | Chart::Sphere { dim, .. } | Chart::Hyperbolic { dim, .. } => dim,
        }
    }

    /// Length of a coordinate vector (and of tangent components).
    pub fn ambient_dim(&self) -> usize {
        match *self {
            Chart::Sphere { dim, .. } => dim + 1,
            _ => self.dim(),
        }
    }

    /// Sectional curvature.
    pub fn curvature(&self) -> f64 {
        match *self {
            Chart::Euclidean { .. } => 0.0,
            Chart::Sphere { curvature, .. } => curvature,
            Chart::Hyperbolic { curvature, .. } => curvature,
        }
    }

    /// Checks the chart parameters themselves.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("{self}: {m}")));
        if self.dim() == 0 {
            return bad("dimension must be at least 1");
        }
        match *self {
            Chart::Sphere { curvature, .. } if !(curvature > 0.0 && curvature.is_finite()) => {
                bad("sphere curvature must be positive")
            }
            Chart::Hyperbolic { curvature, .. } if !(curvature < 0.0 && curvature.is_finite()) => {
                bad("hyperbolic curvature must be negative")
            }
            _ => Ok(()),
        }
    }

    fn sphere_radius(&self) -> f64 {
        match *self {
            Chart::Sphere { curvature, .. } => 1.0 / curvature.sqrt(),
            _ => f64::INFINITY,
        }
    }

    /// `sqrt(|K|)`.
    fn sqrt_abs_k(&self) -> f64 {
        self.curvature().abs().sqrt()
    }

    /// Verifies chart membership of `p`.
    pub fn check(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(membership(self, p, "non-finite coordinate"));
        }
        match *self {
            Chart::Euclidean { .. } => Ok(()),
            Chart::Sphere { .. } => {
                let r = self.sphere_radius();
                let rel = (norm(p) - r).abs() / r;
                if rel > Tolerances::default().sphere_membership {
                    Err(membership(self, p, format!("|x| deviates from 1/sqrt(K) by {rel:e}")))
                } else {
                    Ok(())
                }
            }
            Chart::Hyperbolic { .. } => {
                if dot(p, p) < 1.0 {
                    Ok(())
                } else {
                    Err(membership(self, p, "outside the open Poincaré ball"))
                }
            }
        }
    }

    /// Builds a valid point, projecting sphere coordinates onto the sphere.
    pub fn point(&self, coords: impl Into<Vec<f64>>) -> Result<Point> {
        let mut c: Vec<f64> = coords.into();
        if let Chart::Sphere { .. } = self {
            let n = norm(&c);
            if n == 0.0 || !n.is_finite() {
                return Err(membership(self, &c, "cannot project onto the sphere"));
            }
            let s = self.sphere_radius() / n;
            c.iter_mut().for_each(|x| *x *= s);
        }
        self.check(&c)?;
        Ok(Point(c))
    }

    /// `pi / sqrt(K)` on spheres, `+inf` otherwise. Point independent on
    /// these homogeneous spaces.
    pub fn injectivity_radius(&self) -> f64 {
        match *self {
            Chart::Sphere { curvature, .. } => std::f64::consts::PI / curvature.sqrt(),
            _ => f64::INFINITY,
        }
    }

    /// Geodesic distance.
    pub fn dist(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.dist_unchecked(x, y))
    }

    pub(crate) fn dist_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Chart::Euclidean { .. } => crate::linalg::dist_sq(x, y).sqrt(),
            Chart::Sphere { .. } => {
                let r = self.sphere_radius();
                let mut dm = 0.0;
                let mut dp = 0.0;
                for (a, b) in x.iter().zip(y) {
                    let (a, b) = (a / r, b / r);
                    dm += (a - b) * (a - b);
                    dp += (a + b) * (a + b);
                }
                r * 2.0 * dm.sqrt().atan2(dp.sqrt())
            }
            Chart::Hyperbolic { .. } => {
                let d2 = crate::linalg::dist_sq(x, y);
                let denom = (1.0 - dot(x, x)) * (1.0 - dot(y, y));
                let a = 2.0 * d2 / denom;
                // acosh(1 + a) without cancellation
                (a + (a * (a + 2.0)).sqrt()).ln_1p() / self.sqrt_abs_k()
            }
        }
    }

    /// Removes the normal component of `v` at `base` (sphere only).
    pub fn project_tangent(&self, base: &[f64], v: &[f64]) -> TangentVec {
        match self {
            Chart::Sphere { .. } => {
                let nb = dot(base, base);
                let mut out = v.to_vec();
                axpy(&mut out, -dot(base, v) / nb, base);
                TangentVec(out)
            }
            _ => TangentVec(v.to_vec()),
        }
    }

    /// Exponential map. Total on all three charts.
    pub fn exp(&self, base: &[f64], v: &[f64]) -> Result<Point> {
        self.check(base)?;
        if v.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: v.len(),
            });
        }
        Ok(self.exp_unchecked(base, v))
    }

    pub(crate) fn exp_unchecked(&self, base: &[f64], v: &[f64]) -> Point {
        match *self {
            Chart::Euclidean { .. } => Point(crate::linalg::add(base, v)),
            Chart::Sphere { .. } => {
                let r = self.sphere_radius();
                let v = self.project_tangent(base, v);
                let nv = v.norm();
                if nv == 0.0 {
                    return Point(base.to_vec());
                }
                let theta = nv / r;
                let mut p = scale(base, theta.cos());
                axpy(&mut p, r * theta.sin() / nv, &v);
                let s = r / norm(&p);
                p.iter_mut().for_each(|x| *x *= s);
                Point(p)
            }
            Chart::Hyperbolic { .. } => {
                let nv = norm(v);
                if nv == 0.0 {
                    return Point(base.to_vec());
                }
                let t = (0.5 * self.sqrt_abs_k() * nv).tanh();
                let step = scale(v, t / nv);
                let mut p = mobius_add(base, &step);
                let np = norm(&p);
                if np >= 1.0 {
                    // tanh saturated; pull back inside the ball
                    let s = (1.0 - f64::EPSILON) / np;
                    p.iter_mut().for_each(|x| *x *= s);
                }
                Point(p)
            }
        }
    }

    /// Inverse exponential map. Refuses points within `cut_guard` of the cut
    /// locus.
    pub fn log(&self, base: &[f64], y: &[f64]) -> Result<TangentVec> {
        self.check(base)?;
        self.check(y)?;
        self.log_unchecked(base, y)
    }

    pub(crate) fn log_unchecked(&self, base: &[f64], y: &[f64]) -> Result<TangentVec> {
        let d = self.dist_unchecked(base, y);
        let inj = self.injectivity_radius();
        if d >= inj - Tolerances::default().cut_guard {
            return Err(Error::CutLocus {
                distance: d,
                radius: inj,
            });
        }
        if d == 0.0 {
            return Ok(TangentVec::zeros(self.ambient_dim()));
        }
        let dir = match *self {
            Chart::Euclidean { .. } => sub(y, base),
            Chart::Sphere { .. } => {
                let diff = sub(y, base);
                let nb = dot(base, base);
                let mut w = diff.clone();
                axpy(&mut w, -dot(&diff, base) / nb, base);
                w
            }
            Chart::Hyperbolic { .. } => {
                let neg: Vec<f64> = base.iter().map(|x| -x).collect();
                mobius_add(&neg, y)
            }
        };
        let nd = norm(&dir);
        if nd == 0.0 {
            return Err(Error::CutLocus {
                distance: d,
                radius: inj,
            });
        }
        Ok(TangentVec(scale(&dir, d / nd)))
    }

    /// `grad_z d(z, x) = -log_z(x) / d(z, x)`.
    pub fn grad_dist(&self, z: &[f64], x: &[f64]) -> Result<TangentVec> {
        self.check(z)?;
        self.check(x)?;
        let d = self.dist_unchecked(z, x);
        if d <= Tolerances::default().coincidence {
            return Err(Error::Diagonal);
        }
        let v = self.log_unchecked(z, x)?;
        Ok(v.scaled(-1.0 / d))
    }

    /// Coefficient `k(r)` in `Hess r = k(r) (g - dr (x) dr)`.
    pub fn hess_dist_coefficient(&self, r: f64) -> f64 {
        match *self {
            Chart::Euclidean { .. } => 1.0 / r,
            Chart::Sphere { curvature, .. } => {
                let s = curvature.sqrt();
                s / (s * r).tan()
            }
            Chart::Hyperbolic { curvature, .. } => {
                let s = (-curvature).sqrt();
                s / (s * r).tanh()
            }
        }
    }

    /// Riemannian Hessian of `z -> d(z, x)`.
    pub fn hess_dist(&self, z: &[f64], x: &[f64]) -> Result<HessianForm> {
        let g = self.grad_dist(z, x)?;
        let r = self.dist_unchecked(z, x);
        let frame = self.tangent_basis(z);
        let mut h = HessianForm::scaled_metric(frame, self.hess_dist_coefficient(r));
        let u = h.to_frame(&g);
        let k = self.hess_dist_coefficient(r);
        for (a, row) in h.matrix.iter_mut().enumerate() {
            for (b, m) in row.iter_mut().enumerate() {
                *m -= k * u[a] * u[b];
            }
        }
        Ok(h)
    }

    /// An orthonormal basis of `T_z M` in tangent-vector components.
    pub fn tangent_basis(&self, z: &[f64]) -> Vec<Vec<f64>> {
        let n = self.ambient_dim();
        let unit = |k: usize| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            e
        };
        match self {
            Chart::Sphere { .. } => {
                let nz = norm(z);
                let normal = scale(z, 1.0 / nz);
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| normal[a].abs().total_cmp(&normal[b].abs()));
                let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
                for k in order {
                    if basis.len() == n - 1 {
                        break;
                    }
                    let mut e = unit(k);
                    let c = dot(&e, &normal);
                    axpy(&mut e, -c, &normal);
                    for b in &basis {
                        let c = dot(&e, b);
                        axpy(&mut e, -c, b);
                    }
                    let ne = norm(&e);
                    if ne > 1e-6 {
                        basis.push(scale(&e, 1.0 / ne));
                    }
                }
                basis
            }
            _ => (0..n).map(unit).collect(),
        }
    }

    /// Volume of a metric ball of radius `r` (intrinsic dimension 1 or 2).
    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        match self.dim() {
            1 => Ok(2.0 * r),
            2 => Ok(self.disk_area(r)),
            d => Err(Error::Unsupported(format!("ball volume in dimension {d}"))),
        }
    }

    pub(crate) fn disk_area(&self, r: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Chart::Euclidean { .. } => PI * r * r,
            Chart::Sphere { curvature, .. } => 2.0 * PI * (1.0 - (curvature.sqrt() * r).cos()) / curvature,
            Chart::Hyperbolic { curvature, .. } => {
                let c = -curvature;
                2.0 * PI * ((c.sqrt() * r).cosh() - 1.0) / c
            }
        }
    }

    /// Inverse of [`Chart::disk_area`].
    pub(crate) fn disk_radius_for_area(&self, a: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Chart::Euclidean { .. } => (a / PI).sqrt(),
            Chart::Sphere { curvature, .. } => {
                let c = (1.0 - a * curvature / (2.0 * PI)).clamp(-1.0, 1.0);
                c.acos() / curvature.sqrt()
            }
            Chart::Hyperbolic { curvature, .. } => {
                let c = -curvature;
                (1.0 + a * c / (2.0 * PI)).acosh() / c.sqrt()
            }
        }
    }
}

/// Möbius addition in the unit ball.
fn mobius_add(x: &[f64], y: &[f64]) -> Vec<f64> {
    let xy = dot(x, y);
    let xx = dot(x, x);
    let yy = dot(y, y);
    let a = 1.0 + 2.0 * xy + yy;
    let b = 1.0 - xx;
    let den = 1.0 + 2.0 * xy + xx * yy;
    x.iter().zip(y).map(|(xi, yi)| (a * xi + b * yi) / den).collect()
}
