//! The inverse transport map `F_v` that recovers the first configuration
//! point from a barycenter `z` and the frozen anchors `v = (x_2, ..., x_n)`,
//! together with the second-order calculus of `z -> h(d(z, x))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barycenter::{cost_gradient, validate_weights};
use crate::cost::{CostProfile, OriginClass};
use crate::error::{Error, Result};
use crate::geometry::{Ball, Chart, HessianForm, Point, TangentVec};
use crate::linalg::{axpy, scale};
use crate::tolerances::Tolerances;

/// Anchors `x_2..x_n` with the full weight vector `l_1..l_n`.
#[derive(Debug, Clone)]
pub struct AnchorSlice {
    pub chart: Chart,
    pub profile: CostProfile,
    pub anchors: Vec<Point>,
    pub weights: Vec<f64>,
}

impl AnchorSlice {
    pub fn new(chart: Chart, profile: CostProfile, anchors: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        validate_weights(&weights)?;
        if anchors.len() + 1 != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} anchors need {} weights, got {}",
                anchors.len(),
                anchors.len() + 1,
                weights.len()
            )));
        }
        for a in &anchors {
            chart.check(a)?;
        }
        Ok(AnchorSlice {
            chart,
            profile,
            anchors,
            weights,
        })
    }

    /// `V(z) = -(1/l_1) sum_{i>=2} l_i grad_z h(d(z, x_i))`; anchors at `z`
    /// contribute nothing.
    pub fn field(&self, z: &[f64]) -> Result<TangentVec> {
        self.chart.check(z)?;
        let mut v = vec![0.0; self.chart.ambient_dim()];
        for (x, l) in self.anchors.iter().zip(&self.weights[1..]) {
            if let Some(g) = cost_gradient(&self.chart, &self.profile, z, x)? {
                axpy(&mut v, -l / self.weights[0], &g);
            }
        }
        Ok(TangentVec(v))
    }

    /// `F(z) = exp_z(-(h')^{-1}(|V|) V/|V|)`, and `F(z) = z` when `V = 0`.
    pub fn inverse_map(&self, z: &[f64]) -> Result<Point> {
        let v = self.field(z)?;
        let n = v.norm();
        if n == 0.0 {
            return Ok(Point(z.to_vec()));
        }
        let t = self.profile.inv_deriv(n)?;
        Ok(self.chart.exp_unchecked(z, &scale(&v, -t / n)))
    }

    /// The scalar field whose gradient is [`AnchorSlice::field`].
    pub fn potential(&self, z: &[f64]) -> f64 {
        -self
            .anchors
            .iter()
            .zip(&self.weights[1..])
            .map(|(x, l)| l * self.profile.eval(self.chart.dist_unchecked(z, x)))
            .sum::<f64>()
            / self.weights[0]
    }
}

/// Free-function form of [`AnchorSlice::field`].
pub fn anchor_field_v(slice: &AnchorSlice, z: &[f64]) -> Result<TangentVec> {
    slice.field(z)
}

/// Free-function form of [`AnchorSlice::inverse_map`].
pub fn inverse_map_f(slice: &AnchorSlice, z: &[f64]) -> Result<Point> {
    slice.inverse_map(z)
}

/// Riemannian Hessian of `z -> h(d(z, x))`:
/// `h''(r) dr (x) dr + h'(r) Hess r`, and `h''(0) g` at a collision when the
/// profile is C^2 at the origin.
pub fn hess_cost(profile: &CostProfile, chart: &Chart, z: &[f64], x: &[f64]) -> Result<HessianForm> {
    let r = chart.dist_unchecked(z, x);
    if r <= Tolerances::default().coincidence {
        return match profile.origin_class() {
            OriginClass::C2AtZero(v) => Ok(HessianForm::scaled_metric(chart.tangent_basis(z), v)),
            _ => Err(Error::Diagonal),
        };
    }
    let g = chart.grad_dist(z, x)?;
    let frame = chart.tangent_basis(z);
    let tangential = profile.deriv(r) * chart.hess_dist_coefficient(r);
    let radial = profile.second_deriv(r);
    let mut h = HessianForm::scaled_metric(frame, tangential);
    let u = h.to_frame(&g);
    for (a, row) in h.matrix.iter_mut().enumerate() {
        for (b, m) in row.iter_mut().enumerate() {
            *m += (radial - tangential) * u[a] * u[b];
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionLimitReport {
    pub radii: Vec<f64>,
    /// `max_u |Hess h(d(., x)) - h''(0) g|` at each radius.
    pub deviations: Vec<f64>,
    /// Least-squares slope of `log deviation` against `log r` (NaN if any
    /// deviation is zero).
    pub loglog_slope: f64,
    /// `max deviation / r`.
    pub constant: f64,
    /// Deviations are non-decreasing in `r`.
    pub monotone: bool,
}

/// Measures how fast the cost Hessian approaches `h''(0) g` at a collision.
pub fn hessian_collision_limit_check(
    profile: &CostProfile,
    chart: &Chart,
    x: &[f64],
    radii: &[f64],
    directions: usize,
    seed: u64,
) -> Result<CollisionLimitReport> {
    let h0 = match profile.origin_class() {
        OriginClass::C2AtZero(v) => v,
        o => {
            return Err(Error::InvalidInput(format!(
                "collision limit needs a profile that is C^2 at 0, got {o:?}"
            )))
        }
    };
    deviation_report(profile, chart, x, radii, directions, seed, h0)
}

/// Growth of `|Hess h(d(., x))|` as `r -> 0`; for `h = t^p/p` with
/// `p < 2` the log-log slope is `p - 2`.
pub fn hessian_blowup_check(
    profile: &CostProfile,
    chart: &Chart,
    x: &[f64],
    radii: &[f64],
    directions: usize,
    seed: u64,
) -> Result<CollisionLimitReport> {
    deviation_report(profile, chart, x, radii, directions, seed, 0.0)
}

fn deviation_report(
    profile: &CostProfile,
    chart: &Chart,
    x: &[f64],
    radii: &[f64],
    directions: usize,
    seed: u64,
    h0: f64,
) -> Result<CollisionLimitReport> {
    chart.check(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = chart.tangent_basis(x);
    let mut deviations = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut worst: f64 = 0.0;
        for _ in 0..directions.max(1) {
            let u = random_unit(&frame, &mut rng);
            let z = chart.exp_unchecked(x, &scale(&u, r));
            let mut h = hess_cost(profile, chart, &z, x)?;
            let id = HessianForm::scaled_metric(h.frame.clone(), h0);
            h.add_scaled(-1.0, &id);
            worst = worst.max(h.op_norm());
        }
        deviations.push(worst);
    }
    let loglog_slope = if deviations.iter().all(|d| *d > 0.0) {
        fit_slope(radii, &deviations)
    } else {
        f64::NAN
    };
    let constant = radii.iter().zip(&deviations).map(|(r, d)| d / r).fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|a, b| radii[*a].total_cmp(&radii[*b]));
    let monotone = order
        .windows(2)
        .all(|w| deviations[w[0]] <= deviations[w[1]] * (1.0 + 1e-9) + 1e-300);
    Ok(CollisionLimitReport {
        radii: radii.to_vec(),
        deviations,
        loglog_slope,
        constant,
        monotone,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub(crate) fn random_unit<R: Rng + ?Sized>(frame: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
    loop {
        let c: Vec<f64> = frame.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = crate::linalg::norm(&c);
        if n > 1e-3 && n <= 1.0 {
            let mut v = vec![0.0; frame[0].len()];
            for (e, ci) in frame.iter().zip(&c) {
                axpy(&mut v, ci / n, e);
            }
            return v;
        }
    }
}

/// Which collision-avoiding region the probe samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeRegime {
    /// `d(z, x_i) > alpha` for every point of the configuration.
    CollisionFree,
    /// Only the first point is kept away (`|V(z)| >= h'(alpha)`); anchors may
    /// collide with `z`.
    FirstMarginalOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub alpha: f64,
    pub regime: ProbeRegime,
    /// Largest observed `d(F(z), F(z')) / d(z, z')`.
    pub constant: f64,
    pub n_pairs: usize,
    pub seed: u64,
}

/// Empirical Lipschitz constant of `F` over pairs sampled in `region`.
/// Pair separations are log-uniform in `[1e-4, diam(region)]`.
pub fn lipschitz_probe(
    slice: &AnchorSlice,
    region: &Ball,
    alpha: f64,
    n_pairs: usize,
    regime: ProbeRegime,
    seed: u64,
) -> Result<ProbeReport> {
    let chart = &slice.chart;
    chart.check(&region.center)?;
    if regime == ProbeRegime::CollisionFree {
        for a in &slice.anchors {
            let gap = chart.dist_unchecked(&region.center, a) - region.radius;
            if gap <= alpha {
                return Err(Error::RegionConstraint(format!(
                    "anchor {a:?} is within {alpha} of the region"
                )));
            }
        }
    }
    let floor = slice.profile.deriv(alpha);
    let admissible = |z: &[f64]| -> Option<Point> {
        let v = slice.field(z).ok()?;
        if v.norm() < floor {
            return None;
        }
        slice.inverse_map(z).ok()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diam = 2.0 * region.radius;
    let (lo, hi) = (1e-4f64.min(diam).ln(), diam.ln());
    let mut constant: f64 = 0.0;
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < n_pairs && attempts < 50 * n_pairs.max(1) {
        attempts += 1;
        let z = region.sample_uniform(chart, &mut rng)?;
        let frame = chart.tangent_basis(&z);
        let u = random_unit(&frame, &mut rng);
        let s = rng.random_range(lo..=hi).exp();
        let z2 = chart.exp_unchecked(&z, &scale(&u, s));
        if !region.contains(chart, &z2) {
            continue;
        }
        let (Some(f1), Some(f2)) = (admissible(&z), admissible(&z2)) else {
            continue;
        };
        let dz = chart.dist_unchecked(&z, &z2);
        if dz == 0.0 {
            continue;
        }
        constant = constant.max(chart.dist_unchecked(&f1, &f2) / dz);
        accepted += 1;
    }
    if accepted == 0 {
        return Err(Error::RegionConstraint(
            "no sampled pair satisfies the alpha constraint".into(),
        ));
    }
    Ok(ProbeReport {
        alpha,
        regime,
        constant,
        n_pairs: accepted,
        seed,
    })
}
