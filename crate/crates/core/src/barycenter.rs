//! h-barycenters of finite configurations: the objective
//! `Phi(y) = sum_i l_i h(d(y, x_i))`, its global minimization, the
//! multi-marginal cost `C(x) = min_y Phi(y)` and the first-order residual.

use serde::{Deserialize, Serialize};

use crate::cost::{CostProfile, OriginClass};
use crate::error::{Error, Result};
use crate::geometry::{Chart, HessianForm, Point, TangentVec};
use crate::invmap::hess_cost;
use crate::linalg::{axpy, lex_cmp, norm};
use crate::tolerances::Tolerances;

/// Points `x_1..x_n` with positive weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl Configuration {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        validate_weights(&weights)?;
        if points.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        Ok(Configuration { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n >= 2` strictly positive weights summing to one.
pub fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.len() < 2 {
        return Err(Error::InvalidInput("need at least two weights".into()));
    }
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidInput(format!("weights must be positive: {weights:?}")));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > Tolerances::default().weight_sum {
        return Err(Error::InvalidInput(format!("weights sum to {s}, not 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycenterSolution {
    pub z: Point,
    /// `Phi(z)`.
    pub value: f64,
    /// `|sum_i l_i grad_z h(d(z, x_i))|` at `z`.
    pub grad_residual: f64,
    /// `inj - d(z, x_i)` per configuration point.
    #[serde(with = "crate::serde_inf::vec")]
    pub cut_margins: Vec<f64>,
    /// Other minimizers within the tie gap.
    pub alternates: Vec<Point>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tolerances: Tolerances,
    pub max_iter: usize,
    pub initial_step: f64,
    pub contraction: f64,
    pub armijo: f64,
    /// Displacement applied when an iterate sits on a singular collision.
    pub collision_nudge: f64,
    /// Permit profiles with `h'(0) != 0` (counterexample runs only).
    pub allow_counterexample: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            max_iter: 500,
            initial_step: 1.0,
            contraction: 0.5,
            armijo: 1e-4,
            collision_nudge: 1e-9,
            allow_counterexample: false,
        }
    }
}

/// `Phi(y) = sum_i l_i h(d(y, x_i))`.
pub fn objective_phi(chart: &Chart, profile: &CostProfile, config: &Configuration, y: &[f64]) -> Result<f64> {
    chart.check(y)?;
    for x in &config.points {
        chart.check(x)?;
    }
    Ok(phi_unchecked(chart, profile, config, y))
}

fn phi_unchecked(chart: &Chart, profile: &CostProfile, config: &Configuration, y: &[f64]) -> f64 {
    config
        .points
        .iter()
        .zip(&config.weights)
        .map(|(x, l)| l * profile.eval(chart.dist_unchecked(y, x)))
        .sum()
}

/// `grad_z h(d(z, x))`, or `None` when `z = x`.
pub fn cost_gradient(chart: &Chart, profile: &CostProfile, z: &[f64], x: &[f64]) -> Result<Option<TangentVec>> {
    let d = chart.dist_unchecked(z, x);
    if d <= Tolerances::default().coincidence {
        return Ok(None);
    }
    let v = chart.log_unchecked(z, x)?;
    Ok(Some(v.scaled(-profile.deriv(d) / d)))
}

/// Weighted gradient sum. Collision terms contribute zero for admissible
/// profiles; for a profile with `h'(0) > 0` the minimum-norm element of the
/// subdifferential is returned.
pub fn weighted_gradient(
    chart: &Chart,
    profile: &CostProfile,
    config: &Configuration,
    z: &[f64],
) -> Result<TangentVec> {
    let mut g = vec![0.0; chart.ambient_dim()];
    let mut ball = 0.0;
    for (x, l) in config.points.iter().zip(&config.weights) {
        match cost_gradient(chart, profile, z, x)? {
            Some(v) => axpy(&mut g, *l, &v),
            None => ball += l * profile.deriv(0.0),
        }
    }
    if ball > 0.0 {
        let n = norm(&g);
        let s = if n > ball { 1.0 - ball / n } else { 0.0 };
        g.iter_mut().for_each(|c| *c *= s);
    }
    Ok(TangentVec(g))
}

/// `|sum_i l_i grad_z h(d(z, x_i))|` with the collision convention of
/// [`weighted_gradient`].
pub fn first_order_residual(chart: &Chart, profile: &CostProfile, config: &Configuration, z: &[f64]) -> Result<f64> {
    chart.check(z)?;
    Ok(weighted_gradient(chart, profile, config, z)?.norm())
}

fn weighted_hessian(chart: &Chart, profile: &CostProfile, config: &Configuration, z: &[f64]) -> Result<HessianForm> {
    let mut total = HessianForm::zeros(chart.tangent_basis(z));
    for (x, l) in config.points.iter().zip(&config.weights) {
        let h = hess_cost(profile, chart, z, x)?;
        total.add_scaled(*l, &h);
    }
    Ok(total)
}

struct Descent {
    z: Point,
    value: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
}

/// Multi-start Riemannian descent for `min_y Phi(y)`.
#[derive(Debug, Clone)]
pub struct BarycenterSolver<'a> {
    chart: Chart,
    profile: &'a CostProfile,
    opts: SolverOptions,
}

impl<'a> BarycenterSolver<'a> {
    pub fn new(chart: Chart, profile: &'a CostProfile) -> Self {
        Self::with_options(chart, profile, SolverOptions::default())
    }

    pub fn with_options(chart: Chart, profile: &'a CostProfile, opts: SolverOptions) -> Self {
        BarycenterSolver { chart, profile, opts }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn profile(&self) -> &CostProfile {
        self.profile
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    fn residual_tol(&self) -> f64 {
        match self.chart {
            Chart::Sphere { .. } => self.opts.tolerances.grad_residual_sphere,
            _ => self.opts.tolerances.grad_residual,
        }
    }

    /// Global minimizer of `Phi` with residual, cut-locus margins and ties.
    pub fn solve(&self, config: &Configuration) -> Result<BarycenterSolution> {
        if !self.profile.is_admissible() && !self.opts.allow_counterexample {
            return Err(Error::ProfileViolatesAssumptions);
        }
        validate_weights(&config.weights)?;
        for x in &config.points {
            self.chart.check(x)?;
        }

        let mut seeds: Vec<Point> = config.points.clone();
        if let Some(g) = self.grid_argmin(config) {
            seeds.push(g);
        }
        let mut unique: Vec<Point> = Vec::with_capacity(seeds.len());
        for s in seeds {
            if !unique.iter().any(|u| self.chart.dist_unchecked(u, &s) <= 1e-12) {
                unique.push(s);
            }
        }

        let runs: Vec<Descent> = unique.into_iter().map(|s| self.descend(config, s)).collect();
        let best_value = runs.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
        let gap = self.opts.tolerances.tie_gap;
        let mut ties: Vec<&Descent> = runs.iter().filter(|r| r.value <= best_value + gap).collect();
        ties.sort_by(|a, b| b.converged.cmp(&a.converged).then_with(|| lex_cmp(&a.z, &b.z)));
        let chosen = ties[0];
        let mut alternates: Vec<Point> = Vec::new();
        for r in &ties[1..] {
            let far_from_chosen = self.chart.dist_unchecked(&r.z, &chosen.z) > 1e-7;
            let new = !alternates.iter().any(|a| self.chart.dist_unchecked(a, &r.z) <= 1e-7);
            if far_from_chosen && new {
                alternates.push(r.z.clone());
            }
        }

        let inj = self.chart.injectivity_radius();
        let solution = BarycenterSolution {
            z: chosen.z.clone(),
            value: chosen.value,
            grad_residual: chosen.residual,
            cut_margins: config
                .points
                .iter()
                .map(|x| inj - self.chart.dist_unchecked(&chosen.z, x))
                .collect(),
            alternates,
            iterations: chosen.iterations,
            converged: chosen.converged,
        };
        if solution.converged {
            Ok(solution)
        } else {
            Err(Error::NonConvergence {
                best: Box::new(solution),
            })
        }
    }

    /// `C(x) = min_y Phi(y)`.
    pub fn barycenter_cost(&self, config: &Configuration) -> Result<f64> {
        Ok(self.solve(config)?.value)
    }

    fn gradient(&self, config: &Configuration, z: &[f64]) -> Result<TangentVec> {
        weighted_gradient(&self.chart, self.profile, config, z)
    }

    fn singular_collision(&self, config: &Configuration, z: &[f64]) -> bool {
        !matches!(self.profile.origin_class(), OriginClass::C2AtZero(_))
            && config
                .points
                .iter()
                .any(|x| self.chart.dist_unchecked(z, x) <= self.opts.tolerances.coincidence)
    }

    fn newton_direction(&self, config: &Configuration, z: &[f64], g: &TangentVec) -> Option<Vec<f64>> {
        let h = weighted_hessian(&self.chart, self.profile, config, z).ok()?;
        let m = h.to_nalgebra();
        if m.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let chol = nalgebra::Cholesky::new(m)?;
        let rhs = nalgebra::DVector::from_vec(h.to_frame(g).iter().map(|c| -c).collect());
        let step = chol.solve(&rhs);
        let d = h.from_frame(step.as_slice());
        d.iter().all(|c| c.is_finite()).then_some(d)
    }

    fn descend(&self, config: &Configuration, start: Point) -> Descent {
        let tol = self.residual_tol();
        let phi = |y: &[f64]| phi_unchecked(&self.chart, self.profile, config, y);
        let mut z = start;
        let mut value = phi(&z);
        let mut residual = f64::INFINITY;
        let mut polish = 0;
        let mut it = 0;
        while it < self.opts.max_iter {
            it += 1;
            let g = match self.gradient(config, &z) {
                Ok(g) => g,
                Err(_) => break,
            };
            let res = g.norm();
            if res <= tol {
                if res == 0.0 || polish >= 3 || res >= 0.5 * residual {
                    residual = residual.min(res);
                    break;
                }
                polish += 1;
            }
            residual = res;
            if self.singular_collision(config, &z) {
                let e = self.chart.tangent_basis(&z).swap_remove(0);
                z = self
                    .chart
                    .exp_unchecked(&z, &crate::linalg::scale(&e, self.opts.collision_nudge));
                value = phi(&z);
                continue;
            }
            let newton = self.newton_direction(config, &z, &g);
            let mut accepted = None;
            for dir in newton.into_iter().chain(std::iter::once(g.scaled(-1.0).0)) {
                let slope = crate::linalg::dot(&g, &dir);
                if !(slope < 0.0) {
                    continue;
                }
                let mut t = self.opts.initial_step;
                for k in 0..60 {
                    let cand = self.chart.exp_unchecked(&z, &crate::linalg::scale(&dir, t));
                    let fc = phi(&cand);
                    if fc <= value + self.opts.armijo * t * slope {
                        accepted = Some((cand, fc));
                        break;
                    }
                    // at the round-off floor, accept a full step that still
                    // shrinks the gradient
                    if k == 0 && fc <= value + 4.0 * f64::EPSILON * value.abs().max(1e-300) {
                        if let Ok(gc) = self.gradient(config, &cand) {
                            if gc.norm() < res {
                                accepted = Some((cand, fc));
                                break;
                            }
                        }
                    }
                    t *= self.opts.contraction;
                }
                if accepted.is_some() {
                    break;
                }
            }
            match accepted {
                Some((cand, fc)) => {
                    z = cand;
                    value = fc;
                }
                None => break,
            }
        }
        if let Ok(g) = self.gradient(config, &z) {
            residual = g.norm();
        }
        Descent {
            value: phi(&z),
            converged: residual <= tol,
            z,
            residual,
            iterations: it,
        }
    }

    fn grid_argmin(&self, config: &Configuration) -> Option<Point> {
        let grid = coarse_grid(&self.chart, config);
        grid.into_iter()
            .map(|p| {
                let v = phi_unchecked(&self.chart, self.profile, config, &p);
                (p, v)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(p, _)| p)
    }
}

/// Candidate points covering the region where a minimizer can lie.
pub fn coarse_grid(chart: &Chart, config: &Configuration) -> Vec<Point> {
    match (chart, chart.dim()) {
        (Chart::Euclidean { .. }, d) if d <= 2 => {
            let n = chart.ambient_dim();
            let mut lo = vec![f64::INFINITY; n];
            let mut hi = vec![f64::NEG_INFINITY; n];
            for p in &config.points {
                for k in 0..n {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
            let steps = if d == 1 { 64 } else { 24 };
            let axis = |k: usize| -> Vec<f64> {
                (0..=steps)
                    .map(|i| lo[k] + (hi[k] - lo[k]) * i as f64 / steps as f64)
                    .collect()
            };
            if d == 1 {
                axis(0).into_iter().map(|x| Point(vec![x])).collect()
            } else {
                let (ax, ay) = (axis(0), axis(1));
                ax.iter()
                    .flat_map(|x| ay.iter().map(move |y| Point(vec![*x, *y])))
                    .collect()
            }
        }
        (Chart::Sphere { curvature, .. }, 1) => {
            let r = 1.0 / curvature.sqrt();
            (0..256)
                .map(|i| {
                    let a = i as f64 * std::f64::consts::TAU / 256.0;
                    Point(vec![r * a.cos(), r * a.sin()])
                })
                .collect()
        }
        (Chart::Sphere { curvature, .. }, 2) => fibonacci_sphere(400, 1.0 / curvature.sqrt()),
        (Chart::Hyperbolic { .. }, 1) => {
            let lo = config.points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = config.points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            (0..=64)
                .map(|i| Point(vec![lo + (hi - lo) * i as f64 / 64.0]))
                .collect()
        }
        (Chart::Hyperbolic { .. }, 2) => {
            let c = &config.points[0];
            let reach = config
                .points
                .iter()
                .map(|x| chart.dist_unchecked(c, x))
                .fold(0.0, f64::max);
            let frame = chart.tangent_basis(c);
            let mut out = vec![c.clone()];
            for ring in 1..=12 {
                let r = reach * ring as f64 / 12.0;
                for k in 0..24 {
                    let a = k as f64 * std::f64::consts::TAU / 24.0;
                    let mut v = vec![0.0; 2];
                    axpy(&mut v, r * a.cos(), &frame[0]);
                    axpy(&mut v, r * a.sin(), &frame[1]);
                    out.push(chart.exp_unchecked(c, &v));
                }
            }
            out
        }
        _ => {
            // higher dimensions: pairwise geodesic midpoints
            let mut out = Vec::new();
            for (i, a) in config.points.iter().enumerate() {
                for b in &config.points[i + 1..] {
                    if let Ok(v) = chart.log_unchecked(a, b) {
                        out.push(chart.exp_unchecked(a, &crate::linalg::scale(&v, 0.5)));
                    }
                }
            }
            out
        }
    }
}

/// `n` nearly uniform points on the 2-sphere of the given radius.
pub fn fibonacci_sphere(n: usize, radius: f64) -> Vec<Point> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let th = golden * i as f64;
            Point(vec![radius * r * th.cos(), radius * y, radius * r * th.sin()])
        })
        .collect()
}

/// Convenience wrapper around [`BarycenterSolver::solve`].
pub fn solve_barycenter(chart: &Chart, profile: &CostProfile, config: &Configuration) -> Result<BarycenterSolution> {
    BarycenterSolver::new(*chart, profile).solve(config)
}

/// Convenience wrapper around [`BarycenterSolver::barycenter_cost`].
pub fn barycenter_cost(chart: &Chart, profile: &CostProfile, config: &Configuration) -> Result<f64> {
    BarycenterSolver::new(*chart, profile).barycenter_cost(config)
}

/// Outcome of the shared-barycenter check for `h(t) = t^2 + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub weights: [f64; 2],
    /// The two configurations `(0, 1)` and `(0, 0.5)` on the real line.
    pub configs: [[f64; 2]; 2],
    /// Argmin of each objective over a 10^5-point grid of `[-2, 2]`.
    pub grid_argmins: [f64; 2],
    /// One-sided derivatives `[F'(0-), F'(0+)]` of each objective.
    pub subdifferentials: [[f64; 2]; 2],
    pub shared_point: f64,
    /// Barycenters of the same configurations under `h(t) = t^2/2`.
    pub quadratic_barycenters: [f64; 2],
    /// True when both objectives are minimized at the shared point.
    pub shared: bool,
}

/// Exhibits two distinct configurations with the same barycenter under a
/// profile with `h'(0) != 0`.
pub fn counterexample_shared_barycenter() -> Result<CounterexampleReport> {
    let h = crate::cost::counterexample_profile();
    let weights = [0.8, 0.2];
    let configs = [[0.0, 1.0], [0.0, 0.5]];
    let n = 100_000;
    let mut grid_argmins = [0.0; 2];
    let mut subdifferentials = [[0.0; 2]; 2];
    for (k, [a, b]) in configs.iter().enumerate() {
        let f = |y: f64| weights[0] * h.eval((y - a).abs()) + weights[1] * h.eval((b - y).abs());
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..n {
            let y = -2.0 + 4.0 * i as f64 / (n - 1) as f64;
            let v = f(y);
            if v < best.0 {
                best = (v, y);
            }
        }
        grid_argmins[k] = best.1;
        // one-sided derivatives at y = 0 (= a), where the first term kinks
        let far = -(weights[1] * h.deriv(*b));
        subdifferentials[k] = [far - weights[0] * h.deriv(0.0), far + weights[0] * h.deriv(0.0)];
    }
    let shared =
        subdifferentials.iter().all(|[lo, hi]| *lo <= 0.0 && 0.0 <= *hi) && grid_argmins.iter().all(|y| y.abs() < 1e-4);

    let quad = crate::cost::power_profile(2.0)?;
    let line = Chart::euclidean(1);
    let mut quadratic_barycenters = [0.0; 2];
    for (k, [a, b]) in configs.iter().enumerate() {
        let cfg = Configuration::new(vec![Point(vec![*a]), Point(vec![*b])], weights.to_vec())?;
        quadratic_barycenters[k] = solve_barycenter(&line, &quad, &cfg)?.z[0];
    }
    Ok(CounterexampleReport {
        weights,
        configs,
        grid_argmins,
        subdifferentials,
        shared_point: 0.0,
        quadratic_barycenters,
        shared,
    })
}
