//! Exact discrete transport: two-marginal and multi-marginal linear
//! programs, Kantorovich potentials and c-transforms, Monge-map extraction
//! and the support certificates (cyclical monotonicity, injectivity of
//! barycenter configurations).

mod simplex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barycenter::{
    cost_gradient, validate_weights, BarycenterSolution, BarycenterSolver, Configuration, SolverOptions,
};
use crate::cost::CostProfile;
use crate::error::{Error, Result};
use crate::geometry::{Chart, Point};
use crate::linalg::{dot, scale};
use crate::tolerances::Tolerances;

/// Finitely supported probability measure on a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub chart: Chart,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Validates the points and normalizes the weights. Support points must
    /// be pairwise distinct.
    pub fn new(chart: Chart, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let m = Self::new_unchecked_distinct(chart, points, weights)?;
        let tol = Tolerances::default().coincidence;
        for i in 0..m.points.len() {
            for j in 0..i {
                if chart.dist_unchecked(&m.points[i], &m.points[j]) <= tol {
                    return Err(Error::InvalidInput(format!("support points {j} and {i} coincide")));
                }
            }
        }
        Ok(m)
    }

    /// Like [`DiscreteMeasure::new`] but merges coincident support points.
    pub fn merged(chart: Chart, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let m = Self::new_unchecked_distinct(chart, points, weights)?;
        let tol = Tolerances::default().coincidence;
        let mut pts: Vec<Point> = Vec::new();
        let mut ws: Vec<f64> = Vec::new();
        for (p, w) in m.points.into_iter().zip(m.weights) {
            match pts.iter().position(|q| chart.dist_unchecked(q, &p) <= tol) {
                Some(k) => ws[k] += w,
                None => {
                    pts.push(p);
                    ws.push(w);
                }
            }
        }
        Ok(DiscreteMeasure {
            chart,
            points: pts,
            weights: ws,
        })
    }

    fn new_unchecked_distinct(chart: Chart, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        chart.validate()?;
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput("measure weights must be positive".into()));
        }
        for p in &points {
            chart.check(p)?;
        }
        let s: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / s).collect();
        Ok(DiscreteMeasure { chart, points, weights })
    }

    pub fn dirac(chart: Chart, p: Point) -> Result<Self> {
        Self::new(chart, vec![p], vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One atom of a transport plan: an index tuple and its mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanAtom {
    pub idx: Vec<usize>,
    pub mass: f64,
}

/// A joint table with prescribed marginals, stored by its support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPlan {
    pub support: Vec<PlanAtom>,
    pub total_cost: f64,
    /// Per-marginal LP dual potentials.
    pub duals: Vec<Vec<f64>>,
    /// Smallest reduced cost over nonbasic tuples; positive means the plan is
    /// the unique optimum.
    #[serde(with = "crate::serde_inf")]
    pub min_nonbasic_reduced_cost: f64,
    #[serde(skip)]
    pub marginals: Vec<DiscreteMeasure>,
}

impl MultiPlan {
    /// Marginal `i` of the table as a weight vector over `marginals[i]`.
    pub fn marginal(&self, i: usize, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for a in &self.support {
            out[a.idx[i]] += a.mass;
        }
        out
    }

    /// Largest deviation between the table's marginals and the inputs.
    pub fn marginal_error(&self) -> f64 {
        self.marginals
            .iter()
            .enumerate()
            .flat_map(|(i, m)| {
                self.marginal(i, m.len())
                    .into_iter()
                    .zip(m.weights.clone())
                    .map(|(a, b)| (a - b).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Atoms whose `i`-th index equals `a`.
    pub fn row(&self, i: usize, a: usize) -> Vec<&PlanAtom> {
        self.support.iter().filter(|t| t.idx[i] == a).collect()
    }

    pub fn is_unique(&self) -> bool {
        self.min_nonbasic_reduced_cost > 1e-9
    }
}

/// Kantorovich potentials: `psi` on the source support, `xi` on the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub psi: Vec<f64>,
    pub xi: Vec<f64>,
}

/// `c(x, y) = h(d(x, y))`.
pub fn pair_cost(chart: &Chart, profile: &CostProfile, x: &[f64], y: &[f64]) -> f64 {
    profile.eval(chart.dist_unchecked(x, y))
}

fn same_chart(measures: &[&DiscreteMeasure]) -> Result<Chart> {
    let chart = measures[0].chart;
    for m in measures {
        if m.chart != chart {
            return Err(Error::InvalidInput(format!("chart mismatch: {} vs {}", chart, m.chart)));
        }
    }
    Ok(chart)
}

const MAX_PIVOTS: usize = 500_000;

/// Exact optimal plan between two discrete measures for `c = h(d)`, with
/// the LP duals as potentials.
pub fn solve_ot2(mu: &DiscreteMeasure, nu: &DiscreteMeasure, profile: &CostProfile) -> Result<(MultiPlan, Potential)> {
    let chart = same_chart(&[mu, nu])?;
    let cost: Vec<f64> = mu
        .points
        .iter()
        .flat_map(|x| nu.points.iter().map(move |y| pair_cost(&chart, profile, x, y)))
        .collect();
    let plan = plan_from_costs(&[mu.clone(), nu.clone()], &cost)?;
    let potential = Potential {
        psi: plan.duals[0].clone(),
        xi: plan.duals[1].clone(),
    };
    Ok((plan, potential))
}

/// Solves the marginal LP for an explicit cost table indexed in row-major
/// tuple order.
pub fn plan_from_costs(measures: &[DiscreteMeasure], cost: &[f64]) -> Result<MultiPlan> {
    let sizes: Vec<usize> = measures.iter().map(|m| m.len()).collect();
    let index = simplex::TupleIndex::new(&sizes);
    if cost.len() != index.len() {
        return Err(Error::DimensionMismatch {
            expected: index.len(),
            got: cost.len(),
        });
    }
    let masses: Vec<Vec<f64>> = measures.iter().map(|m| m.weights.clone()).collect();
    let lp = simplex::solve(&sizes, &masses, cost, Tolerances::default().reduced_cost, MAX_PIVOTS)?;
    Ok(MultiPlan {
        support: lp
            .support
            .iter()
            .map(|&(t, mass)| PlanAtom {
                idx: index.decode(t),
                mass,
            })
            .collect(),
        total_cost: lp.objective,
        duals: lp.duals,
        min_nonbasic_reduced_cost: lp.min_nonbasic_reduced_cost,
        marginals: measures.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmotOptions {
    pub solver: SolverOptions,
    /// Largest admissible number of index tuples.
    pub size_limit: usize,
}

impl Default for MmotOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            size_limit: 100_000,
        }
    }
}

/// Optimal multi-marginal plan together with the barycenter of each
/// support tuple (aligned with `plan.support`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmotSolution {
    pub plan: MultiPlan,
    pub barycenters: Vec<BarycenterSolution>,
}

impl MmotSolution {
    /// The barycenter measure `B#gamma`, merging coincident atoms.
    pub fn barycenter_measure(&self) -> Result<DiscreteMeasure> {
        let chart = self.plan.marginals[0].chart;
        DiscreteMeasure::merged(
            chart,
            self.barycenters.iter().map(|b| b.z.clone()).collect(),
            self.plan.support.iter().map(|a| a.mass).collect(),
        )
    }

    pub fn configuration(&self, k: usize, weights: &[f64]) -> Configuration {
        tuple_configuration(&self.plan.marginals, &self.plan.support[k].idx, weights)
    }
}

fn tuple_configuration(measures: &[DiscreteMeasure], idx: &[usize], weights: &[f64]) -> Configuration {
    Configuration {
        points: idx.iter().zip(measures).map(|(&a, m)| m.points[a].clone()).collect(),
        weights: weights.to_vec(),
    }
}

/// Exact multi-marginal transport for the barycenter cost
/// `C(x_1, ..., x_n) = min_y sum_i l_i h(d(y, x_i))`.
pub fn solve_mmot(measures: &[DiscreteMeasure], weights: &[f64], profile: &CostProfile) -> Result<MmotSolution> {
    solve_mmot_with(measures, weights, profile, &MmotOptions::default())
}

pub fn solve_mmot_with(
    measures: &[DiscreteMeasure],
    weights: &[f64],
    profile: &CostProfile,
    opts: &MmotOptions,
) -> Result<MmotSolution> {
    validate_weights(weights)?;
    if measures.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} marginals but {} weights",
            measures.len(),
            weights.len()
        )));
    }
    if !profile.is_admissible() && !opts.solver.allow_counterexample {
        return Err(Error::ProfileViolatesAssumptions);
    }
    let chart = same_chart(&measures.iter().collect::<Vec<_>>())?;
    let tuples = measures
        .iter()
        .try_fold(1usize, |acc, m| acc.checked_mul(m.len()))
        .unwrap_or(usize::MAX);
    if tuples > opts.size_limit {
        return Err(Error::SizeLimit {
            tuples,
            limit: opts.size_limit,
        });
    }
    let sizes: Vec<usize> = measures.iter().map(|m| m.len()).collect();
    let index = simplex::TupleIndex::new(&sizes);
    let solver = BarycenterSolver::with_options(chart, profile, opts.solver);
    let solutions: Vec<BarycenterSolution> = (0..tuples)
        .into_par_iter()
        .map(|t| solver.solve(&tuple_configuration(measures, &index.decode(t), weights)))
        .collect::<Result<_>>()?;
    let cost: Vec<f64> = solutions.iter().map(|s| s.value).collect();
    let plan = plan_from_costs(measures, &cost)?;
    let barycenters = plan
        .support
        .iter()
        .map(|a| solutions[index.encode(&a.idx)].clone())
        .collect();
    Ok(MmotSolution { plan, barycenters })
}

/// Cost of an arbitrary index tuple, solving its barycenter on demand.
pub fn tuple_cost(
    measures: &[DiscreteMeasure],
    weights: &[f64],
    profile: &CostProfile,
    opts: &SolverOptions,
    idx: &[usize],
) -> Result<f64> {
    let chart = measures[0].chart;
    BarycenterSolver::with_options(chart, profile, *opts).barycenter_cost(&tuple_configuration(measures, idx, weights))
}

/// `psi(x) = min_y { c(x, y) - xi(y) }` over the finite set `ys`.
pub fn c_transform(chart: &Chart, profile: &CostProfile, xi: &[f64], ys: &[Point], xs: &[Point]) -> Result<Vec<f64>> {
    Ok(c_transform_active(chart, profile, xi, ys, xs, 0.0)?
        .into_iter()
        .map(|(v, _)| v)
        .collect())
}

/// c-transform values with the set of competitors attaining the infimum
/// within `gap`.
pub fn c_transform_active(
    chart: &Chart,
    profile: &CostProfile,
    xi: &[f64],
    ys: &[Point],
    xs: &[Point],
    gap: f64,
) -> Result<Vec<(f64, Vec<usize>)>> {
    if ys.is_empty() {
        return Err(Error::EmptySet);
    }
    if xi.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: ys.len(),
            got: xi.len(),
        });
    }
    Ok(xs
        .iter()
        .map(|x| {
            let vals: Vec<f64> = ys
                .iter()
                .zip(xi)
                .map(|(y, v)| pair_cost(chart, profile, x, y) - v)
                .collect();
            let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let active = (0..vals.len()).filter(|&k| vals[k] <= best + gap).collect();
            (best, active)
        })
        .collect())
}

/// Lipschitz bound `h'(R)` for c-transforms between `xs` and `ys`, with `R`
/// the largest pairwise distance in `xs` and `ys` combined.
pub fn potential_lipschitz_bound(chart: &Chart, profile: &CostProfile, xs: &[Point], ys: &[Point]) -> f64 {
    let all: Vec<&Point> = xs.iter().chain(ys).collect();
    let mut r: f64 = 0.0;
    for i in 0..all.len() {
        for j in 0..i {
            r = r.max(chart.dist_unchecked(all[i], all[j]));
        }
    }
    profile.deriv(r)
}

/// Result of extracting `T(x)` from a potential at one source atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum MongeOutcome {
    Mapped {
        point: Point,
        /// The competitor used for the gradient of `psi`.
        active: usize,
        /// Other competitors within the tie gap (resolved by the plan).
        ties: Vec<usize>,
    },
    /// The plan splits the atom's mass over several targets.
    AmbiguousRow { partners: Vec<usize> },
    /// Several competitors are active and none is singled out by the plan.
    NonDifferentiable { competitors: Vec<usize> },
}

/// `T(x) = exp_x(-(h')^{-1}(|grad psi|) grad psi / |grad psi|)` at source
/// atom `a`, with `grad psi` taken from `c(., y*)` at the active competitor
/// `y*` of the c-transform of `xi`.
pub fn monge_map_from_potential(
    plan: &MultiPlan,
    potential: &Potential,
    a: usize,
    profile: &CostProfile,
) -> Result<MongeOutcome> {
    let (mu, nu) = match plan.marginals.as_slice() {
        [mu, nu] => (mu, nu),
        _ => return Err(Error::InvalidInput("Monge extraction needs a two-marginal plan".into())),
    };
    let chart = mu.chart;
    let x = &mu.points[a];
    let partners: Vec<usize> = plan.row(0, a).iter().map(|t| t.idx[1]).collect();
    if partners.len() > 1 {
        return Ok(MongeOutcome::AmbiguousRow { partners });
    }
    let gap = Tolerances::default().active_set;
    let (_, active) = c_transform_active(&chart, profile, &potential.xi, &nu.points, std::slice::from_ref(x), gap)?
        .pop()
        .expect("one source point");
    let chosen = match active.as_slice() {
        [only] => *only,
        _ => match partners.first() {
            Some(p) if active.contains(p) => *p,
            _ => return Ok(MongeOutcome::NonDifferentiable { competitors: active }),
        },
    };
    let ties: Vec<usize> = active.iter().copied().filter(|&k| k != chosen).collect();
    let point = match cost_gradient(&chart, profile, x, &nu.points[chosen])? {
        None => x.clone(),
        Some(v) => {
            let n = v.norm();
            let t = profile.inv_deriv(n)?;
            chart.exp_unchecked(x, &scale(&v, -t / n))
        }
    };
    Ok(MongeOutcome::Mapped {
        point,
        active: chosen,
        ties,
    })
}

/// Largest mass-weighted gain from exchanging one coordinate between two
/// support tuples: `min(m, m~) [C(x) + C(x~) - C(swapped) - C(swapped~)]`.
/// Optimal plans give a value `<= 0` up to round-off.
pub fn check_cyclical_monotonicity(
    plan: &MultiPlan,
    cost_fn: &(dyn Fn(&[usize]) -> Result<f64> + Sync),
) -> Result<f64> {
    const MAX_SUPPORT: usize = 1000;
    let s = &plan.support;
    if s.len() > MAX_SUPPORT {
        return Err(Error::SizeLimit {
            tuples: s.len(),
            limit: MAX_SUPPORT,
        });
    }
    let n = s.first().map_or(0, |a| a.idx.len());
    let base: Vec<f64> = s.iter().map(|a| cost_fn(&a.idx)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for p in 0..s.len() {
        for q in 0..p {
            for i in 0..n {
                if s[p].idx[i] == s[q].idx[i] {
                    continue;
                }
                let mut u = s[p].idx.clone();
                let mut v = s[q].idx.clone();
                std::mem::swap(&mut u[i], &mut v[i]);
                let gain = base[p] + base[q] - cost_fn(&u)? - cost_fn(&v)?;
                worst = worst.max(s[p].mass.min(s[q].mass) * gain);
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    /// Pairs of support tuples whose barycenters lie within the threshold.
    pub close_pairs: usize,
    /// Largest `max_i d(x_i, x~_i)` over those pairs.
    pub max_config_gap: f64,
}

/// Barycenter configurations are determined by their barycenter: tuples
/// with `d(z, z~) <= injectivity_bary` must agree within
/// `injectivity_config`.
pub fn check_injectivity(solution: &MmotSolution, tol: &Tolerances) -> Result<InjectivityReport> {
    let plan = &solution.plan;
    let chart = plan.marginals[0].chart;
    let mut report = InjectivityReport {
        close_pairs: 0,
        max_config_gap: 0.0,
    };
    for p in 0..plan.support.len() {
        for q in 0..p {
            let zp = &solution.barycenters[p].z;
            let zq = &solution.barycenters[q].z;
            if chart.dist_unchecked(zp, zq) > tol.injectivity_bary {
                continue;
            }
            report.close_pairs += 1;
            let gap = plan.support[p]
                .idx
                .iter()
                .zip(&plan.support[q].idx)
                .zip(&plan.marginals)
                .map(|((&a, &b), m)| chart.dist_unchecked(&m.points[a], &m.points[b]))
                .fold(0.0, f64::max);
            if gap > tol.injectivity_config {
                return Err(Error::InjectivityViolation {
                    first: plan.support[q].idx.clone(),
                    second: plan.support[p].idx.clone(),
                    distance: gap,
                });
            }
            report.max_config_gap = report.max_config_gap.max(gap);
        }
    }
    Ok(report)
}

/// Remainder of the cost super-gradient inequality along `exp_x(t u)`:
/// `c(exp_x(tu), y) - c(x, y) - t <v, u>` with `v = grad_x c(x, y)`.
pub fn supergradient_remainder(
    chart: &Chart,
    profile: &CostProfile,
    x: &[f64],
    y: &[f64],
    u: &[f64],
    t: f64,
) -> Result<f64> {
    let v = cost_gradient(chart, profile, x, y)?.ok_or(Error::Diagonal)?;
    let moved = chart.exp_unchecked(x, &scale(u, t));
    Ok(pair_cost(chart, profile, &moved, y) - pair_cost(chart, profile, x, y) - t * dot(&v, u))
}

/// Duality gap `cost - sum psi dmu - sum xi dnu` of a two-marginal solve.
pub fn duality_gap(plan: &MultiPlan, potential: &Potential) -> f64 {
    let dual: f64 = dot(&potential.psi, &plan.marginals[0].weights) + dot(&potential.xi, &plan.marginals[1].weights);
    plan.total_cost - dual
}

/// Largest `|psi(x) + xi(y) - c(x, y)|` over the plan's support and largest
/// violation of `psi + xi <= c` over all pairs.
pub fn dual_slacks(plan: &MultiPlan, potential: &Potential, profile: &CostProfile) -> (f64, f64) {
    let (mu, nu) = (&plan.marginals[0], &plan.marginals[1]);
    let chart = mu.chart;
    let support = plan
        .support
        .iter()
        .map(|a| {
            let (i, j) = (a.idx[0], a.idx[1]);
            (potential.psi[i] + potential.xi[j] - pair_cost(&chart, profile, &mu.points[i], &nu.points[j])).abs()
        })
        .fold(0.0, f64::max);
    let mut feas: f64 = 0.0;
    for (i, x) in mu.points.iter().enumerate() {
        for (j, y) in nu.points.iter().enumerate() {
            feas = feas.max(potential.psi[i] + potential.xi[j] - pair_cost(&chart, profile, x, y));
        }
    }
    (support, feas)
}
