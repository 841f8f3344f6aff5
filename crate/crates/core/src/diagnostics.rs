//! Absolute-continuity diagnostics: quantization of uniform densities,
//! bounded-Lipschitz distances, the `E_{eps,delta}` membership estimate,
//! the consistency and absolute-continuity experiments, and the annulus
//! decomposition of unbounded supports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::CostProfile;
use crate::error::{Error, Result};
use crate::geometry::{uniform_cell_volumes, Ball, CellPartition, Chart, Point};
use crate::invmap::{lipschitz_probe, AnchorSlice, ProbeRegime};
use crate::linalg::norm;
use crate::transport::{solve_mmot_with, solve_ot2, DiscreteMeasure, MmotOptions, MmotSolution};

/// A marginal to be discretized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// Normalized volume measure on a metric ball.
    UniformBall { center: Vec<f64>, radius: f64 },
    /// An explicit atomic measure, returned unchanged at every level.
    Atoms { points: Vec<Vec<f64>>, weights: Vec<f64> },
}

impl MeasureSpec {
    pub fn is_absolutely_continuous(&self) -> bool {
        matches!(self, MeasureSpec::UniformBall { .. })
    }

    /// Number of atoms produced at level `j`.
    pub fn atoms_at(&self, j: usize) -> usize {
        match self {
            MeasureSpec::UniformBall { .. } => 1 << (2 * j),
            MeasureSpec::Atoms { points, .. } => points.len(),
        }
    }

    /// Largest density with respect to volume, `None` for atomic specs.
    pub fn max_density(&self, chart: &Chart) -> Result<Option<f64>> {
        match self {
            MeasureSpec::UniformBall { radius, .. } => Ok(Some(1.0 / chart.ball_volume(*radius)?)),
            MeasureSpec::Atoms { .. } => Ok(None),
        }
    }

    pub fn ball(&self) -> Option<Ball> {
        match self {
            MeasureSpec::UniformBall { center, radius } => Some(Ball::new(center.clone(), *radius)),
            MeasureSpec::Atoms { .. } => None,
        }
    }
}

/// `4^j`-atom equal-mass quantization: `4^j` segments of an interval, or
/// `2^j` equal-area rings by `2^j` sectors of a disk or cap; one atom at
/// each cell's center.
pub fn discretize(chart: &Chart, spec: &MeasureSpec, j: usize) -> Result<DiscreteMeasure> {
    match spec {
        MeasureSpec::Atoms { points, weights } => DiscreteMeasure::new(
            *chart,
            points.iter().map(|p| chart.point(p.clone())).collect::<Result<_>>()?,
            weights.clone(),
        ),
        MeasureSpec::UniformBall { center, radius } => {
            if j == 0 {
                return Err(Error::ResolutionTooCoarse("level 0".into()));
            }
            let resolution = match chart.dim() {
                1 => 1 << (2 * j),
                2 => 1 << j,
                d => return Err(Error::Unsupported(format!("discretization in dimension {d}"))),
            };
            let region = Ball::new(chart.point(center.clone())?, *radius);
            let cells = uniform_cell_volumes(chart, &region, resolution)?;
            let n = cells.len();
            DiscreteMeasure::new(
                *chart,
                (0..n).map(|k| cells.cell_center(k)).collect(),
                vec![1.0 / n as f64; n],
            )
        }
    }
}

/// Fixed dictionary of 1-Lipschitz test functions
/// `f_k(x) = clamp(d(x, p_k) - c_k, -1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlDictionary {
    chart: Chart,
    anchors: Vec<Point>,
    offsets: Vec<f64>,
}

impl BlDictionary {
    /// `size` functions with anchors drawn in a ball 1.5 times `region`.
    pub fn new(chart: &Chart, region: &Ball, size: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wide = Ball::new(
            region.center.clone(),
            (1.5 * region.radius).min(0.95 * chart.injectivity_radius()),
        );
        let mut anchors = Vec::with_capacity(size);
        let mut offsets = Vec::with_capacity(size);
        for _ in 0..size {
            anchors.push(wide.sample_uniform(chart, &mut rng)?);
            offsets.push(rng.random_range(0.0..=2.0 * wide.radius));
        }
        Ok(BlDictionary {
            chart: *chart,
            anchors,
            offsets,
        })
    }

    /// Dictionary over a ball covering every atom of `measures`.
    pub fn covering(measures: &[&DiscreteMeasure], size: usize, seed: u64) -> Result<Self> {
        let chart = measures[0].chart;
        let all: Vec<&Point> = measures.iter().flat_map(|m| m.points.iter()).collect();
        let ws: Vec<f64> = measures.iter().flat_map(|m| m.weights.iter().copied()).collect();
        let region = covering_ball(&chart, &all, &ws)?;
        Self::new(&chart, &region, size, seed)
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    fn integrate(&self, k: usize, m: &DiscreteMeasure) -> f64 {
        m.points
            .iter()
            .zip(&m.weights)
            .map(|(p, w)| w * (self.chart.dist_unchecked(p, &self.anchors[k]) - self.offsets[k]).clamp(-1.0, 1.0))
            .sum()
    }

    /// `max_k |int f_k dmu - int f_k dnu|`, a lower bound on the BL distance.
    pub fn distance(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        (0..self.len())
            .map(|k| (self.integrate(k, mu) - self.integrate(k, nu)).abs())
            .fold(0.0, f64::max)
    }
}

/// Smallest ball about the weighted coordinate mean (projected onto the
/// chart) containing every point.
pub fn covering_ball(chart: &Chart, points: &[&Point], weights: &[f64]) -> Result<Ball> {
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut mean = vec![0.0; chart.ambient_dim()];
    let total: f64 = weights.iter().sum();
    for (p, w) in points.iter().zip(weights) {
        crate::linalg::axpy(&mut mean, w / total, p);
    }
    let center = match chart {
        Chart::Sphere { .. } if norm(&mean) < 1e-9 => points[0].clone(),
        _ => chart.point(mean)?,
    };
    let r = points
        .iter()
        .map(|p| chart.dist_unchecked(&center, p))
        .fold(0.0, f64::max);
    Ok(Ball::new(center, r * (1.0 + 1e-9) + 1e-12))
}

/// Cell masses of a measure over an equal-volume partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledDensity {
    pub cells: CellPartition,
    pub masses: Vec<f64>,
    /// Mass of atoms outside the partitioned region.
    pub outside: f64,
}

impl SampledDensity {
    pub fn new(cells: CellPartition, measure: &DiscreteMeasure) -> Self {
        let (masses, outside) = cells.bin_masses(&measure.points, &measure.weights);
        SampledDensity { cells, masses, outside }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EClassVerdict {
    pub pass: bool,
    pub epsilon: f64,
    pub delta: f64,
    /// Mass captured by the densest cells of total volume `delta`.
    pub accumulated_mass: f64,
    /// The densest cell.
    pub worst_cell: usize,
    pub worst_cell_mass: f64,
    pub cells: usize,
    pub max_cell_volume: f64,
    pub outside_mass: f64,
}

/// Greedy `E_{eps,delta}` check: fill volume `delta` with the densest
/// cells (the last one fractionally) and compare the captured mass to `eps`.
pub fn e_class_estimate_on(density: &SampledDensity, epsilon: f64, delta: f64) -> Result<EClassVerdict> {
    let vols = density.cells.volumes();
    let max_vol = density.cells.max_volume();
    if max_vol >= delta {
        return Err(Error::ResolutionTooCoarse(format!(
            "cell volume {max_vol:e} is not below delta = {delta:e}"
        )));
    }
    let mut order: Vec<usize> = (0..vols.len()).collect();
    order.sort_by(|&a, &b| {
        (density.masses[b] / vols[b])
            .total_cmp(&(density.masses[a] / vols[a]))
            .then(a.cmp(&b))
    });
    let mut vol = 0.0;
    let mut mass = 0.0;
    for &k in &order {
        if vol + vols[k] <= delta {
            vol += vols[k];
            mass += density.masses[k];
        } else {
            mass += density.masses[k] * (delta - vol) / vols[k];
            break;
        }
    }
    let worst = order[0];
    Ok(EClassVerdict {
        pass: mass <= epsilon * (1.0 + 1e-12),
        epsilon,
        delta,
        accumulated_mass: mass,
        worst_cell: worst,
        worst_cell_mass: density.masses[worst],
        cells: vols.len(),
        max_cell_volume: max_vol,
        outside_mass: density.outside,
    })
}

/// [`e_class_estimate_on`] with the coarsest dyadic partition of `region`
/// whose cells are smaller than `delta`. Dyadic resolutions nest with the
/// quantization of [`discretize`].
pub fn e_class_estimate(measure: &DiscreteMeasure, region: &Ball, epsilon: f64, delta: f64) -> Result<EClassVerdict> {
    let chart = measure.chart;
    let vol = region.volume(&chart)?;
    let cells_per_dim = |n: usize| match chart.dim() {
        1 => n,
        _ => n * n,
    };
    if chart.dim() > 2 {
        return Err(Error::Unsupported(format!(
            "E-class estimate in dimension {}",
            chart.dim()
        )));
    }
    let mut resolution = 2;
    while vol / cells_per_dim(resolution) as f64 >= delta {
        resolution *= 2;
    }
    let cells = uniform_cell_volumes(&chart, region, resolution)?;
    e_class_estimate_on(&SampledDensity::new(cells, measure), epsilon, delta)
}

/// One level of an approximation ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel {
    pub level: usize,
    pub marginals: Vec<DiscreteMeasure>,
    pub barycenter: DiscreteMeasure,
    #[serde(skip)]
    pub solution: Option<MmotSolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationLadder {
    /// Level at which the first marginal is held.
    pub first_marginal_level: usize,
    pub levels: Vec<LadderLevel>,
}

/// One CSV row of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub level: usize,
    pub bl_distance: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub verdict: Option<String>,
}

pub fn write_rows_csv<W: std::io::Write>(rows: &[LadderRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub mmot: MmotOptions,
    pub bl_dictionary_size: usize,
    pub bl_seed: u64,
    pub probe_pairs: usize,
    pub probe_alpha: f64,
    pub probe_slices: usize,
    pub probe_seed: u64,
    /// Exponents `k` of the `eps = 2^-k` ladder.
    pub epsilon_exponents: Vec<i32>,
    /// Factor applied to the calibrated `delta`.
    pub delta_safety: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            mmot: MmotOptions::default(),
            bl_dictionary_size: 200,
            bl_seed: 0,
            probe_pairs: 400,
            probe_alpha: 0.01,
            probe_slices: 8,
            probe_seed: 0,
            epsilon_exponents: vec![1, 2, 3, 4],
            delta_safety: 0.5,
        }
    }
}

/// Largest level at which the first marginal can be held while every level
/// up to `top` stays within the tuple limit.
pub fn first_marginal_level(specs: &[MeasureSpec], top: usize, limit: usize) -> Result<usize> {
    let others: usize = specs[1..]
        .iter()
        .try_fold(1usize, |acc, s| acc.checked_mul(s.atoms_at(top)))
        .unwrap_or(usize::MAX);
    if !specs[0].is_absolutely_continuous() {
        return if specs[0].atoms_at(0).saturating_mul(others) <= limit {
            Ok(top)
        } else {
            Err(Error::SizeLimit {
                tuples: specs[0].atoms_at(0).saturating_mul(others),
                limit,
            })
        };
    }
    (1..=top)
        .rev()
        .find(|&l| specs[0].atoms_at(l).saturating_mul(others) <= limit)
        .ok_or(Error::SizeLimit {
            tuples: specs[0].atoms_at(1).saturating_mul(others),
            limit,
        })
}

/// Solves the MMOT barycenter at every level, holding the first marginal
/// at its fixed level and laddering the others.
pub fn build_ladder(
    chart: &Chart,
    specs: &[MeasureSpec],
    weights: &[f64],
    profile: &CostProfile,
    levels: &[usize],
    opts: &ExperimentOptions,
) -> Result<ApproximationLadder> {
    if specs.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} marginal specs but {} weights",
            specs.len(),
            weights.len()
        )));
    }
    let top = levels.iter().copied().max().ok_or(Error::EmptySet)?;
    let l1 = first_marginal_level(specs, top, opts.mmot.size_limit)?;
    let mu1 = discretize(chart, &specs[0], l1)?;
    let mut out = Vec::with_capacity(levels.len());
    for &j in levels {
        let mut marginals = vec![mu1.clone()];
        for s in &specs[1..] {
            marginals.push(discretize(chart, s, j)?);
        }
        let solution = solve_mmot_with(&marginals, weights, profile, &opts.mmot)?;
        out.push(LadderLevel {
            level: j,
            marginals,
            barycenter: solution.barycenter_measure()?,
            solution: Some(solution),
        });
    }
    Ok(ApproximationLadder {
        first_marginal_level: l1,
        levels: out,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub ladder: ApproximationLadder,
    /// `BL(mu_P^j, mu_P^J)` per level, in ladder order.
    pub bl_to_finest: Vec<f64>,
    /// `BL(mu_P^J, reference)` when a reference is supplied.
    pub bl_finest_to_reference: Option<f64>,
    /// `d_{j+1} <= slack * d_j` for every consecutive pair.
    pub monotone_within_slack: bool,
    pub rows: Vec<LadderRow>,
}

/// Self-convergence of discrete barycenters as the marginals refine.
pub fn consistency_experiment(
    chart: &Chart,
    specs: &[MeasureSpec],
    weights: &[f64],
    profile: &CostProfile,
    levels: &[usize],
    reference: Option<&DiscreteMeasure>,
    opts: &ExperimentOptions,
) -> Result<ConsistencyReport> {
    let ladder = build_ladder(chart, specs, weights, profile, levels, opts)?;
    let finest = &ladder.levels.last().ok_or(Error::EmptySet)?.barycenter;
    let mut cover: Vec<&DiscreteMeasure> = ladder.levels.iter().map(|l| &l.barycenter).collect();
    if let Some(r) = reference {
        cover.push(r);
    }
    let dict = BlDictionary::covering(&cover, opts.bl_dictionary_size, opts.bl_seed)?;
    let bl_to_finest: Vec<f64> = ladder
        .levels
        .iter()
        .map(|l| dict.distance(&l.barycenter, finest))
        .collect();
    let monotone_within_slack = bl_to_finest.windows(2).all(|w| w[1] <= 1.2 * w[0] + 1e-12);
    let bl_finest_to_reference = reference.map(|r| dict.distance(finest, r));
    let rows = ladder
        .levels
        .iter()
        .zip(&bl_to_finest)
        .map(|(l, d)| LadderRow {
            level: l.level,
            bl_distance: Some(*d),
            epsilon: None,
            delta: None,
            verdict: None,
        })
        .collect();
    Ok(ConsistencyReport {
        ladder,
        bl_to_finest,
        bl_finest_to_reference,
        monotone_within_slack,
        rows,
    })
}

/// Which hypothesis of the absolute-continuity theorem an experiment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuityCase {
    /// `h` is C^2 at the origin; only the first marginal is diffuse.
    SmoothCost,
    /// Every marginal is diffuse; `h` may be singular at the origin.
    DiffuseMarginals,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbsContinuityReport {
    pub case: ContinuityCase,
    pub first_marginal_level: usize,
    /// Empirical Lipschitz constant of the inverse map.
    pub probe_constant: f64,
    pub region: Ball,
    /// Verdicts per level, then per `eps` in the ladder.
    pub verdicts: Vec<(usize, Vec<EClassVerdict>)>,
    /// The finest level re-checked at `(eps, delta/2)`.
    pub closure: Vec<EClassVerdict>,
    /// A Dirac mass at the region's center, checked at `eps = 1/2`.
    pub dirac_control: Vec<EClassVerdict>,
    /// Plan mass on tuples whose barycenter is within `alpha` of a
    /// marginal point, per level.
    pub collision_mass: Vec<f64>,
    pub rows: Vec<LadderRow>,
}

impl AbsContinuityReport {
    pub fn finest_pass(&self) -> bool {
        self.verdicts.last().is_some_and(|(_, v)| v.iter().all(|e| e.pass))
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|(_, v)| v.iter().all(|e| e.pass))
    }
}

/// Runs the MMOT ladder and checks `E_{eps,delta}` membership of the
/// discrete barycenters with `delta` calibrated from the probe constant.
pub fn abs_continuity_experiment(
    case: ContinuityCase,
    chart: &Chart,
    specs: &[MeasureSpec],
    weights: &[f64],
    profile: &CostProfile,
    levels: &[usize],
    opts: &ExperimentOptions,
) -> Result<AbsContinuityReport> {
    if !specs[0].is_absolutely_continuous() {
        return Err(Error::InvalidInput("the first marginal must be a density".into()));
    }
    match case {
        ContinuityCase::SmoothCost if !profile.origin_class().is_c2() => {
            return Err(Error::InvalidInput("this case needs a cost that is C^2 at 0".into()))
        }
        ContinuityCase::DiffuseMarginals if !specs.iter().all(|s| s.is_absolutely_continuous()) => {
            return Err(Error::InvalidInput(
                "this case needs every marginal to be a density".into(),
            ))
        }
        _ => {}
    }
    let ladder = build_ladder(chart, specs, weights, profile, levels, opts)?;
    let finest = ladder.levels.last().ok_or(Error::EmptySet)?;

    let mut rho: f64 = 0.0;
    for s in specs {
        if let Some(d) = s.max_density(chart)? {
            if case == ContinuityCase::DiffuseMarginals || rho == 0.0 {
                rho = rho.max(d);
            }
        }
    }
    let probe_constant = probe_inverse_map(chart, profile, weights, finest, opts)?;
    let scale = probe_constant.max(1.0).powi(chart.dim() as i32);
    let deltas: Vec<(f64, f64)> = opts
        .epsilon_exponents
        .iter()
        .map(|&k| {
            let eps = 2f64.powi(-k);
            (eps, opts.delta_safety * eps / rho / scale)
        })
        .collect();

    let all: Vec<&Point> = ladder.levels.iter().flat_map(|l| l.barycenter.points.iter()).collect();
    let ws: Vec<f64> = ladder
        .levels
        .iter()
        .flat_map(|l| l.barycenter.weights.iter().copied())
        .collect();
    let region = covering_ball(chart, &all, &ws)?;

    let mut verdicts = Vec::new();
    let mut rows = Vec::new();
    let mut collision_mass = Vec::new();
    for l in &ladder.levels {
        let mut vs = Vec::new();
        for &(eps, delta) in &deltas {
            let v = e_class_estimate(&l.barycenter, &region, eps, delta)?;
            rows.push(LadderRow {
                level: l.level,
                bl_distance: None,
                epsilon: Some(eps),
                delta: Some(delta),
                verdict: Some(if v.pass { "PASS" } else { "FAIL" }.into()),
            });
            vs.push(v);
        }
        verdicts.push((l.level, vs));
        if let Some(sol) = &l.solution {
            collision_mass.push(exclusion_witness(sol, opts.probe_alpha));
        }
    }
    let closure = deltas
        .iter()
        .map(|&(eps, delta)| e_class_estimate(&finest.barycenter, &region, eps, delta / 2.0))
        .collect::<Result<_>>()?;
    let dirac = DiscreteMeasure::dirac(*chart, region.center.clone())?;
    let dirac_control = deltas
        .iter()
        .map(|&(_, delta)| e_class_estimate(&dirac, &region, 0.5, delta))
        .collect::<Result<_>>()?;
    Ok(AbsContinuityReport {
        case,
        first_marginal_level: ladder.first_marginal_level,
        probe_constant,
        region,
        verdicts,
        closure,
        dirac_control,
        collision_mass,
        rows,
    })
}

/// Largest Lipschitz ratio of `F` over slices taken from evenly spaced
/// support tuples of the finest plan, each probed near its barycenter.
fn probe_inverse_map(
    chart: &Chart,
    profile: &CostProfile,
    weights: &[f64],
    level: &LadderLevel,
    opts: &ExperimentOptions,
) -> Result<f64> {
    let sol = level.solution.as_ref().ok_or(Error::EmptySet)?;
    let support = &sol.plan.support;
    let all: Vec<&Point> = level.barycenter.points.iter().collect();
    let cover = covering_ball(chart, &all, &level.barycenter.weights)?;
    let radius = (cover.radius / 4.0).max(1e-3);
    let slices = opts.probe_slices.max(1).min(support.len());
    let mut best: Option<f64> = None;
    for s in 0..slices {
        let k = s * support.len() / slices;
        let anchors: Vec<Point> = support[k]
            .idx
            .iter()
            .zip(&sol.plan.marginals)
            .skip(1)
            .map(|(&a, m)| m.points[a].clone())
            .collect();
        let slice = AnchorSlice::new(*chart, profile.clone(), anchors, weights.to_vec())?;
        let region = Ball::new(sol.barycenters[k].z.clone(), radius);
        match lipschitz_probe(
            &slice,
            &region,
            opts.probe_alpha,
            opts.probe_pairs,
            ProbeRegime::FirstMarginalOnly,
            opts.probe_seed.wrapping_add(s as u64),
        ) {
            Ok(r) => best = Some(best.map_or(r.constant, |b: f64| b.max(r.constant))),
            Err(Error::RegionConstraint(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| Error::RegionConstraint("no slice admitted a probe".into()))
}

/// Plan mass carried by tuples whose barycenter lies within `alpha` of one
/// of the tuple's points.
pub fn exclusion_witness(solution: &MmotSolution, alpha: f64) -> f64 {
    let plan = &solution.plan;
    let chart = plan.marginals[0].chart;
    plan.support
        .iter()
        .zip(&solution.barycenters)
        .filter(|(a, b)| {
            a.idx
                .iter()
                .zip(&plan.marginals)
                .any(|(&i, m)| chart.dist_unchecked(&b.z, &m.points[i]) < alpha)
        })
        .map(|(a, _)| a.mass)
        .fold(0.0, |acc, m| acc + m)
}

/// `2 sum_i max_x mu_i(B(x, alpha))`, the scale the collision mass is
/// compared against.
pub fn collision_mass_bound(solution: &MmotSolution, alpha: f64) -> f64 {
    let plan = &solution.plan;
    let chart = plan.marginals[0].chart;
    2.0 * plan
        .marginals
        .iter()
        .map(|m| {
            m.points
                .iter()
                .map(|c| {
                    m.points
                        .iter()
                        .zip(&m.weights)
                        .filter(|(p, _)| chart.dist_unchecked(c, p) < alpha)
                        .map(|(_, w)| w)
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardReport {
    /// `|mu_P(atom) - sum of masses of the tuples mapped to it|`, maximized.
    pub max_mass_mismatch: f64,
    /// Per marginal: cost of `(B, p_i)#gamma` minus the optimal cost between
    /// the barycenter measure and `mu_i`.
    pub plan_cost_gaps: Vec<f64>,
}

/// Checks `mu_P = B#gamma` and optimality of the induced plans
/// `(B, p_i)#gamma`.
pub fn pushforward_check(solution: &MmotSolution, profile: &CostProfile) -> Result<PushforwardReport> {
    let plan = &solution.plan;
    let chart = plan.marginals[0].chart;
    let bary = solution.barycenter_measure()?;
    let tol = crate::tolerances::Tolerances::default().coincidence;
    let mut mapped = vec![0.0; bary.len()];
    for (a, b) in plan.support.iter().zip(&solution.barycenters) {
        let k = bary
            .points
            .iter()
            .position(|p| chart.dist_unchecked(p, &b.z) <= tol)
            .ok_or(Error::EmptySet)?;
        mapped[k] += a.mass;
    }
    let max_mass_mismatch = mapped
        .iter()
        .zip(&bary.weights)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut plan_cost_gaps = Vec::with_capacity(plan.marginals.len());
    for (i, m) in plan.marginals.iter().enumerate() {
        let induced: f64 = plan
            .support
            .iter()
            .zip(&solution.barycenters)
            .map(|(a, b)| a.mass * profile.eval(chart.dist_unchecked(&b.z, &m.points[a.idx[i]])))
            .sum();
        let (opt, _) = solve_ot2(&bary, m, profile)?;
        plan_cost_gaps.push(induced - opt.total_cost);
    }
    Ok(PushforwardReport {
        max_mass_mismatch,
        plan_cost_gaps,
    })
}

/// A restriction of a measure to `inner <= d(center, x) < outer`,
/// renormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusPiece {
    pub inner: f64,
    #[serde(with = "crate::serde_inf")]
    pub outer: f64,
    /// Mass of the piece before renormalization.
    pub mass: f64,
    pub measure: DiscreteMeasure,
}

/// [`annulus_decompose_with`] with unit-width nominal annuli.
pub fn annulus_decompose(measure: &DiscreteMeasure, center: &[f64], radii_budget: usize) -> Result<Vec<AnnulusPiece>> {
    annulus_decompose_with(measure, center, 1.0, radii_budget)
}

/// Splits a measure into annuli about `center`. Nominal boundaries sit at
/// `k * width` for `k = 1..=radii_budget`; each is moved to the one of 64
/// candidate radii in `[(k - 1/2) width, (k + 1/2) width]` farthest from
/// every atom, so no boundary carries mass. Empty annuli are skipped.
pub fn annulus_decompose_with(
    measure: &DiscreteMeasure,
    center: &[f64],
    width: f64,
    radii_budget: usize,
) -> Result<Vec<AnnulusPiece>> {
    let chart = measure.chart;
    chart.check(center)?;
    if !(width > 0.0) {
        return Err(Error::InvalidInput(format!("annulus width {width}")));
    }
    let radii: Vec<f64> = measure.points.iter().map(|p| chart.dist_unchecked(center, p)).collect();
    let mut bounds = vec![0.0];
    for k in 1..=radii_budget {
        let lo = (k as f64 - 0.5) * width;
        let best = (0..64)
            .map(|j| lo + width * j as f64 / 63.0)
            .filter(|&c| c > *bounds.last().expect("non-empty"))
            .map(|c| {
                let gap = radii.iter().map(|r| (r - c).abs()).fold(f64::INFINITY, f64::min);
                (c, gap)
            })
            .filter(|(_, gap)| *gap > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)));
        if let Some((c, _)) = best {
            bounds.push(c);
        }
    }
    bounds.push(f64::INFINITY);
    let mut pieces = Vec::new();
    for w in bounds.windows(2) {
        let (inner, outer) = (w[0], w[1]);
        let members: Vec<usize> = (0..radii.len())
            .filter(|&i| radii[i] >= inner && radii[i] < outer)
            .collect();
        if members.is_empty() {
            continue;
        }
        let mass: f64 = members.iter().map(|&i| measure.weights[i]).sum();
        pieces.push(AnnulusPiece {
            inner,
            outer,
            mass,
            measure: DiscreteMeasure::new(
                chart,
                members.iter().map(|&i| measure.points[i].clone()).collect(),
                members.iter().map(|&i| measure.weights[i]).collect(),
            )?,
        });
    }
    Ok(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::power_profile;

    fn unit_interval() -> MeasureSpec {
        MeasureSpec::UniformBall {
            center: vec![0.5],
            radius: 0.5,
        }
    }

    #[test]
    fn discretize_interval_level_one() {
        let m = discretize(&Chart::euclidean(1), &unit_interval(), 1).unwrap();
        let xs: Vec<f64> = m.points.iter().map(|p| p[0]).collect();
        for (x, e) in xs.iter().zip([0.125, 0.375, 0.625, 0.875]) {
            assert!((x - e).abs() < 1e-15);
        }
        assert!(m.weights.iter().all(|w| (w - 0.25).abs() < 1e-15));
    }

    #[test]
    fn atoms_are_unchanged() {
        let spec = MeasureSpec::Atoms {
            points: vec![vec![0.0], vec![2.0]],
            weights: vec![0.25, 0.75],
        };
        for j in 1..4 {
            let m = discretize(&Chart::euclidean(1), &spec, j).unwrap();
            assert_eq!(m.weights, vec![0.25, 0.75]);
        }
    }

    #[test]
    fn e_class_examples() {
        let e = Chart::euclidean(1);
        let region = Ball::new(vec![0.5], 0.5);
        let fine = discretize(&e, &unit_interval(), 5).unwrap();
        let v = e_class_estimate(&fine, &region, 0.1, 0.1).unwrap();
        assert!(v.pass && (v.accumulated_mass - 0.1).abs() < 1e-9, "{v:?}");
        let dirac = DiscreteMeasure::dirac(e, Point(vec![0.5])).unwrap();
        for delta in [0.3, 0.01, 1e-4] {
            assert!(!e_class_estimate(&dirac, &region, 0.5, delta).unwrap().pass);
        }
    }

    #[test]
    fn coarse_partitions_are_refused() {
        let e = Chart::euclidean(1);
        let cells = uniform_cell_volumes(&e, &Ball::new(vec![0.5], 0.5), 4).unwrap();
        let m = discretize(&e, &unit_interval(), 2).unwrap();
        assert!(matches!(
            e_class_estimate_on(&SampledDensity::new(cells, &m), 0.1, 0.1),
            Err(Error::ResolutionTooCoarse(_))
        ));
    }

    #[test]
    fn bl_distance_shrinks_with_level() {
        let s = Chart::sphere(2, 1.0);
        let spec = MeasureSpec::UniformBall {
            center: vec![0.0, 0.0, 1.0],
            radius: 0.6,
        };
        let m1 = discretize(&s, &spec, 1).unwrap();
        let m3 = discretize(&s, &spec, 3).unwrap();
        let m5 = discretize(&s, &spec, 5).unwrap();
        assert_eq!(m3.len(), 64);
        let dict = BlDictionary::covering(&[&m5], 200, 7).unwrap();
        assert!(dict.distance(&m3, &m5) < dict.distance(&m1, &m5));
        assert_eq!(dict.distance(&m5, &m5), 0.0);
    }

    #[test]
    fn annuli_examples() {
        let e = Chart::euclidean(2);
        let compact =
            DiscreteMeasure::new(e, vec![Point(vec![0.1, 0.0]), Point(vec![0.0, 0.3])], vec![0.5, 0.5]).unwrap();
        let pieces = annulus_decompose(&compact, &[0.0, 0.0], 12).unwrap();
        assert_eq!(pieces.len(), 1);
        assert_eq!(pieces[0].measure, compact);

        let clusters = DiscreteMeasure::new(
            e,
            vec![
                Point(vec![0.0, 0.1]),
                Point(vec![0.1, 0.0]),
                Point(vec![10.0, 0.0]),
                Point(vec![10.0, 0.2]),
                Point(vec![9.9, 0.0]),
            ],
            vec![0.2, 0.2, 0.2, 0.2, 0.2],
        )
        .unwrap();
        let pieces = annulus_decompose(&clusters, &[0.0, 0.0], 20).unwrap();
        assert_eq!(pieces.len(), 2);
        assert!((pieces[0].mass - 0.4).abs() < 1e-15);
        assert!((pieces[1].mass - 0.6).abs() < 1e-15);
        let total: f64 = pieces.iter().map(|p| p.mass).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn atomic_consistency_is_constant() {
        let e = Chart::euclidean(1);
        let specs = vec![
            MeasureSpec::Atoms {
                points: vec![vec![0.0], vec![1.0]],
                weights: vec![0.5, 0.5],
            },
            MeasureSpec::Atoms {
                points: vec![vec![3.0]],
                weights: vec![1.0],
            },
        ];
        let h = power_profile(2.0).unwrap();
        let r = consistency_experiment(
            &e,
            &specs,
            &[0.5, 0.5],
            &h,
            &[1, 2, 3],
            None,
            &ExperimentOptions::default(),
        )
        .unwrap();
        assert!(r.bl_to_finest.iter().all(|d| *d == 0.0));
    }
}
