//! Randomized verification suites behind `bary verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barycenter::{counterexample_shared_barycenter, BarycenterSolver, Configuration, SolverOptions};
use crate::cost::{counterexample_profile, power_profile, CostProfile};
use crate::error::{Error, Result};
use crate::geometry::{Ball, Chart, Point};
use crate::invmap::{
    hess_cost, hessian_blowup_check, hessian_collision_limit_check, lipschitz_probe, random_unit, AnchorSlice,
    ProbeRegime,
};
use crate::linalg::{dot, norm, scale, sub};
use crate::transport::{
    c_transform, check_cyclical_monotonicity, check_injectivity, dual_slacks, duality_gap, monge_map_from_potential,
    plan_from_costs, potential_lipschitz_bound, solve_mmot_with, solve_ot2, supergradient_remainder, tuple_cost,
    DiscreteMeasure, MmotOptions, MongeOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    All,
    Geometry,
    Transport,
    Invmap,
    Counterexample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

/// One row of the verification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check: String,
    pub instances: usize,
    pub max_violation: f64,
    pub verdict: Verdict,
}

impl CheckRow {
    fn new(check: &str, instances: usize, max_violation: f64, threshold: f64) -> Self {
        CheckRow {
            check: check.into(),
            instances,
            max_violation,
            verdict: if max_violation <= threshold {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        }
    }
}

/// Runs a suite; thresholds are multiplied by `tol_scale`.
pub fn run_suite(suite: Suite, seed: u64, tol_scale: f64) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let t = tol_scale;
    if matches!(suite, Suite::All | Suite::Geometry) {
        rows.extend(geometry(seed, t)?);
    }
    if matches!(suite, Suite::All | Suite::Transport) {
        rows.extend(transport(seed, t)?);
    }
    if matches!(suite, Suite::All | Suite::Invmap) {
        rows.extend(invmap(seed, t)?);
    }
    if matches!(suite, Suite::All | Suite::Counterexample) {
        rows.extend(counterexample(t)?);
    }
    Ok(rows)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// A random point: a cube in Euclidean space, the whole sphere, or the
/// hyperbolic ball of chart radius 0.8.
pub fn random_point<R: Rng + ?Sized>(chart: &Chart, rng: &mut R) -> Point {
    let d = chart.ambient_dim();
    match chart {
        Chart::Euclidean { .. } => Point((0..d).map(|_| rng.random_range(-2.0..2.0)).collect()),
        Chart::Sphere { curvature, .. } => loop {
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = norm(&v);
            if n > 0.1 && n <= 1.0 {
                return Point(scale(&v, 1.0 / (n * curvature.sqrt())));
            }
        },
        Chart::Hyperbolic { .. } => loop {
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            if norm(&v) <= 1.0 {
                return Point(scale(&v, 0.8));
            }
        },
    }
}

fn test_charts() -> [Chart; 4] {
    [
        Chart::euclidean(2),
        Chart::sphere(2, 1.0),
        Chart::sphere(2, 4.0),
        Chart::hyperbolic(2, -1.0),
    ]
}

/// Second derivatives of `f` along geodesics through `z`, in the frame,
/// by extrapolated central differences.
pub(crate) fn fd_hessian(
    f: &dyn Fn(&[f64]) -> f64,
    chart: &Chart,
    z: &[f64],
    frame: &[Vec<f64>],
    h: f64,
) -> Vec<Vec<f64>> {
    let central = |u: &[f64], h: f64| {
        let p = chart.exp_unchecked(z, &scale(u, h));
        let m = chart.exp_unchecked(z, &scale(u, -h));
        (f(&p) - 2.0 * f(z) + f(&m)) / (h * h)
    };
    // Richardson step cancels the h^2 term
    let along = |u: &[f64]| (4.0 * central(u, 0.5 * h) - central(u, h)) / 3.0;
    let k = frame.len();
    let mut out = vec![vec![0.0; k]; k];
    for a in 0..k {
        out[a][a] = along(&frame[a]);
        for b in 0..a {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let u: Vec<f64> = frame[a].iter().zip(&frame[b]).map(|(x, y)| s * (x + y)).collect();
            let v: Vec<f64> = frame[a].iter().zip(&frame[b]).map(|(x, y)| s * (x - y)).collect();
            let m = 0.5 * (along(&u) - along(&v));
            out[a][b] = m;
            out[b][a] = m;
        }
    }
    out
}

/// Largest entrywise `|a - b| / max(1, |b|)`.
fn relative_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, e)| (x - e).abs() / e.abs().max(1.0))
        .fold(0.0, f64::max)
}

fn geometry(seed: u64, t: f64) -> Result<Vec<CheckRow>> {
    let mut rng = rng_for(seed, 1);
    let (mut rt, mut sym, mut tri, mut grad, mut hess) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut n, mut hess_n) = (0, 0);
    for chart in test_charts() {
        for _ in 0..100 {
            n += 1;
            let x = random_point(&chart, &mut rng);
            let y = random_point(&chart, &mut rng);
            let w = random_point(&chart, &mut rng);
            let len = match chart {
                Chart::Sphere { .. } => rng.random_range(0.0..0.9) * chart.injectivity_radius(),
                _ => rng.random_range(0.0..3.0),
            };
            let v = scale(&random_unit(&chart.tangent_basis(&x), &mut rng), len);
            let back = chart.log(&x, &chart.exp(&x, &v)?)?;
            rt = rt.max(norm(&sub(&back, &v)));

            let dxy = chart.dist(&x, &y)?;
            sym = sym.max((dxy - chart.dist(&y, &x)?).abs());
            tri = tri.max(chart.dist(&x, &w)? - dxy - chart.dist(&y, &w)?);

            if dxy > 0.05 && dxy < 0.9 * chart.injectivity_radius() {
                hess_n += 1;
                let form = chart.hess_dist(&x, &y)?;
                let f = |q: &[f64]| chart.dist_unchecked(q, &y);
                let fd = fd_hessian(&f, &chart, &x, &form.frame, 1e-3);
                hess = hess.max(relative_gap(&fd, &form.matrix));
                let g = chart.grad_dist(&x, &y)?;
                for e in chart.tangent_basis(&x) {
                    let h = 1e-5;
                    let fd = (chart.dist(&chart.exp(&x, &scale(&e, h))?, &y)?
                        - chart.dist(&chart.exp(&x, &scale(&e, -h))?, &y)?)
                        / (2.0 * h);
                    grad = grad.max((fd - dot(&g, &e)).abs());
                }
            }
        }
    }
    Ok(vec![
        CheckRow::new("exp_log_round_trip", n, rt, 1e-9 * t),
        CheckRow::new("distance_symmetry", n, sym, 1e-12 * t),
        CheckRow::new("triangle_inequality", n, tri.max(0.0), 1e-12 * t),
        CheckRow::new("grad_dist_finite_difference", n, grad, 1e-6 * t),
        CheckRow::new("hess_dist_finite_difference", hess_n, hess, 1e-4 * t),
    ])
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum cost over all vertices of the `m x n` transportation polytope,
/// by enumerating every `(m + n - 1)`-cell support.
pub fn transport_vertex_minimum(a: &[f64], b: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (a.len(), b.len());
    let rhs = nalgebra::DVector::from_iterator(m + n, a.iter().chain(b).copied());
    let mut best = f64::INFINITY;
    for cells in combinations(m * n, m + n - 1) {
        let mut mat = nalgebra::DMatrix::<f64>::zeros(m + n, cells.len());
        for (c, &cell) in cells.iter().enumerate() {
            mat[(cell / n, c)] = 1.0;
            mat[(m + cell % n, c)] = 1.0;
        }
        let normal = mat.transpose() * &mat;
        let Some(inv) = normal.try_inverse() else { continue };
        let x = inv * mat.transpose() * &rhs;
        if (&mat * &x - &rhs).norm() > 1e-12 || x.iter().any(|v| *v < -1e-12) {
            continue;
        }
        best = best.min(cells.iter().zip(x.iter()).map(|(&c, v)| cost[c] * v).sum());
    }
    best
}

fn random_weights<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn random_measure<R: Rng + ?Sized>(chart: &Chart, k: usize, rng: &mut R) -> Result<DiscreteMeasure> {
    let pts = (0..k).map(|_| random_point(chart, rng)).collect();
    DiscreteMeasure::new(*chart, pts, random_weights(k, rng))
}

fn transport(seed: u64, t: f64) -> Result<Vec<CheckRow>> {
    let mut rng = rng_for(seed, 2);
    let line = Chart::euclidean(1);

    let mut lp_gap: f64 = 0.0;
    let mut lp_n = 0;
    for (m, n) in [(2, 2), (2, 3), (3, 3)] {
        for _ in 0..20 {
            lp_n += 1;
            let a = random_weights(m, &mut rng);
            let b = random_weights(n, &mut rng);
            let cost: Vec<f64> = (0..m * n).map(|_| rng.random_range(0.0..1.0)).collect();
            let mu = DiscreteMeasure::new(line, (0..m).map(|i| Point(vec![i as f64])).collect(), a.clone())?;
            let nu = DiscreteMeasure::new(line, (0..n).map(|i| Point(vec![i as f64])).collect(), b.clone())?;
            let plan = plan_from_costs(&[mu, nu], &cost)?;
            lp_gap = lp_gap.max((plan.total_cost - transport_vertex_minimum(&a, &b, &cost)).abs());
        }
    }

    let (mut gap, mut slack, mut feas, mut tangency, mut lip, mut idem) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut ot_n = 0;
    let mut tangency_n = 0;
    for chart in [Chart::euclidean(2), Chart::sphere(2, 1.0)] {
        for p in [1.5, 2.0, 3.0] {
            let h = power_profile(p)?;
            for _ in 0..10 {
                ot_n += 1;
                let mu = random_measure(&chart, 3, &mut rng)?;
                let nu = random_measure(&chart, 4, &mut rng)?;
                let (plan, pot) = solve_ot2(&mu, &nu, &h)?;
                gap = gap.max(duality_gap(&plan, &pot).abs());
                let (s, f) = dual_slacks(&plan, &pot, &h);
                slack = slack.max(s);
                feas = feas.max(f);
                for a in 0..mu.len() {
                    if let MongeOutcome::Mapped { point, .. } = monge_map_from_potential(&plan, &pot, a, &h)? {
                        let partner = plan.row(0, a)[0].idx[1];
                        if chart.dist_unchecked(&mu.points[a], &nu.points[partner]) > 1e-9 {
                            tangency_n += 1;
                            tangency = tangency.max(chart.dist_unchecked(&point, &nu.points[partner]));
                        }
                    }
                }

                let xs: Vec<Point> = (0..30).map(|_| random_point(&chart, &mut rng)).collect();
                let xi: Vec<f64> = (0..nu.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let psi = c_transform(&chart, &h, &xi, &nu.points, &xs)?;
                let l = potential_lipschitz_bound(&chart, &h, &xs, &nu.points);
                for i in 0..xs.len() {
                    for j in 0..i {
                        let d = chart.dist_unchecked(&xs[i], &xs[j]);
                        lip = lip.max((psi[i] - psi[j]).abs() - l * d);
                    }
                }
                let xi2 = c_transform(&chart, &h, &psi, &xs, &nu.points)?;
                let psi3 = c_transform(&chart, &h, &xi2, &nu.points, &xs)?;
                idem = idem.max(psi.iter().zip(&psi3).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            }
        }
    }

    // super-gradient remainder decays faster than t
    let sphere = Chart::sphere(2, 1.0);
    let mut decay: f64 = 0.0;
    for p in [1.5, 2.0, 3.0] {
        let h = power_profile(p)?;
        for _ in 0..10 {
            let x = random_point(&sphere, &mut rng);
            let y = random_point(&sphere, &mut rng);
            let d = sphere.dist_unchecked(&x, &y);
            if d < 0.05 || d > 0.9 * sphere.injectivity_radius() {
                continue;
            }
            let us: Vec<Vec<f64>> = (0..100)
                .map(|_| random_unit(&sphere.tangent_basis(&x), &mut rng))
                .collect();
            let ratio = |tt: f64| -> Result<f64> {
                let mut r: f64 = 0.0;
                for u in &us {
                    r = r.max(supergradient_remainder(&sphere, &h, &x, &y, u, tt)?.max(0.0) / tt);
                }
                Ok(r)
            };
            let (coarse, fine) = (ratio(2f64.powi(-4))?, ratio(2f64.powi(-12))?);
            if coarse > 0.0 {
                decay = decay.max(fine / coarse);
            }
        }
    }

    // MMOT certificates
    let (mut cut, mut mono, mut inj) = (0.0f64, 0.0f64, 0usize);
    let mut mmot_n = 0;
    let opts = MmotOptions::default();
    for chart in [Chart::euclidean(2), Chart::sphere(2, 1.0)] {
        for p in [1.5, 2.0, 3.0] {
            let h = power_profile(p)?;
            for n in [2, 3] {
                for _ in 0..3 {
                    mmot_n += 1;
                    let ms: Vec<DiscreteMeasure> = (0..n)
                        .map(|_| {
                            let k = rng.random_range(1..=if n == 2 { 4 } else { 3 });
                            random_measure(&chart, k, &mut rng)
                        })
                        .collect::<Result<_>>()?;
                    let w = random_weights(n, &mut rng);
                    let sol = solve_mmot_with(&ms, &w, &h, &opts)?;
                    if let Chart::Sphere { .. } = chart {
                        for b in &sol.barycenters {
                            let worst = b.cut_margins.iter().copied().fold(f64::INFINITY, f64::min);
                            cut = cut.max(1e-3 - worst);
                        }
                    }
                    let cost = |idx: &[usize]| tuple_cost(&ms, &w, &h, &opts.solver, idx);
                    mono = mono.max(check_cyclical_monotonicity(&sol.plan, &cost)?);
                    if check_injectivity(&sol, &Default::default()).is_err() {
                        inj += 1;
                    }
                }
            }
        }
    }

    Ok(vec![
        CheckRow::new("lp_matches_vertex_enumeration", lp_n, lp_gap, 1e-9 * t),
        CheckRow::new("duality_gap", ot_n, gap, 1e-8 * t),
        CheckRow::new("support_in_c_superdifferential", ot_n, slack, 1e-8 * t),
        CheckRow::new("dual_feasibility", ot_n, feas.max(0.0), 1e-9 * t),
        CheckRow::new("tangency_monge_partner", tangency_n, tangency, 1e-7 * t),
        CheckRow::new("c_transform_lipschitz", ot_n, lip.max(0.0), 1e-12 * t),
        CheckRow::new("c_transform_idempotence", ot_n, idem, 1e-12 * t),
        CheckRow::new("supergradient_remainder_decay", 30, decay, 1e-2 * t),
        CheckRow::new("cut_locus_margin", mmot_n, cut.max(0.0), 0.0),
        CheckRow::new("cyclical_monotonicity", mmot_n, mono.max(0.0), 1e-8 * t),
        CheckRow::new("injectivity_violations", mmot_n, inj as f64, 0.0),
    ])
}

fn invmap(seed: u64, t: f64) -> Result<Vec<CheckRow>> {
    let mut rng = rng_for(seed, 3);

    let (mut round, mut round_n) = (0.0f64, 0);
    for chart in [Chart::euclidean(2), Chart::sphere(2, 1.0), Chart::hyperbolic(2, -1.0)] {
        for p in [1.5, 2.0, 3.0] {
            let h = power_profile(p)?;
            let solver = BarycenterSolver::with_options(chart, &h, SolverOptions::default());
            for n in [2, 3] {
                for _ in 0..5 {
                    let pts: Vec<Point> = (0..n).map(|_| random_point(&chart, &mut rng)).collect();
                    let w = random_weights(n, &mut rng);
                    let sol = solver.solve(&Configuration::new(pts.clone(), w.clone())?)?;
                    if chart.dist_unchecked(&sol.z, &pts[0]) <= 1e-4 {
                        continue;
                    }
                    round_n += 1;
                    let slice = AnchorSlice::new(chart, h.clone(), pts[1..].to_vec(), w)?;
                    round = round.max(chart.dist_unchecked(&slice.inverse_map(&sol.z)?, &pts[0]));
                }
            }
        }
    }

    let (mut hess, mut align, mut hess_n) = (0.0f64, 0.0f64, 0);
    for chart in [Chart::euclidean(2), Chart::sphere(2, 1.0), Chart::hyperbolic(2, -1.0)] {
        for p in [1.5, 2.0, 3.0] {
            let h = power_profile(p)?;
            for _ in 0..20 {
                let x = random_point(&chart, &mut rng);
                let top = (0.9 * chart.injectivity_radius()).min(3.0);
                let r = rng.random_range(0.05..top);
                let u = random_unit(&chart.tangent_basis(&x), &mut rng);
                let z = chart.exp_unchecked(&x, &scale(&u, r));
                hess_n += 1;
                let form = hess_cost(&h, &chart, &z, &x)?;
                let f = |q: &[f64]| h.eval(chart.dist_unchecked(q, &x));
                let fd = fd_hessian(&f, &chart, &z, &form.frame, 1e-3);
                hess = hess.max(relative_gap(&fd, &form.matrix));
                // radial eigenvector lines up with grad d(., x)
                let g = chart.grad_dist(&z, &x)?;
                let radial = h.second_deriv(r);
                let eig = form.eigen();
                let spread = eig.last().expect("non-empty").0 - eig[0].0;
                if spread > 1e-6 * radial.abs().max(1.0) {
                    let (_, v) = eig
                        .iter()
                        .min_by(|a, b| (a.0 - radial).abs().total_cmp(&(b.0 - radial).abs()))
                        .expect("non-empty");
                    let cos = dot(v, &g).abs() / (norm(v) * norm(&g));
                    align = align.max(cos.clamp(-1.0, 1.0).acos());
                }
            }
        }
    }

    let sphere = Chart::sphere(2, 1.0);
    let pole = [0.0, 0.0, 1.0];
    let radii: Vec<f64> = (1..=4).map(|k| 10f64.powi(-k)).collect();
    let lim = hessian_collision_limit_check(&power_profile(3.0)?, &sphere, &pole, &radii, 16, seed)?;
    let blow = hessian_blowup_check(&power_profile(1.5)?, &sphere, &pole, &radii, 16, seed)?;

    let anchors: Vec<Point> = (0..2)
        .map(|_| {
            let th: f64 = rng.random_range(1.0..2.0);
            let ph = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
            Point(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()])
        })
        .collect();
    let slice = AnchorSlice::new(sphere, power_profile(1.5)?, anchors, vec![0.4, 0.3, 0.3])?;
    let region = Ball::new(vec![0.0, 0.0, 1.0], 0.3);
    let a = lipschitz_probe(&slice, &region, 0.2, 5_000, ProbeRegime::CollisionFree, seed)?;
    let b = lipschitz_probe(
        &slice,
        &region,
        0.2,
        10_000,
        ProbeRegime::CollisionFree,
        seed.wrapping_add(1),
    )?;
    let stability = (b.constant / a.constant - 1.0).abs();

    Ok(vec![
        CheckRow::new("inverse_map_round_trip", round_n, round, 1e-7 * t),
        CheckRow::new("hess_cost_finite_difference", hess_n, hess, 1e-4 * t),
        CheckRow::new("radial_eigenvector_alignment", hess_n, align, 1e-6 * t),
        CheckRow::new(
            "collision_limit_slope_p3",
            radii.len(),
            (lim.loglog_slope - 1.0).abs(),
            0.1,
        ),
        CheckRow::new(
            "hessian_blowup_slope_p1.5",
            radii.len(),
            (blow.loglog_slope + 0.5).abs(),
            0.05,
        ),
        CheckRow::new("lipschitz_probe_stability", a.n_pairs + b.n_pairs, stability, 0.1),
    ])
}

fn counterexample(t: f64) -> Result<Vec<CheckRow>> {
    let r = counterexample_shared_barycenter()?;
    let mut rows = Vec::new();
    for (k, name) in ["F1_shared_minimizer", "F2_shared_minimizer"].iter().enumerate() {
        rows.push(CheckRow::new(name, 1, r.grid_argmins[k].abs(), 1e-4 * t));
    }
    let sub = r
        .subdifferentials
        .iter()
        .map(|[lo, hi]| lo.max(-hi).max(0.0))
        .fold(0.0, f64::max);
    rows.push(CheckRow::new("subdifferentials_contain_zero", 2, sub, 0.0));

    // both configurations share a barycenter, so a plan containing both
    // tuples must be reported as non-injective
    let line = Chart::euclidean(1);
    let h: CostProfile = counterexample_profile();
    let ms = vec![
        DiscreteMeasure::dirac(line, Point(vec![0.0]))?,
        DiscreteMeasure::new(line, vec![Point(vec![1.0]), Point(vec![0.5])], vec![0.5, 0.5])?,
    ];
    let mut opts = MmotOptions::default();
    opts.solver.allow_counterexample = true;
    let sol = solve_mmot_with(&ms, &r.weights, &h, &opts)?;
    let reported = matches!(
        check_injectivity(&sol, &Default::default()),
        Err(Error::InjectivityViolation { .. })
    );
    rows.push(CheckRow::new(
        "injectivity_violation_reported",
        1,
        if reported { 0.0 } else { 1.0 },
        0.0,
    ));
    Ok(rows)
}

pub fn write_csv<W: std::io::Write>(rows: &[CheckRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
