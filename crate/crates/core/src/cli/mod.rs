//! The `bary` command line: JSON specs in, JSON/CSV out.
//!
//! Exit codes: 0 ok, 1 spec or input error, 2 numerical non-convergence,
//! 3 verification failure.

pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::barycenter::{BarycenterSolver, Configuration, SolverOptions};
use crate::cost::ProfileSpec;
use crate::diagnostics::{
    abs_continuity_experiment, consistency_experiment, write_rows_csv, ContinuityCase, ExperimentOptions, MeasureSpec,
};
use crate::error::{Error, Result};
use crate::geometry::{Chart, Point};
use crate::tolerances::Tolerances;
use crate::transport::{solve_mmot_with, DiscreteMeasure, MmotOptions, MmotSolution};

pub use verify::{run_suite, CheckRow, Suite, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_VERIFY_FAIL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "bary",
    version,
    about = "Generalized h-Wasserstein barycenters on constant-curvature manifolds"
)]
pub struct Args {
    /// Worker threads for parallel instance solving (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Output directory; results go to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Multiplies every numerical tolerance.
    #[arg(long, default_value_t = 1.0)]
    pub tol_scale: f64,
    /// RNG seed; overrides the seed in an experiment spec.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Barycenter of one weighted configuration.
    #[command(visible_alias = "bary")]
    Solve {
        /// JSON spec file.
        #[arg(long)]
        spec: PathBuf,
        /// Accept profiles that violate the cost assumptions.
        #[arg(long)]
        allow_counterexample: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Exact multi-marginal transport with barycenters of the support.
    Mmot {
        /// JSON spec file.
        #[arg(long)]
        spec: PathBuf,
        /// Accept profiles that violate the cost assumptions.
        #[arg(long)]
        allow_counterexample: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Randomized property checks; CSV table, exit 3 on any failure.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: Suite,
        #[command(flatten)]
        common: Common,
    },
    /// Consistency or absolute-continuity ladder.
    Experiment {
        /// JSON spec file.
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

/// `{"manifold": ..., "profile": ..., "points": [...], "weights": [...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarySpec {
    pub manifold: Chart,
    pub profile: ProfileSpec,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// A measure in the documented JSON schema. `manifold` may be omitted
/// inside a spec that declares one at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold: Option<Chart>,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// A marginal given inline or as a path relative to the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarginalRef {
    File { file: PathBuf },
    Inline(MarginalSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmotSpec {
    pub manifold: Chart,
    pub profile: ProfileSpec,
    pub weights: Vec<f64>,
    pub marginals: Vec<MarginalRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentKind {
    Consistency {
        levels: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<MarginalSpec>,
    },
    AbsContinuity {
        case: ContinuityCase,
        levels: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon_exponents: Option<Vec<i32>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub manifold: Chart,
    pub profile: ProfileSpec,
    pub weights: Vec<f64>,
    pub marginals: Vec<MeasureSpec>,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
}

/// Plan output of `bary mmot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmotOutput {
    pub plan: Vec<PlanEntry>,
    pub total_cost: f64,
    pub duals: Vec<Vec<f64>>,
    #[serde(with = "crate::serde_inf")]
    pub min_nonbasic_reduced_cost: f64,
    pub unique: bool,
    pub barycenters: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub idx: Vec<usize>,
    pub mass: f64,
}

impl From<&MmotSolution> for MmotOutput {
    fn from(s: &MmotSolution) -> Self {
        MmotOutput {
            plan: s
                .plan
                .support
                .iter()
                .map(|a| PlanEntry {
                    idx: a.idx.clone(),
                    mass: a.mass,
                })
                .collect(),
            total_cost: s.plan.total_cost,
            duals: s.plan.duals.clone(),
            min_nonbasic_reduced_cost: s.plan.min_nonbasic_reduced_cost,
            unique: s.plan.is_unique(),
            barycenters: s.barycenters.iter().map(|b| b.z.clone()).collect(),
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

// input points must already lie on the manifold; no silent projection
fn points(chart: &Chart, raw: &[Vec<f64>]) -> Result<Vec<Point>> {
    raw.iter()
        .map(|p| {
            chart.check(p)?;
            Ok(Point(p.clone()))
        })
        .collect()
}

fn solver_options(tol_scale: f64, allow_counterexample: bool) -> SolverOptions {
    SolverOptions {
        tolerances: Tolerances::default().scaled(tol_scale),
        allow_counterexample,
        ..SolverOptions::default()
    }
}

impl MarginalSpec {
    pub fn to_measure(&self, chart: &Chart) -> Result<DiscreteMeasure> {
        if let Some(own) = &self.manifold {
            if own != chart {
                return Err(Error::InvalidInput(format!("marginal on {own} inside a {chart} spec")));
            }
        }
        DiscreteMeasure::new(*chart, points(chart, &self.points)?, self.weights.clone())
    }
}

impl MarginalRef {
    fn resolve(&self, base: &Path) -> Result<MarginalSpec> {
        match self {
            MarginalRef::Inline(m) => Ok(m.clone()),
            MarginalRef::File { file } => read_json(&base.join(file)),
        }
    }
}

/// Output sink: a file in `--out`, or stdout.
fn emit(common: &Common, name: &str, stdout: &mut dyn Write, body: &[u8]) -> Result<()> {
    match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), body)?;
        }
        None => stdout.write_all(body)?,
    }
    Ok(())
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

pub fn cmd_bary(spec: &BarySpec, allow_counterexample: bool, common: &Common, stdout: &mut dyn Write) -> Result<()> {
    let chart = spec.manifold;
    chart.validate()?;
    let profile = spec.profile.build()?;
    let cfg = Configuration::new(points(&chart, &spec.points)?, spec.weights.clone())?;
    let opts = solver_options(common.tol_scale, allow_counterexample);
    let sol = BarycenterSolver::with_options(chart, &profile, opts).solve(&cfg)?;
    emit(common, "barycenter.json", stdout, &json_bytes(&sol)?)?;
    if !sol.converged {
        return Err(Error::NonConvergence { best: Box::new(sol) });
    }
    Ok(())
}

pub fn cmd_mmot(
    spec: &MmotSpec,
    base: &Path,
    allow_counterexample: bool,
    common: &Common,
    stdout: &mut dyn Write,
) -> Result<MmotOutput> {
    let chart = spec.manifold;
    chart.validate()?;
    let profile = spec.profile.build()?;
    let measures = spec
        .marginals
        .iter()
        .map(|m| m.resolve(base)?.to_measure(&chart))
        .collect::<Result<Vec<_>>>()?;
    let opts = MmotOptions {
        solver: solver_options(common.tol_scale, allow_counterexample),
        ..MmotOptions::default()
    };
    let sol = solve_mmot_with(&measures, &spec.weights, &profile, &opts)?;
    let out = MmotOutput::from(&sol);
    emit(common, "plan.json", stdout, &json_bytes(&out)?)?;
    Ok(out)
}

/// Returns the rows; the caller maps any FAIL to exit code 3.
pub fn cmd_verify(suite: Suite, common: &Common, stdout: &mut dyn Write) -> Result<Vec<CheckRow>> {
    let rows = run_suite(suite, common.seed.unwrap_or(0), common.tol_scale)?;
    let mut buf = Vec::new();
    verify::write_csv(&rows, &mut buf)?;
    emit(common, "verify.csv", stdout, &buf)?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencySummary {
    pub levels: Vec<usize>,
    pub bl_to_finest: Vec<f64>,
    pub bl_finest_to_reference: Option<f64>,
    pub monotone_within_slack: bool,
}

pub fn cmd_experiment(spec: &ExperimentSpec, common: &Common, stdout: &mut dyn Write) -> Result<()> {
    let chart = spec.manifold;
    chart.validate()?;
    let profile = spec.profile.build()?;
    let seed = common.seed.unwrap_or(spec.seed);
    let mut opts = ExperimentOptions {
        bl_seed: seed,
        probe_seed: seed,
        ..ExperimentOptions::default()
    };
    opts.mmot.solver = solver_options(common.tol_scale, false);
    let mut csv = Vec::new();
    let summary = match &spec.experiment {
        ExperimentKind::Consistency { levels, reference } => {
            let reference = reference.as_ref().map(|r| r.to_measure(&chart)).transpose()?;
            let r = consistency_experiment(
                &chart,
                &spec.marginals,
                &spec.weights,
                &profile,
                levels,
                reference.as_ref(),
                &opts,
            )?;
            write_rows_csv(&r.rows, &mut csv)?;
            json_bytes(&ConsistencySummary {
                levels: r.ladder.levels.iter().map(|l| l.level).collect(),
                bl_to_finest: r.bl_to_finest,
                bl_finest_to_reference: r.bl_finest_to_reference,
                monotone_within_slack: r.monotone_within_slack,
            })?
        }
        ExperimentKind::AbsContinuity {
            case,
            levels,
            epsilon_exponents,
        } => {
            if let Some(e) = epsilon_exponents {
                opts.epsilon_exponents = e.clone();
            }
            let r = abs_continuity_experiment(*case, &chart, &spec.marginals, &spec.weights, &profile, levels, &opts)?;
            write_rows_csv(&r.rows, &mut csv)?;
            json_bytes(&r)?
        }
    };
    emit(common, "ladder.csv", stdout, &csv)?;
    if common.out.is_some() {
        emit(common, "report.json", stdout, &summary)?;
    }
    Ok(())
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        _ => EXIT_INPUT,
    }
}

/// Runs a parsed command line, writing results to `stdout` and
/// diagnostics to `stderr`; returns the process exit code.
pub fn run(args: Args, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    if let Some(n) = args.workers {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match &args.command {
        Command::Solve {
            spec,
            allow_counterexample,
            common,
        } => read_json(spec)
            .and_then(|s| cmd_bary(&s, *allow_counterexample, common, stdout))
            .map(|_| EXIT_OK),
        Command::Mmot {
            spec,
            allow_counterexample,
            common,
        } => {
            let base = spec.parent().unwrap_or(Path::new("."));
            read_json(spec)
                .and_then(|s| cmd_mmot(&s, base, *allow_counterexample, common, stdout))
                .map(|_| EXIT_OK)
        }
        Command::Verify { suite, common } => cmd_verify(*suite, common, stdout).map(|rows| {
            if rows.iter().all(|r| r.verdict == Verdict::Pass) {
                EXIT_OK
            } else {
                EXIT_VERIFY_FAIL
            }
        }),
        Command::Experiment { spec, common } => read_json(spec)
            .and_then(|s| cmd_experiment(&s, common, stdout))
            .map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
