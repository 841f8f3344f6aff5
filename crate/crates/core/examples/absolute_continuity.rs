//! `E_{eps,delta}` diagnostics for the two absolute-continuity regimes:
//! a C^2 cost with one diffuse marginal, and `p = 1.5` with all marginals
//! diffuse.

use hbary::cost::power_profile;
use hbary::diagnostics::{abs_continuity_experiment, ContinuityCase, ExperimentOptions, MeasureSpec};
use hbary::geometry::Chart;

fn main() -> hbary::Result<()> {
    let opts = ExperimentOptions::default();

    let s2 = Chart::sphere(2, 1.0);
    let specs = [
        MeasureSpec::UniformBall {
            center: vec![0.0, 0.0, 1.0],
            radius: 0.6,
        },
        MeasureSpec::Atoms {
            points: vec![vec![0.6, 0.0, 0.8]],
            weights: vec![1.0],
        },
    ];
    let r = abs_continuity_experiment(
        ContinuityCase::SmoothCost,
        &s2,
        &specs,
        &[0.5, 0.5],
        &power_profile(3.0)?,
        &[5],
        &opts,
    )?;
    report("smooth cost on S^2, p = 3", &r);

    let line = Chart::euclidean(1);
    let specs = [
        MeasureSpec::UniformBall {
            center: vec![0.5],
            radius: 0.5,
        },
        MeasureSpec::UniformBall {
            center: vec![2.5],
            radius: 0.5,
        },
    ];
    let r = abs_continuity_experiment(
        ContinuityCase::DiffuseMarginals,
        &line,
        &specs,
        &[0.5, 0.5],
        &power_profile(1.5)?,
        &[1, 2, 3, 4, 5],
        &opts,
    )?;
    report("diffuse marginals on R, p = 1.5", &r);
    Ok(())
}

fn report(title: &str, r: &hbary::diagnostics::AbsContinuityReport) {
    println!("{title}: Lip(F) ~ {:.3}", r.probe_constant);
    for (level, verdicts) in &r.verdicts {
        let line: Vec<String> = verdicts
            .iter()
            .map(|v| {
                format!(
                    "eps {} delta {:.2e}: {:.3} {}",
                    v.epsilon,
                    v.delta,
                    v.accumulated_mass,
                    if v.pass { "PASS" } else { "FAIL" }
                )
            })
            .collect();
        println!("  level {level}: {}", line.join(" | "));
    }
    let control: Vec<bool> = r.dirac_control.iter().map(|v| v.pass).collect();
    println!("  Dirac control passes: {control:?}");
}
