//! Discrete barycenters of quantized uniform marginals converge as the
//! quantization refines.

use hbary::cost::power_profile;
use hbary::diagnostics::{consistency_experiment, discretize, ExperimentOptions, MeasureSpec};
use hbary::geometry::Chart;

fn main() -> hbary::Result<()> {
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
    // the quadratic barycenter of U[0,1] and U[2,3] is U[1,2]
    let reference = discretize(
        &line,
        &MeasureSpec::UniformBall {
            center: vec![1.5],
            radius: 0.5,
        },
        6,
    )?;
    let r = consistency_experiment(
        &line,
        &specs,
        &[0.5, 0.5],
        &power_profile(2.0)?,
        &[1, 2, 3, 4, 5],
        Some(&reference),
        &ExperimentOptions::default(),
    )?;
    for (l, d) in r.ladder.levels.iter().zip(&r.bl_to_finest) {
        println!(
            "level {}: {} barycenter atoms, BL to finest {d:.3e}",
            l.level,
            l.barycenter.len()
        );
    }
    println!("finest vs U[1,2]: {:.3e}", r.bl_finest_to_reference.unwrap_or(f64::NAN));
    Ok(())
}
