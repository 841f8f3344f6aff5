//! Exact multi-marginal transport and the resulting barycenter measure.

use hbary::cost::power_profile;
use hbary::geometry::{Chart, Point};
use hbary::transport::{check_injectivity, solve_mmot, DiscreteMeasure};
use hbary::Tolerances;

fn main() -> hbary::Result<()> {
    let line = Chart::euclidean(1);
    let mu = DiscreteMeasure::new(line, vec![Point::new([0.0]), Point::new([1.0])], vec![0.5, 0.5])?;
    let nu = DiscreteMeasure::new(line, vec![Point::new([0.5]), Point::new([1.5])], vec![0.5, 0.5])?;
    let sol = solve_mmot(&[mu, nu], &[0.5, 0.5], &power_profile(2.0)?)?;
    println!("total cost {} (unique: {})", sol.plan.total_cost, sol.plan.is_unique());
    for (atom, b) in sol.plan.support.iter().zip(&sol.barycenters) {
        println!("  tuple {:?} mass {} -> z = {:?}", atom.idx, atom.mass, b.z.coords());
    }

    let s2 = Chart::sphere(2, 1.0);
    let a = DiscreteMeasure::new(
        s2,
        vec![
            Point::new([1.0, 0.0, 0.0]),
            Point::new([0.0, 1.0, 0.0]),
            Point::new([0.0, 0.0, 1.0]),
        ],
        vec![0.2, 0.3, 0.5],
    )?;
    let b = DiscreteMeasure::new(
        s2,
        vec![Point::new([0.0, -1.0, 0.0]), Point::new([0.6, 0.0, 0.8])],
        vec![0.5, 0.5],
    )?;
    let c = DiscreteMeasure::dirac(s2, Point::new([-0.6, 0.0, 0.8]))?;
    let sol = solve_mmot(&[a, b, c], &[0.4, 0.4, 0.2], &power_profile(1.5)?)?;
    let inj = check_injectivity(&sol, &Tolerances::default())?;
    println!(
        "sphere, p = 1.5, n = 3: cost {:.6}, support {}",
        sol.plan.total_cost,
        sol.plan.support.len()
    );
    println!("  barycenter measure: {:?}", sol.barycenter_measure()?.weights);
    println!("  tuple pairs sharing a barycenter: {}", inj.close_pairs);
    Ok(())
}
