//! Two-marginal transport: Kantorovich potentials, c-transforms and the
//! Monge map recovered from the potential.

use hbary::cost::power_profile;
use hbary::geometry::{Chart, Point};
use hbary::transport::{duality_gap, monge_map_from_potential, solve_ot2, DiscreteMeasure, MongeOutcome};

fn main() -> hbary::Result<()> {
    let plane = Chart::euclidean(2);
    let mu = DiscreteMeasure::new(
        plane,
        vec![Point::new([0.0, 0.0]), Point::new([1.0, 0.0]), Point::new([0.0, 1.0])],
        vec![0.3, 0.3, 0.4],
    )?;
    let nu = DiscreteMeasure::new(
        plane,
        vec![Point::new([2.0, 0.5]), Point::new([0.5, 2.0]), Point::new([2.0, 2.0])],
        vec![0.3, 0.3, 0.4],
    )?;
    let h = power_profile(3.0)?;
    let (plan, pot) = solve_ot2(&mu, &nu, &h)?;
    println!(
        "cost {:.6}, duality gap {:.1e}",
        plan.total_cost,
        duality_gap(&plan, &pot)
    );
    println!("psi = {:.4?}\nxi  = {:.4?}", pot.psi, pot.xi);
    for a in 0..mu.len() {
        match monge_map_from_potential(&plan, &pot, a, &h)? {
            MongeOutcome::Mapped { point, active, .. } => {
                println!(
                    "  T({:?}) = {:.6?} (partner {active})",
                    mu.points[a].coords(),
                    point.coords()
                )
            }
            other => println!("  atom {a}: {other:?}"),
        }
    }
    Ok(())
}
