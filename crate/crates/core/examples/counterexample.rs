//! With `h(t) = t^2 + t` two different configurations share a barycenter,
//! so the barycenter map of an optimal plan need not be injective.

use hbary::barycenter::{counterexample_shared_barycenter, SolverOptions};
use hbary::cost::counterexample_profile;
use hbary::geometry::{Chart, Point};
use hbary::transport::{check_injectivity, solve_mmot_with, DiscreteMeasure, MmotOptions};
use hbary::{Error, Tolerances};

fn main() -> hbary::Result<()> {
    let r = counterexample_shared_barycenter()?;
    println!("weights {:?}", r.weights);
    for k in 0..2 {
        println!(
            "config {:?}: grid argmin {:.1e}, subdifferential at 0 = {:?}, quadratic barycenter {}",
            r.configs[k], r.grid_argmins[k], r.subdifferentials[k], r.quadratic_barycenters[k]
        );
    }
    println!("shared minimizer at {} : {}", r.shared_point, r.shared);

    let line = Chart::euclidean(1);
    let ms = [
        DiscreteMeasure::dirac(line, Point::new([0.0]))?,
        DiscreteMeasure::new(line, vec![Point::new([1.0]), Point::new([0.5])], vec![0.5, 0.5])?,
    ];
    let opts = MmotOptions {
        solver: SolverOptions {
            allow_counterexample: true,
            ..SolverOptions::default()
        },
        ..MmotOptions::default()
    };
    let sol = solve_mmot_with(&ms, &r.weights, &counterexample_profile(), &opts)?;
    match check_injectivity(&sol, &Tolerances::default()) {
        Err(e @ Error::InjectivityViolation { .. }) => println!("{e}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
