//! Distances, exp/log and the distance Hessian on the three model spaces.

use hbary::geometry::Chart;

fn main() -> hbary::Result<()> {
    let charts = [
        (Chart::euclidean(2), vec![0.0, 0.0], vec![0.6, 0.0]),
        (
            Chart::sphere(2, 1.0),
            vec![0.0, 0.0, 1.0],
            vec![0.6f64.sin(), 0.0, 0.6f64.cos()],
        ),
        (Chart::hyperbolic(2, -1.0), vec![0.0, 0.0], vec![0.5, 0.0]),
    ];
    for (chart, x, y) in charts {
        let d = chart.dist(&x, &y)?;
        let v = chart.log(&x, &y)?;
        let back = chart.exp(&x, &v)?;
        println!(
            "{chart}: d = {d:.6}, |log_x y| = {:.6}, exp(log) = {:?}",
            v.norm(),
            back.coords()
        );
        println!("  injectivity radius {}", chart.injectivity_radius());

        let hess = chart.hess_dist(&x, &y)?;
        let eig: Vec<f64> = hess.eigen().iter().map(|(l, _)| *l).collect();
        println!(
            "  Hess d(., y) at x: eigenvalues {eig:.6?} (k(r) = {:.6})",
            chart.hess_dist_coefficient(d)
        );
    }
    Ok(())
}
