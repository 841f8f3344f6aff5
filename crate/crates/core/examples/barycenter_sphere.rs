//! Barycenters of three points on the unit sphere for several exponents.

use hbary::barycenter::{solve_barycenter, Configuration};
use hbary::cost::power_profile;
use hbary::geometry::Chart;

fn main() -> hbary::Result<()> {
    let s2 = Chart::sphere(2, 1.0);
    let pts = vec![
        s2.point(vec![1.0, 0.0, 0.0])?,
        s2.point(vec![0.0, 1.0, 0.0])?,
        s2.point(vec![0.0, 0.0, 1.0])?,
    ];
    let cfg = Configuration::new(pts, vec![0.5, 0.3, 0.2])?;
    for p in [1.5, 2.0, 3.0] {
        let h = power_profile(p)?;
        let sol = solve_barycenter(&s2, &h, &cfg)?;
        println!(
            "p = {p}: z = {:.6?}, value {:.6}, residual {:.1e}, min cut margin {:.4}",
            sol.z.coords(),
            sol.value,
            sol.grad_residual,
            sol.cut_margins.iter().copied().fold(f64::INFINITY, f64::min)
        );
    }
    Ok(())
}
