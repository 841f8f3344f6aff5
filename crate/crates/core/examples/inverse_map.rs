//! The inverse map `F_v`: recovering the free point of a configuration from
//! its barycenter, the cost Hessian, and an empirical Lipschitz constant.

use hbary::barycenter::{solve_barycenter, Configuration};
use hbary::cost::power_profile;
use hbary::geometry::{Ball, Chart, Point};
use hbary::invmap::{hess_cost, hessian_collision_limit_check, lipschitz_probe, AnchorSlice, ProbeRegime};

fn main() -> hbary::Result<()> {
    let s2 = Chart::sphere(2, 1.0);
    let h = power_profile(1.5)?;
    let x1 = s2.point(vec![0.0, 0.0, 1.0])?;
    let anchors = vec![s2.point(vec![1.0, 0.0, 0.0])?, s2.point(vec![0.0, 0.8, 0.6])?];
    let weights = vec![0.5, 0.25, 0.25];

    let mut pts = vec![x1.clone()];
    pts.extend(anchors.iter().cloned());
    let z = solve_barycenter(&s2, &h, &Configuration::new(pts, weights.clone())?)?.z;
    let slice = AnchorSlice::new(s2, h.clone(), anchors, weights)?;
    let back = slice.inverse_map(&z)?;
    println!(
        "z = {:.6?}\nF(z) = {:.6?} (x1 = {:?})",
        z.coords(),
        back.coords(),
        x1.coords()
    );

    let form = hess_cost(&h, &s2, &z, &x1)?;
    println!(
        "Hess c(., x1) at z: {:.4?}",
        form.eigen().iter().map(|e| e.0).collect::<Vec<_>>()
    );

    let region = Ball::new(Point::new([0.0, 0.0, 1.0]), 0.2);
    let probe = lipschitz_probe(&slice, &region, 0.01, 2000, ProbeRegime::FirstMarginalOnly, 0)?;
    println!(
        "empirical Lip(F) on the cap: {:.4} from {} pairs",
        probe.constant, probe.n_pairs
    );

    let radii = [1e-1, 1e-2, 1e-3, 1e-4];
    let r = hessian_collision_limit_check(&power_profile(3.0)?, &s2, &x1, &radii, 16, 0)?;
    println!(
        "p = 3 collision deviations {:?}, slope {:.3}",
        r.deviations, r.loglog_slope
    );
    Ok(())
}
