mod common;

use common::{grid_min_1d, sphere_point};
use hbary::barycenter::{barycenter_cost, first_order_residual, objective_phi, solve_barycenter, Configuration};
use hbary::cost::power_profile;
use hbary::geometry::{Chart, Point};
use proptest::prelude::*;

#[test]
fn sphere_midpoint_for_three_halves_power_matches_grid_search() {
    let s = Chart::sphere(2, 1.0);
    let a = sphere_point(1.0, 0.2);
    let v = s.project_tangent(&a, &[0.3, -0.5, 0.1]);
    let v = v.scaled(1.0 / v.norm());
    let b = s.exp(&a, &v).unwrap();
    let h = power_profile(1.5).unwrap();
    let cfg = Configuration::new(vec![a.clone(), b.clone()], vec![0.5, 0.5]).unwrap();
    let sol = solve_barycenter(&s, &h, &cfg).unwrap();

    let along = |t: f64| s.exp(&a, &v.scaled(t)).unwrap();
    let (t_star, v_star) = grid_min_1d(|t| objective_phi(&s, &h, &cfg, &along(t)).unwrap(), 0.0, 1.0, 10_000);
    assert!((t_star - 0.5).abs() <= 1e-4);
    assert!(sol.value <= v_star + 1e-12);
    assert!(s.dist(&sol.z, &along(0.5)).unwrap() < 1e-7);
}

#[test]
fn plane_barycenters_beat_a_dense_grid() {
    let plane = Chart::euclidean(2);
    let pts = vec![Point::new([0.0, 0.0]), Point::new([2.0, 0.3]), Point::new([0.7, 1.8])];
    for p in [1.5, 2.0, 3.0] {
        let h = power_profile(p).unwrap();
        let cfg = Configuration::new(pts.clone(), vec![0.2, 0.5, 0.3]).unwrap();
        let sol = solve_barycenter(&plane, &h, &cfg).unwrap();
        let n = 400;
        let mut best = (f64::INFINITY, Point::new([0.0, 0.0]));
        for i in 0..n {
            for j in 0..n {
                let y = Point::new([-0.5 + 3.0 * i as f64 / n as f64, -0.5 + 3.0 * j as f64 / n as f64]);
                let v = objective_phi(&plane, &h, &cfg, &y).unwrap();
                if v < best.0 {
                    best = (v, y);
                }
            }
        }
        assert!(sol.value <= best.0 + 1e-12, "p={p}");
        assert!(plane.dist(&sol.z, &best.1).unwrap() < 0.02, "p={p}");
    }
}

#[test]
fn sphere_barycenters_beat_a_fibonacci_scan() {
    let s = Chart::sphere(2, 1.0);
    let pts = vec![sphere_point(0.3, 0.0), sphere_point(1.2, 2.0), sphere_point(2.0, 4.0)];
    let scan: Vec<Point> = (0..20_000)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / 20_000.0;
            let phi = k as f64 * std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let r = (1.0 - z * z).sqrt();
            Point::new([r * phi.cos(), r * phi.sin(), z])
        })
        .collect();
    for p in [1.5, 2.0, 3.0] {
        let h = power_profile(p).unwrap();
        let cfg = Configuration::new(pts.clone(), vec![0.5, 0.25, 0.25]).unwrap();
        let sol = solve_barycenter(&s, &h, &cfg).unwrap();
        let best = scan
            .iter()
            .map(|y| objective_phi(&s, &h, &cfg, y).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(sol.value <= best + 1e-12);
        assert!(first_order_residual(&s, &h, &cfg, &sol.z).unwrap() <= 1e-7);
        assert!(sol.cut_margins.iter().all(|m| *m > 1e-3));
    }
}

#[test]
fn sphere_objective_matches_direct_summation() {
    let s = Chart::sphere(2, 1.0);
    let pts = vec![sphere_point(0.3, 0.0), sphere_point(1.2, 2.0)];
    let y = sphere_point(0.8, 1.0);
    let h = power_profile(3.0).unwrap();
    let cfg = Configuration::new(pts.clone(), vec![0.7, 0.3]).unwrap();
    let direct: f64 = pts
        .iter()
        .zip([0.7, 0.3])
        .map(|(x, l)| {
            let c: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            l * c.clamp(-1.0, 1.0).acos().powi(3) / 3.0
        })
        .sum();
    assert!((objective_phi(&s, &h, &cfg, &y).unwrap() - direct).abs() < 1e-12);
}

#[test]
fn quadratic_pair_cost_is_the_midpoint_formula() {
    let line = Chart::euclidean(1);
    let h = power_profile(2.0).unwrap();
    for (a, b) in [(0.0, 1.0), (0.0, 5.0), (4.0, 1.0), (4.0, 5.0), (-2.0, 3.5)] {
        let cfg = Configuration::new(vec![Point::new([a]), Point::new([b])], vec![0.5, 0.5]).unwrap();
        let c = barycenter_cost(&line, &h, &cfg).unwrap();
        assert!((c - (a - b) * (a - b) / 8.0).abs() < 1e-12);
    }
}

#[test]
fn hyperbolic_barycenter_satisfies_first_order_condition() {
    let hyp = Chart::hyperbolic(2, -1.0);
    let pts = vec![
        Point::new([0.5, 0.0]),
        Point::new([-0.2, 0.6]),
        Point::new([-0.3, -0.7]),
    ];
    for p in [1.5, 2.0, 3.0] {
        let h = power_profile(p).unwrap();
        let cfg = Configuration::new(pts.clone(), vec![0.4, 0.3, 0.3]).unwrap();
        let sol = solve_barycenter(&hyp, &h, &cfg).unwrap();
        assert!(sol.converged);
        assert!(sol.grad_residual <= 1e-9);
        for k in 0..50 {
            let a = k as f64 * 0.13;
            let y = hyp.exp(&sol.z, &[0.05 * a.cos(), 0.05 * a.sin()]).unwrap();
            assert!(objective_phi(&hyp, &h, &cfg, &y).unwrap() >= sol.value);
        }
    }
}

#[test]
fn residual_at_a_marginal_point_omits_its_term() {
    let plane = Chart::euclidean(2);
    let pts = [[0.0, 0.0], [2.0, 0.5], [-0.5, 1.5]];
    let w = [0.5, 0.3, 0.2];
    let cfg = Configuration::new(pts.iter().map(|p| Point::new(*p)).collect(), w.to_vec()).unwrap();
    for p in [1.5, 2.0, 3.0] {
        let h = power_profile(p).unwrap();
        for i in 0..3 {
            let z = pts[i];
            let mut g = [0.0, 0.0];
            for j in (0..3).filter(|j| *j != i) {
                let d = ((z[0] - pts[j][0]).powi(2) + (z[1] - pts[j][1]).powi(2)).sqrt();
                for k in 0..2 {
                    g[k] += w[j] * h.deriv(d) * (z[k] - pts[j][k]) / d;
                }
            }
            let expect = (g[0] * g[0] + g[1] * g[1]).sqrt();
            let r = first_order_residual(&plane, &h, &cfg, &z).unwrap();
            assert!(
                r.is_finite() && (r - expect).abs() < 1e-12,
                "p={p} i={i}: {r} vs {expect}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn solved_value_is_below_every_input_point(
        th in proptest::collection::vec(0.1..2.8f64, 3),
        ph in proptest::collection::vec(0.0..6.2f64, 3),
        w in proptest::collection::vec(0.1..1.0f64, 3),
        p in prop_oneof![Just(1.5), Just(2.0), Just(3.0)],
    ) {
        let s = Chart::sphere(2, 1.0);
        let pts: Vec<Point> = th.iter().zip(&ph).map(|(t, f)| sphere_point(*t, *f)).collect();
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / total).collect();
        let h = power_profile(p).unwrap();
        let cfg = Configuration::new(pts.clone(), w).unwrap();
        let sol = solve_barycenter(&s, &h, &cfg).unwrap();
        for x in &pts {
            prop_assert!(sol.value <= objective_phi(&s, &h, &cfg, x).unwrap() + 1e-12);
        }
        let worst = pts.iter().map(|x| s.dist(&sol.z, x).unwrap()).fold(0.0, f64::max);
        prop_assert!(worst <= std::f64::consts::PI - 1e-3);
    }
    #[test]
    fn barycenter_cost_is_lipschitz_in_the_configuration(
        th in proptest::collection::vec(0.3..2.6f64, 3),
        ph in proptest::collection::vec(0.0..6.2f64, 3),
        dirs in proptest::collection::vec(0.0..6.2f64, 3),
        delta in 1e-5..1e-3f64,
        p in prop_oneof![Just(1.5), Just(2.0), Just(3.0)],
    ) {
        let s = Chart::sphere(2, 1.0);
        let h = power_profile(p).unwrap();
        let pts: Vec<Point> = th.iter().zip(&ph).map(|(t, f)| sphere_point(*t, *f)).collect();
        let moved: Vec<Point> = pts
            .iter()
            .zip(&dirs)
            .map(|(x, a)| {
                let frame = s.tangent_basis(x);
                let u: Vec<f64> = frame[0].iter().zip(&frame[1]).map(|(e, f)| delta * (a.cos() * e + a.sin() * f)).collect();
                s.exp(x, &u).unwrap()
            })
            .collect();
        let w = vec![0.5, 0.3, 0.2];
        let diameter = pts
            .iter()
            .chain(&moved)
            .flat_map(|a| pts.iter().chain(&moved).map(move |b| (a, b)))
            .map(|(a, b)| s.dist(a, b).unwrap())
            .fold(0.0, f64::max);
        // m(x) = min_y sum l_i h(d(y, x_i)) moves by at most max h' * delta
        let lip = h.deriv(diameter);
        let a = barycenter_cost(&s, &h, &Configuration::new(pts, w.clone()).unwrap()).unwrap();
        let b = barycenter_cost(&s, &h, &Configuration::new(moved, w).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= lip * delta + 1e-12, "{} vs {}", (a - b).abs(), lip * delta);
    }
}
