mod common;

use std::f64::consts::PI;

use common::{geodesic_bilinear, geodesic_first, poincare_radial_length, simpson, sphere_point};
use hbary::geometry::{uniform_cell_volumes, Ball, Chart, Point};
use proptest::prelude::*;

#[test]
fn hyperbolic_distance_matches_the_integrated_metric() {
    let h = Chart::hyperbolic(2, -1.0);
    let d = h.dist(&[0.0, 0.0], &[0.5, 0.0]).unwrap();
    let oracle = poincare_radial_length(0.5);
    assert!((d - oracle).abs() < 1e-10, "{d} vs {oracle}");
    assert!((oracle - 3f64.ln()).abs() < 1e-10);

    // curvature -4 rescales the metric by 1/2
    let h4 = Chart::hyperbolic(2, -4.0);
    let d4 = h4.dist(&[0.0, 0.0], &[0.5, 0.0]).unwrap();
    assert!((d4 - 0.5 * oracle).abs() < 1e-10);
}

#[test]
fn hyperbolic_distance_off_the_diameter() {
    // integrate the conformal factor along the straight chord through the
    // origin containing both points
    let h = Chart::hyperbolic(2, -1.0);
    let (a, b) = ([-0.3 * 0.6, -0.3 * 0.8], [0.7 * 0.6, 0.7 * 0.8]);
    let oracle = simpson(|t| 2.0 / (1.0 - t * t), -0.3, 0.7, 4000);
    assert!((h.dist(&a, &b).unwrap() - oracle).abs() < 1e-10);
}

#[test]
fn hyperbolic_exp_has_requested_length_from_any_base() {
    let h = Chart::hyperbolic(2, -1.0);
    for (base, v) in [
        ([0.3, -0.2], [0.5, 0.1]),
        ([-0.7, 0.1], [1.5, -2.0]),
        ([0.0, 0.9], [0.0, -3.0]),
    ] {
        let y = h.exp(&base, &v).unwrap();
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        assert!((h.dist(&base, &y).unwrap() - n).abs() < 1e-9);
        let back = h.log(&base, &y).unwrap();
        assert!((back[0] - v[0]).abs() < 1e-9 && (back[1] - v[1]).abs() < 1e-9);
    }
}

#[test]
fn sphere_grad_dist_matches_central_differences() {
    let s = Chart::sphere(2, 1.0);
    let z = sphere_point(0.4, 1.0);
    let x = sphere_point(1.9, -0.6);
    let g = s.grad_dist(&z, &x).unwrap();
    let f = |p: &Point| s.dist(p, &x).unwrap();
    for e in s.tangent_basis(&z) {
        let fd = geodesic_first(&s, &f, &z, &e, 1e-5);
        let exact: f64 = g.iter().zip(&e).map(|(a, b)| a * b).sum();
        assert!((fd - exact).abs() < 1e-6, "{fd} vs {exact}");
    }
}

#[test]
fn hyperbolic_hess_dist_at_unit_distance() {
    let h = Chart::hyperbolic(2, -1.0);
    let z = [0.0, 0.0];
    let x = h.exp(&z, &[1.0, 0.0]).unwrap();
    let form = h.hess_dist(&z, &x).unwrap();
    let eig = form.eigen();
    assert!(eig[0].0.abs() < 1e-12);
    assert!((eig[1].0 - 1f64.cosh() / 1f64.sinh()).abs() < 1e-12);

    let f = |p: &Point| h.dist(p, &x).unwrap();
    for u in &form.frame {
        for v in &form.frame {
            let fd = geodesic_bilinear(&h, &f, &z, u, v, 1e-3);
            assert!((fd - form.apply(u, v)).abs() < 1e-7);
        }
    }
}

#[test]
fn sphere_hess_dist_matches_second_differences() {
    for k in [1.0, 4.0] {
        let s = Chart::sphere(2, k);
        let r = 1.0 / k.sqrt();
        let z = Point::new([0.0, 0.0, r]);
        let x = s.exp(&z, &[0.9 * r, 0.3 * r, 0.0]).unwrap();
        let form = s.hess_dist(&z, &x).unwrap();
        let f = |p: &Point| s.dist(p, &x).unwrap();
        for u in &form.frame {
            for v in &form.frame {
                let fd = geodesic_bilinear(&s, &f, &z, u, v, 1e-3);
                assert!(
                    (fd - form.apply(u, v)).abs() < 1e-6,
                    "K={k}: {fd} vs {}",
                    form.apply(u, v)
                );
            }
        }
    }
}

#[test]
fn cap_cells_sum_to_the_analytic_area() {
    for (k, theta) in [(1.0, 0.5), (4.0, 0.3), (0.25, 2.0)] {
        let s = Chart::sphere(2, k);
        let c = Point::new([0.0, 0.0, 1.0 / f64::sqrt(k)]);
        let cells = uniform_cell_volumes(&s, &Ball::new(c, theta), 5).unwrap();
        let area = 2.0 * PI * (1.0 - (k.sqrt() * theta).cos()) / k;
        assert!((cells.total_volume() - area).abs() < 0.01 * area);
        let v = cells.volumes();
        assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-9 * area));
    }
}

#[test]
fn hyperbolic_disk_area_is_the_integrated_volume_form() {
    let h = Chart::hyperbolic(2, -1.0);
    // area of a geodesic disk of radius rho: 2 pi (cosh rho - 1)
    let rho = 1.2;
    let oracle = simpson(|t| 2.0 * PI * t.sinh(), 0.0, rho, 1000);
    assert!((h.ball_volume(rho).unwrap() - oracle).abs() < 1e-9);
}

fn any_chart() -> impl Strategy<Value = Chart> {
    prop_oneof![
        Just(Chart::euclidean(2)),
        Just(Chart::euclidean(3)),
        Just(Chart::sphere(2, 1.0)),
        Just(Chart::sphere(2, 2.5)),
        Just(Chart::hyperbolic(2, -1.0)),
        Just(Chart::hyperbolic(2, -0.5)),
    ]
}

fn point_on(chart: Chart, raw: Vec<f64>) -> Point {
    match chart {
        Chart::Euclidean { dim } => Point::new(raw[..dim].iter().map(|x| 3.0 * x).collect::<Vec<_>>()),
        Chart::Sphere { curvature, .. } => {
            let v = &raw[..3];
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
            Point::new(v.iter().map(|x| x / n / curvature.sqrt()).collect::<Vec<_>>())
        }
        Chart::Hyperbolic { .. } => {
            let v = &raw[..2];
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let s = if n > 0.9 { 0.9 / n } else { 1.0 };
            Point::new(v.iter().map(|x| x * s).collect::<Vec<_>>())
        }
    }
}

fn raw3() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0..1.0f64, 3)
        .prop_filter("away from zero", |v| v.iter().map(|x| x.abs()).sum::<f64>() > 0.05)
}

proptest! {
    #[test]
    fn distance_is_a_metric(chart in any_chart(), a in raw3(), b in raw3(), c in raw3()) {
        let (x, y, z) = (point_on(chart, a), point_on(chart, b), point_on(chart, c));
        let dxy = chart.dist(&x, &y).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert!((dxy - chart.dist(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!(chart.dist(&x, &x).unwrap() < 1e-12);
        prop_assert!(chart.dist(&x, &z).unwrap() <= dxy + chart.dist(&y, &z).unwrap() + 1e-12);
    }

    #[test]
    fn log_inverts_exp_inside_the_injectivity_radius(chart in any_chart(), a in raw3(), dir in raw3(), frac in 0.0..0.95f64) {
        let x = point_on(chart, a);
        let v = chart.project_tangent(&x, &dir[..chart.ambient_dim()]);
        prop_assume!(v.norm() > 1e-3);
        let len = frac * chart.injectivity_radius().min(4.0);
        let v = v.scaled(len / v.norm());
        let y = chart.exp(&x, &v).unwrap();
        prop_assert!((chart.dist(&x, &y).unwrap() - len).abs() < 1e-9);
        let back = chart.log(&x, &y).unwrap();
        for (p, q) in back.iter().zip(v.iter()) {
            prop_assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn hess_dist_is_positive_semidefinite_below_the_conjugate_radius(chart in any_chart(), a in raw3(), b in raw3()) {
        let (x, y) = (point_on(chart, a), point_on(chart, b));
        let d = chart.dist(&x, &y).unwrap();
        prop_assume!(d > 1e-3 && d < 0.49 * chart.injectivity_radius());
        let eig = chart.hess_dist(&x, &y).unwrap().eigen();
        prop_assert!(eig[0].0 > -1e-12);
        prop_assert!(eig[0].0.abs() < 1e-9, "radial direction is flat");
    }
}
