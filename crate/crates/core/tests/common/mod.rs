//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use hbary::geometry::{Chart, Point};
use nalgebra::{DMatrix, DVector};

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Hyperbolic length of the segment from the origin to `(r, 0)` in the
/// unit Poincare disk, integrating the conformal factor `2 / (1 - t^2)`.
pub fn poincare_radial_length(r: f64) -> f64 {
    simpson(|t| 2.0 / (1.0 - t * t), 0.0, r, 2000)
}

/// First derivative of `f` along the geodesic `exp_z(t u)` at `t = 0`.
pub fn geodesic_first(chart: &Chart, f: &dyn Fn(&Point) -> f64, z: &[f64], u: &[f64], h: f64) -> f64 {
    let at = |t: f64| f(&chart.exp(z, &u.iter().map(|c| c * t).collect::<Vec<_>>()).unwrap());
    (at(h) - at(-h)) / (2.0 * h)
}

/// Second derivative of `f` along `exp_z(t u)`, Richardson-extrapolated.
pub fn geodesic_second(chart: &Chart, f: &dyn Fn(&Point) -> f64, z: &[f64], u: &[f64], h: f64) -> f64 {
    let at = |t: f64| f(&chart.exp(z, &u.iter().map(|c| c * t).collect::<Vec<_>>()).unwrap());
    let f0 = at(0.0);
    let d = |h: f64| (at(h) - 2.0 * f0 + at(-h)) / (h * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// `H(u, v)` from second derivatives along `u`, `v`, `u + v` (polarization).
pub fn geodesic_bilinear(chart: &Chart, f: &dyn Fn(&Point) -> f64, z: &[f64], u: &[f64], v: &[f64], h: f64) -> f64 {
    let s: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + b).collect();
    let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    0.25 * (geodesic_second(chart, f, z, &s, h) - geodesic_second(chart, f, z, &d, h))
}

/// Minimum of `f` over `n` equispaced samples of `[a, b]`: (argmin, min).
pub fn grid_min_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> (f64, f64) {
    (0..n)
        .map(|k| {
            let t = a + (b - a) * k as f64 / (n - 1) as f64;
            (t, f(t))
        })
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap()
}

fn combinations(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        combinations(n, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Brute-force multi-marginal LP: enumerate every basis of the marginal
/// constraint matrix over all index tuples (row-major order) and return
/// the cheapest feasible vertex cost.
pub fn vertex_enumeration(sizes: &[usize], masses: &[Vec<f64>], cost: &[f64]) -> f64 {
    let tuples: usize = sizes.iter().product();
    let rows: usize = sizes.iter().sum();
    let mut a = DMatrix::<f64>::zeros(rows, tuples);
    for t in 0..tuples {
        let mut rem = t;
        let mut offset = rows;
        for &s in sizes.iter().rev() {
            offset -= s;
            a[(offset + rem % s, t)] = 1.0;
            rem /= s;
        }
    }
    let b = DVector::from_iterator(rows, masses.iter().flatten().copied());
    let rank = rows - sizes.len() + 1;
    let mut subsets = Vec::new();
    combinations(tuples, rank, 0, &mut Vec::new(), &mut subsets);
    let mut best = f64::INFINITY;
    for cols in subsets {
        let sub = DMatrix::from_fn(rows, rank, |r, c| a[(r, cols[c])]);
        let Some(inv) = (sub.transpose() * &sub).try_inverse() else {
            continue;
        };
        let x = inv * sub.transpose() * &b;
        if (&sub * &x - &b).norm() > 1e-10 || x.iter().any(|v| *v < -1e-12) {
            continue;
        }
        best = best.min(cols.iter().zip(x.iter()).map(|(&c, v)| cost[c] * v).sum());
    }
    best
}

pub fn sphere_point(theta: f64, phi: f64) -> Point {
    Point::new([theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()])
}
