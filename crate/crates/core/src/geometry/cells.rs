//! Equal-volume partitions of metric balls, in geodesic polar coordinates
//! about the ball's center.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{Chart, Point};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};

/// Closed metric ball `{ y : d(center, y) <= radius }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: impl Into<Point>, radius: f64) -> Self {
        Ball {
            center: center.into(),
            radius,
        }
    }

    pub fn volume(&self, chart: &Chart) -> Result<f64> {
        chart.ball_volume(self.radius)
    }

    pub fn contains(&self, chart: &Chart, p: &[f64]) -> bool {
        chart.dist_unchecked(&self.center, p) <= self.radius
    }

    /// Draws a point uniformly (w.r.t. Riemannian volume) from the ball.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, chart: &Chart, rng: &mut R) -> Result<Point> {
        let frame = chart.tangent_basis(&self.center);
        let v = match chart.dim() {
            1 => {
                let t = rng.random_range(-self.radius..=self.radius);
                frame[0].iter().map(|e| e * t).collect::<Vec<_>>()
            }
            2 => {
                let area = chart.disk_area(self.radius);
                let r = chart.disk_radius_for_area(rng.random::<f64>() * area);
                let th = rng.random::<f64>() * 2.0 * PI;
                let mut v = vec![0.0; chart.ambient_dim()];
                axpy(&mut v, r * th.cos(), &frame[0]);
                axpy(&mut v, r * th.sin(), &frame[1]);
                v
            }
            d => return Err(Error::Unsupported(format!("sampling in dimension {d}"))),
        };
        Ok(chart.exp_unchecked(&self.center, &v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Layout {
    /// `n` equal segments of the diameter.
    Line { n: usize },
    /// Equal-area rings (boundary radii) times equal angular sectors.
    Polar { ring_radii: Vec<f64>, sectors: usize },
}

/// A partition of a [`Ball`] into cells of equal Riemannian volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPartition {
    chart: Chart,
    region: Ball,
    frame: Vec<Vec<f64>>,
    layout: Layout,
    volumes: Vec<f64>,
}

/// Splits `region` into equal-volume cells: `resolution` segments in
/// dimension 1, `resolution` rings by `resolution` sectors in dimension 2.
pub fn uniform_cell_volumes(chart: &Chart, region: &Ball, resolution: usize) -> Result<CellPartition> {
    chart.check(&region.center)?;
    if !(region.radius > 0.0) {
        return Err(Error::DegenerateRegion(format!("radius {}", region.radius)));
    }
    if region.radius >= chart.injectivity_radius() {
        return Err(Error::DegenerateRegion(format!(
            "radius {} reaches the injectivity radius",
            region.radius
        )));
    }
    if resolution < 2 {
        return Err(Error::ResolutionTooCoarse(format!(
            "{resolution} cells per dimension (need at least 2)"
        )));
    }
    let frame = chart.tangent_basis(&region.center);
    let (layout, volumes) = match chart.dim() {
        1 => {
            let v = 2.0 * region.radius / resolution as f64;
            (Layout::Line { n: resolution }, vec![v; resolution])
        }
        2 => {
            let area = chart.disk_area(region.radius);
            let ring_radii: Vec<f64> = (0..=resolution)
                .map(|i| {
                    if i == resolution {
                        region.radius
                    } else {
                        chart.disk_radius_for_area(area * i as f64 / resolution as f64)
                    }
                })
                .collect();
            let n = resolution * resolution;
            (
                Layout::Polar {
                    ring_radii,
                    sectors: resolution,
                },
                vec![area / n as f64; n],
            )
        }
        d => return Err(Error::Unsupported(format!("cell partition in dimension {d}"))),
    };
    Ok(CellPartition {
        chart: *chart,
        region: region.clone(),
        frame,
        layout,
        volumes,
    })
}

impl CellPartition {
    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn max_volume(&self) -> f64 {
        self.volumes.iter().copied().fold(0.0, f64::max)
    }

    pub fn region(&self) -> &Ball {
        &self.region
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// Index of the cell containing `p`, or `None` outside the region.
    pub fn locate(&self, p: &[f64]) -> Option<usize> {
        let w = self.chart.log_unchecked(&self.region.center, p).ok()?;
        let slack = 1e-12 * self.region.radius.max(1.0);
        match &self.layout {
            Layout::Line { n } => {
                let t = dot(&w, &self.frame[0]);
                let r = self.region.radius;
                if t.abs() > r + slack {
                    return None;
                }
                let k = ((t + r) / (2.0 * r) * *n as f64).floor();
                Some((k.max(0.0) as usize).min(n - 1))
            }
            Layout::Polar { ring_radii, sectors } => {
                let a = dot(&w, &self.frame[0]);
                let b = dot(&w, &self.frame[1]);
                let r = a.hypot(b);
                if r > self.region.radius + slack {
                    return None;
                }
                let rings = ring_radii.len() - 1;
                let ring = ring_radii[1..].partition_point(|&s| s <= r).min(rings - 1);
                let mut th = b.atan2(a);
                if th < 0.0 {
                    th += 2.0 * PI;
                }
                let sec = ((th / (2.0 * PI) * *sectors as f64).floor() as usize).min(sectors - 1);
                Some(ring * sectors + sec)
            }
        }
    }

    /// A representative point of cell `k`: the volume-median radius and the
    /// middle angle (dimension 2) or the segment midpoint (dimension 1).
    pub fn cell_center(&self, k: usize) -> Point {
        let mut v = vec![0.0; self.chart.ambient_dim()];
        match &self.layout {
            Layout::Line { n } => {
                let r = self.region.radius;
                let t = -r + (k as f64 + 0.5) * 2.0 * r / *n as f64;
                axpy(&mut v, t, &self.frame[0]);
            }
            Layout::Polar { ring_radii, sectors } => {
                let rings = ring_radii.len() - 1;
                let (ring, sec) = (k / sectors, k % sectors);
                let area = self.chart.disk_area(self.region.radius);
                let rad = self
                    .chart
                    .disk_radius_for_area(area * (ring as f64 + 0.5) / rings as f64);
                let th = (sec as f64 + 0.5) * 2.0 * PI / *sectors as f64;
                axpy(&mut v, rad * th.cos(), &self.frame[0]);
                axpy(&mut v, rad * th.sin(), &self.frame[1]);
            }
        }
        self.chart.exp_unchecked(&self.region.center, &v)
    }

    /// Sums point masses per cell; mass falling outside the region is
    /// returned separately.
    pub fn bin_masses(&self, points: &[Point], masses: &[f64]) -> (Vec<f64>, f64) {
        let mut out = vec![0.0; self.len()];
        let mut outside = 0.0;
        for (p, m) in points.iter().zip(masses) {
            match self.locate(p) {
                Some(k) => out[k] += m,
                None => outside += m,
            }
        }
        (out, outside)
    }
}
