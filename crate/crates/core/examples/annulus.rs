//! Splitting a widely spread measure into bounded annuli.

use hbary::diagnostics::annulus_decompose;
use hbary::geometry::{Chart, Point};
use hbary::transport::DiscreteMeasure;

fn main() -> hbary::Result<()> {
    let plane = Chart::euclidean(2);
    let pts: Vec<Point> = (0..40)
        .map(|k| {
            let r = 0.1 * k as f64 + 0.05;
            let a = 2.4 * k as f64;
            Point::new([r * a.cos(), r * a.sin()])
        })
        .collect();
    let w = vec![1.0; pts.len()];
    let mu = DiscreteMeasure::new(plane, pts, w)?;
    for piece in annulus_decompose(&mu, &[0.0, 0.0], 5)? {
        println!(
            "[{:.3}, {:.3}): mass {:.3}, {} atoms",
            piece.inner,
            piece.outer,
            piece.mass,
            piece.measure.len()
        );
    }
    Ok(())
}
