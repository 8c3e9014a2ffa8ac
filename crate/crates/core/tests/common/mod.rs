//! Shared generators for the property suites. Each test target compiles
//! this module separately, so not every item is used everywhere.
#![allow(dead_code)]

use lttext::geometry::{Point, Polygon};
use rand::Rng;

pub const TAU: f64 = std::f64::consts::TAU;

/// Random star-shaped polygon: vertices at sorted angles around a center
/// with independently random radii. Distinct angles make the ring simple by
/// construction; varying radii make most outputs concave.
pub fn star_polygon<R: Rng>(
    rng: &mut R,
    center: (f64, f64),
    vertex_range: (usize, usize),
    scale: f64,
) -> Polygon {
    let n = rng.gen_range(vertex_range.0..=vertex_range.1);
    loop {
        let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let min_gap = 0.08;
        let wrap_gap = TAU - (angles[n - 1] - angles[0]);
        if angles.windows(2).any(|w| w[1] - w[0] < min_gap) || wrap_gap < min_gap {
            continue;
        }
        let points: Vec<Point> = angles
            .iter()
            .map(|&a| {
                let r = rng.gen_range(0.35..1.0) * scale;
                Point::new(center.0 + r * a.cos(), center.1 + r * a.sin())
            })
            .collect();
        if let Ok(p) = Polygon::new(points) {
            return p;
        }
    }
}

/// A pair of polygons that usually overlap: the second is centered within
/// one diameter of the first.
pub fn polygon_pair<R: Rng>(rng: &mut R) -> (Polygon, Polygon) {
    let scale = rng.gen_range(5.0..60.0);
    let cx = rng.gen_range(-100.0..100.0);
    let cy = rng.gen_range(-100.0..100.0);
    let a = star_polygon(rng, (cx, cy), (4, 12), scale);
    let dx = rng.gen_range(-1.2..1.2) * scale;
    let dy = rng.gen_range(-1.2..1.2) * scale;
    let scale_b = scale * rng.gen_range(0.5..1.5);
    let b = star_polygon(rng, (cx + dx, cy + dy), (4, 12), scale_b);
    (a, b)
}
