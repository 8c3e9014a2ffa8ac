//! Shared helpers for the criterion benchmarks.

use lttext::geometry::{Point, Polygon};

/// Deterministic star-shaped polygon around (cx, cy): radii vary per vertex,
/// so most outputs are concave.
pub fn star_polygon(cx: f64, cy: f64, vertices: usize, seed: u64) -> Polygon {
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let points: Vec<Point> = (0..vertices)
        .map(|i| {
            let angle = (i as f64 + 0.3 * next()) / vertices as f64 * std::f64::consts::TAU;
            let radius = 20.0 + 30.0 * next();
            Point::new(cx + radius * angle.cos(), cy + radius * angle.sin())
        })
        .collect();
    Polygon::new(points).expect("star polygons are simple")
}
