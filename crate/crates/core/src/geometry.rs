//! Planar polygon arithmetic: area, intersection, union and IoU.
//!
//! Ground truth for curved text is non-convex, so intersection areas are
//! computed with a general simple-polygon procedure: one operand is
//! triangulated by ear clipping and the other is clipped against every
//! triangle with Sutherland-Hodgman. The clip output may contain degenerate
//! connector edges when the true intersection is disconnected, but those
//! edges enclose no area, so the shoelace sum over the clip output is still
//! the exact intersection area.
//!
//! [`rasterized_iou_oracle`] provides an independent second route (scanline
//! counting of grid-cell centers) used by the test suites to bound the
//! clipping error.

use thiserror::Error;

/// Tolerance for merging consecutive duplicate vertices, in pixels.
const VERTEX_MERGE_TOL: f64 = 1e-6;

/// Polygons with absolute area at or below this are rejected as degenerate.
const MIN_AREA: f64 = 1e-9;

/// Cross products with absolute value at or below this count as collinear.
const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("polygon is degenerate: fewer than 3 distinct vertices or zero area")]
    DegeneratePolygon,
    #[error("polygon boundary intersects itself")]
    SelfIntersecting,
    #[error("coordinate is not finite")]
    NonFinite,
}

/// A point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Twice the signed area of triangle (a, b, c); positive when CCW.
fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn dist2(a: Point, b: Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

/// A validated simple polygon.
///
/// Construction merges consecutive duplicate vertices, rejects degenerate or
/// self-intersecting rings, and normalizes the winding to counter-clockwise.
/// Every operation in this module assumes those invariants, so they never
/// fail at call time.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
    area: f64,
}

impl Polygon {
    pub fn new(points: Vec<Point>) -> Result<Self, GeometryError> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let vertices = merge_duplicates(points);
        if vertices.len() < 3 {
            return Err(GeometryError::DegeneratePolygon);
        }
        let signed = shoelace(&vertices);
        if signed.abs() <= MIN_AREA {
            return Err(GeometryError::DegeneratePolygon);
        }
        let vertices = if signed < 0.0 {
            vertices.into_iter().rev().collect()
        } else {
            vertices
        };
        check_simple(&vertices)?;
        let area = signed.abs();
        Ok(Polygon { vertices, area })
    }

    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self, GeometryError> {
        Self::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    /// Axis-aligned rectangle helper, used heavily by tests and fixtures.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        Self::from_coords(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Absolute shoelace area, cached at construction.
    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut min = self.vertices[0];
        let mut max = self.vertices[0];
        for p in &self.vertices {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        (min, max)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Polygon {
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
            area: self.area,
        }
    }

    pub fn scaled(&self, s: f64) -> Result<Polygon, GeometryError> {
        Polygon::new(
            self.vertices
                .iter()
                .map(|p| Point::new(p.x * s, p.y * s))
                .collect(),
        )
    }

    /// Ear-clipping triangulation. Valid for any simple polygon; collinear
    /// ears are dropped since they enclose no area.
    fn triangulate(&self) -> Vec<[Point; 3]> {
        let mut idx: Vec<usize> = (0..self.vertices.len()).collect();
        let v = &self.vertices;
        let mut tris = Vec::with_capacity(v.len().saturating_sub(2));
        while idx.len() > 3 {
            let n = idx.len();
            let mut clipped = false;
            let mut best_fallback = (0usize, f64::NEG_INFINITY);
            for i in 0..n {
                let prev = v[idx[(i + n - 1) % n]];
                let cur = v[idx[i]];
                let next = v[idx[(i + 1) % n]];
                let cross = orient(prev, cur, next);
                if cross > best_fallback.1 {
                    best_fallback = (i, cross);
                }
                if cross.abs() <= COLLINEAR_TOL {
                    // Zero-area corner: remove without emitting a triangle.
                    idx.remove(i);
                    clipped = true;
                    break;
                }
                if cross < 0.0 {
                    continue; // reflex corner, not an ear
                }
                let blocked = idx.iter().enumerate().any(|(j, &vj)| {
                    if j == (i + n - 1) % n || j == i || j == (i + 1) % n {
                        return false;
                    }
                    point_strictly_in_triangle(v[vj], prev, cur, next)
                });
                if !blocked {
                    tris.push([prev, cur, next]);
                    idx.remove(i);
                    clipped = true;
                    break;
                }
            }
            if !clipped {
                // Numerical stall on a near-degenerate ring: clip the most
                // convex corner anyway so the loop terminates.
                let i = best_fallback.0;
                let prev = v[idx[(i + n - 1) % n]];
                let cur = v[idx[i]];
                let next = v[idx[(i + 1) % n]];
                if orient(prev, cur, next) > 0.0 {
                    tris.push([prev, cur, next]);
                }
                idx.remove(i);
            }
        }
        if idx.len() == 3 {
            let t = [v[idx[0]], v[idx[1]], v[idx[2]]];
            if orient(t[0], t[1], t[2]) > COLLINEAR_TOL {
                tris.push(t);
            }
        }
        tris
    }
}

fn merge_duplicates(points: Vec<Point>) -> Vec<Point> {
    let tol2 = VERTEX_MERGE_TOL * VERTEX_MERGE_TOL;
    let mut out: Vec<Point> = Vec::with_capacity(points.len());
    for p in points {
        if out.last().is_none_or(|&last| dist2(last, p) > tol2) {
            out.push(p);
        }
    }
    while out.len() >= 2 && dist2(out[0], *out.last().unwrap()) <= tol2 {
        out.pop();
    }
    out
}

/// Signed shoelace area (positive for CCW rings).
fn shoelace(vertices: &[Point]) -> f64 {
    let mut sum = 0.0;
    for (i, p) in vertices.iter().enumerate() {
        let q = vertices[(i + 1) % vertices.len()];
        sum += p.x * q.y - q.x * p.y;
    }
    sum / 2.0
}

fn point_strictly_in_triangle(p: Point, a: Point, b: Point, c: Point) -> bool {
    orient(a, b, p) > COLLINEAR_TOL
        && orient(b, c, p) > COLLINEAR_TOL
        && orient(c, a, p) > COLLINEAR_TOL
}

/// Rejects spikes (adjacent edges folding back over each other), proper
/// crossings, and collinear overlaps between non-adjacent edges. Vertices
/// merely touching another edge are tolerated; annotation data contains such
/// contacts and they do not affect any area computation.
fn check_simple(v: &[Point]) -> Result<(), GeometryError> {
    let n = v.len();
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        let c = v[(i + 2) % n];
        let ab = Point::new(b.x - a.x, b.y - a.y);
        let bc = Point::new(c.x - b.x, c.y - b.y);
        let cross = ab.x * bc.y - ab.y * bc.x;
        let dot = ab.x * bc.x + ab.y * bc.y;
        if cross.abs() <= COLLINEAR_TOL && dot < 0.0 {
            return Err(GeometryError::SelfIntersecting);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            // Skip adjacent edge pairs (they share an endpoint).
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (p1, p2) = (v[i], v[(i + 1) % n]);
            let (p3, p4) = (v[j], v[(j + 1) % n]);
            if edges_cross(p1, p2, p3, p4) {
                return Err(GeometryError::SelfIntersecting);
            }
        }
    }
    Ok(())
}

fn edges_cross(p1: Point, p2: Point, p3: Point, p4: Point) -> bool {
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    let straddle1 =
        (d1 > COLLINEAR_TOL && d2 < -COLLINEAR_TOL) || (d1 < -COLLINEAR_TOL && d2 > COLLINEAR_TOL);
    let straddle2 =
        (d3 > COLLINEAR_TOL && d4 < -COLLINEAR_TOL) || (d3 < -COLLINEAR_TOL && d4 > COLLINEAR_TOL);
    if straddle1 && straddle2 {
        return true;
    }
    // Collinear edges overlapping over a positive length, projected onto
    // the axis the segments span widest.
    if d1.abs() <= COLLINEAR_TOL
        && d2.abs() <= COLLINEAR_TOL
        && d3.abs() <= COLLINEAR_TOL
        && d4.abs() <= COLLINEAR_TOL
    {
        let span_x = (p1.x - p2.x).abs().max((p3.x - p4.x).abs());
        let span_y = (p1.y - p2.y).abs().max((p3.y - p4.y).abs());
        let (lo1, hi1, lo2, hi2) = if span_x >= span_y {
            (
                p1.x.min(p2.x),
                p1.x.max(p2.x),
                p3.x.min(p4.x),
                p3.x.max(p4.x),
            )
        } else {
            (
                p1.y.min(p2.y),
                p1.y.max(p2.y),
                p3.y.min(p4.y),
                p3.y.max(p4.y),
            )
        };
        return hi1.min(hi2) - lo1.max(lo2) > VERTEX_MERGE_TOL;
    }
    false
}

/// Even-odd point-in-polygon test (half-open crossing rule).
pub fn point_in_polygon(p: Point, poly: &Polygon) -> bool {
    let v = poly.vertices();
    let mut inside = false;
    let n = v.len();
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        if (a.y <= p.y) != (b.y <= p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Clips `subject` against a convex CCW ring. The output may carry duplicate
/// or connector vertices; only its shoelace area is meaningful.
fn clip_to_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out = subject.to_vec();
    let m = clip.len();
    for e in 0..m {
        if out.is_empty() {
            break;
        }
        let a = clip[e];
        let b = clip[(e + 1) % m];
        let input = std::mem::take(&mut out);
        let mut prev = *input.last().unwrap();
        let mut prev_side = orient(a, b, prev);
        for cur in input {
            let cur_side = orient(a, b, cur);
            let cur_in = cur_side >= 0.0;
            let prev_in = prev_side >= 0.0;
            if cur_in != prev_in {
                let t = prev_side / (prev_side - cur_side);
                out.push(Point::new(
                    prev.x + t * (cur.x - prev.x),
                    prev.y + t * (cur.y - prev.y),
                ));
            }
            if cur_in {
                out.push(cur);
            }
            prev = cur;
            prev_side = cur_side;
        }
    }
    out
}

fn bboxes_disjoint(a: &Polygon, b: &Polygon) -> bool {
    let (amin, amax) = a.bounding_box();
    let (bmin, bmax) = b.bounding_box();
    amax.x < bmin.x || bmax.x < amin.x || amax.y < bmin.y || bmax.y < amin.y
}

/// Area of the geometric intersection of two simple polygons.
pub fn intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    if bboxes_disjoint(a, b) {
        return 0.0;
    }
    // Triangulate the polygon with fewer vertices; clip the other against
    // each triangle and sum the shoelace areas.
    let (subject, clip) = if a.vertices.len() <= b.vertices.len() {
        (b, a)
    } else {
        (a, b)
    };
    let mut total = 0.0;
    for tri in clip.triangulate() {
        let piece = clip_to_convex(subject.vertices(), &tri);
        if piece.len() >= 3 {
            total += shoelace(&piece).max(0.0);
        }
    }
    total
}

/// Intersection over union. Always in [0, 1] up to rounding noise.
pub fn iou(a: &Polygon, b: &Polygon) -> f64 {
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

/// Intersection area divided by the area of the first polygon; the overlap
/// ratio used for don't-care suppression.
pub fn intersection_over_first(a: &Polygon, b: &Polygon) -> f64 {
    intersection_area(a, b) / a.area()
}

/// IoU estimated by classifying grid-cell centers over the joint bounding
/// box with the even-odd rule, `resolution` cells per axis.
///
/// Cell centers are classified row by row from the sorted edge crossings of
/// each polygon, which is equivalent to a point-in-polygon test per center
/// but runs in O(resolution x edges). This route shares no code with the
/// clipping-based [`iou`] and serves as its test oracle.
pub fn rasterized_iou_oracle(a: &Polygon, b: &Polygon, resolution: u32) -> f64 {
    assert!(resolution >= 64, "oracle resolution must be >= 64");
    let (amin, amax) = a.bounding_box();
    let (bmin, bmax) = b.bounding_box();
    let xmin = amin.x.min(bmin.x);
    let ymin = amin.y.min(bmin.y);
    let xmax = amax.x.max(bmax.x);
    let ymax = amax.y.max(bmax.y);
    let res = resolution as usize;
    let dx = (xmax - xmin) / res as f64;
    let dy = (ymax - ymin) / res as f64;
    if dx <= 0.0 || dy <= 0.0 {
        return 0.0;
    }

    let mut inter_cells: u64 = 0;
    let mut union_cells: u64 = 0;
    let mut xs_a = Vec::new();
    let mut xs_b = Vec::new();
    for row in 0..res {
        let y = ymin + (row as f64 + 0.5) * dy;
        row_crossings(a, y, &mut xs_a);
        row_crossings(b, y, &mut xs_b);
        let cells_a = cells_in_intervals(&xs_a, xmin, dx, res);
        let cells_b = cells_in_intervals(&xs_b, xmin, dx, res);
        let both = cells_overlap(&xs_a, &xs_b, xmin, dx, res);
        inter_cells += both;
        union_cells += cells_a + cells_b - both;
    }
    if union_cells == 0 {
        return 0.0;
    }
    inter_cells as f64 / union_cells as f64
}

/// Sorted x-coordinates where the polygon boundary crosses the horizontal
/// line at `y`, using the half-open vertex rule.
fn row_crossings(poly: &Polygon, y: f64, out: &mut Vec<f64>) {
    out.clear();
    let v = poly.vertices();
    let n = v.len();
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        if (a.y <= y) != (b.y <= y) {
            out.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
        }
    }
    out.sort_by(f64::total_cmp);
}

/// Number of cell centers x_k = xmin + (k + 0.5) dx lying inside [lo, hi].
fn cells_in_range(lo: f64, hi: f64, xmin: f64, dx: f64, res: usize) -> u64 {
    let k_lo = ((lo - xmin) / dx - 0.5).ceil().max(0.0) as i64;
    let k_hi = ((hi - xmin) / dx - 0.5).floor().min(res as f64 - 1.0) as i64;
    if k_hi < k_lo {
        0
    } else {
        (k_hi - k_lo + 1) as u64
    }
}

fn cells_in_intervals(xs: &[f64], xmin: f64, dx: f64, res: usize) -> u64 {
    xs.chunks_exact(2)
        .map(|c| cells_in_range(c[0], c[1], xmin, dx, res))
        .sum()
}

fn cells_overlap(xs_a: &[f64], xs_b: &[f64], xmin: f64, dx: f64, res: usize) -> u64 {
    let mut total = 0;
    for ca in xs_a.chunks_exact(2) {
        for cb in xs_b.chunks_exact(2) {
            let lo = ca[0].max(cb[0]);
            let hi = ca[1].min(cb[1]);
            if hi > lo {
                total += cells_in_range(lo, hi, xmin, dx, res);
            }
        }
    }
    total
}
