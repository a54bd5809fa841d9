//! Planar geometry for convex cells: shoelace area and its time derivative,
//! polygon centroid, half-plane intersection by incremental clipping, and the
//! Chebyshev center (largest inscribed circle) of a convex polygon.
//!
//! All polygons are wound clockwise and validated as strictly convex.
//! Computations are plain `f64` with explicit tolerances; there is no exact
//! arithmetic fallback.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use thiserror::Error;

/// Consecutive vertices closer than this are merged (meters).
pub const VERTEX_MERGE_TOLERANCE: f64 = 1e-9;
/// Cross products of consecutive edges below this flag a degenerate polygon (m^2).
pub const CONVEXITY_TOLERANCE: f64 = 1e-12;
/// Half-width of the clipping box that seeds half-plane intersection (meters).
pub const CLIP_BOX_HALF_WIDTH: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("coordinate is not finite")]
    NonFinite,
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("consecutive vertices {0} and {1} are closer than the merge tolerance")]
    DegenerateEdge(usize, usize),
    #[error("polygon is not strictly convex at vertex {0}")]
    NotStrictlyConvex(usize),
    #[error("polygon is wound counter-clockwise; clockwise order is required")]
    CounterClockwise,
    #[error("half-plane normal has near-zero length")]
    ZeroNormal,
    #[error("seed point violates half-plane {0}")]
    SeedInfeasible(usize),
    #[error("half-plane intersection is unbounded")]
    UnboundedIntersection,
    #[error("half-plane intersection is empty or degenerate")]
    EmptyIntersection,
    #[error("expected {expected} vertex velocities, got {got}")]
    VelocityCountMismatch { expected: usize, got: usize },
    #[error("regular polygon needs at least 3 sides, got {0}")]
    TooFewSides(usize),
    #[error("area must be positive, got {0}")]
    NonPositiveArea(f64),
}

/// Position in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

/// Displacement or velocity in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: Point2) -> f64 {
        (*self - other).norm()
    }

    pub fn midpoint(&self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub const fn zero() -> Self {
        Vec2 { x: 0.0, y: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(&self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product; negative for a right turn.
    pub fn cross(&self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(*self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalized(&self) -> Result<Vec2, GeometryError> {
        let n = self.norm();
        if n < VERTEX_MERGE_TOLERANCE {
            return Err(GeometryError::ZeroNormal);
        }
        Ok(*self / n)
    }
}

impl Sub for Point2 {
    type Output = Vec2;
    fn sub(self, rhs: Point2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Add<Vec2> for Point2 {
    type Output = Point2;
    fn add(self, rhs: Vec2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub<Vec2> for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Vec2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

/// Closed half-plane `{ x : normal . x <= offset }` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    normal: Vec2,
    offset: f64,
}

impl HalfPlane {
    /// Builds the half-plane, normalizing `normal`. Rejects near-zero normals.
    pub fn new(normal: Vec2, offset: f64) -> Result<Self, GeometryError> {
        if !normal.is_finite() || !offset.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let n = normal.norm();
        if n < VERTEX_MERGE_TOLERANCE {
            return Err(GeometryError::ZeroNormal);
        }
        Ok(HalfPlane {
            normal: normal / n,
            offset: offset / n,
        })
    }

    /// Half-plane of points at least as close to `near` as to `far`:
    /// the perpendicular bisector of the segment, containing `near`.
    pub fn bisector_toward(near: Point2, far: Point2) -> Result<Self, GeometryError> {
        let normal = (far - near).normalized()?;
        let offset = normal.dot(near.midpoint(far) - Point2::default());
        Ok(HalfPlane { normal, offset })
    }

    pub fn normal(&self) -> Vec2 {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `normal . p - offset`; non-positive inside the half-plane.
    pub fn signed_distance(&self, p: Point2) -> f64 {
        self.normal.x * p.x + self.normal.y * p.y - self.offset
    }

    pub fn contains(&self, p: Point2, tolerance: f64) -> bool {
        self.signed_distance(p) <= tolerance
    }

    /// Mirror image of `p` across the boundary line.
    pub fn reflect(&self, p: Point2) -> Point2 {
        p + self.normal * (-2.0 * self.signed_distance(p))
    }

    /// Intersection point of two boundary lines, if they are not parallel.
    pub fn line_intersection(&self, other: &HalfPlane) -> Option<Point2> {
        let det = self.normal.cross(other.normal);
        if det.abs() < CONVEXITY_TOLERANCE {
            return None;
        }
        let x = (self.offset * other.normal.y - other.offset * self.normal.y) / det;
        let y = (self.normal.x * other.offset - other.normal.x * self.offset) / det;
        Some(Point2::new(x, y))
    }
}

/// Strictly convex polygon with clockwise vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl ConvexPolygon {
    /// Validates vertex count, finiteness, edge lengths, strict convexity and
    /// clockwise winding.
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        for i in 0..n {
            let j = (i + 1) % n;
            if vertices[i].distance(vertices[j]) < VERTEX_MERGE_TOLERANCE {
                return Err(GeometryError::DegenerateEdge(i, j));
            }
        }
        let mut positive = 0usize;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let cross = (b - a).cross(c - b);
            if cross.abs() <= CONVEXITY_TOLERANCE {
                return Err(GeometryError::NotStrictlyConvex((i + 1) % n));
            }
            if cross > 0.0 {
                positive += 1;
            }
        }
        if positive == n {
            return Err(GeometryError::CounterClockwise);
        }
        if positive != 0 {
            let i = (0..n)
                .find(|&i| {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    (b - a).cross(c - b) > 0.0
                })
                .unwrap();
            return Err(GeometryError::NotStrictlyConvex((i + 1) % n));
        }
        Ok(ConvexPolygon { vertices })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Positive area by the shoelace formula. The raw signed sum is negative
    /// for clockwise winding and is negated here.
    pub fn area(&self) -> f64 {
        -0.5 * self.signed_double_area_sum()
    }

    fn signed_double_area_sum(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        let mut acc = 0.0;
        for i in 0..n {
            let j = (i + 1) % n;
            acc += v[i].x * v[j].y - v[j].x * v[i].y;
        }
        acc
    }

    /// Instantaneous rate of change of `area()` when vertex `i` moves with
    /// `velocities[i]`. Exact chain rule of the shoelace sum, with the same
    /// sign convention as `area()` so a uniform contraction gives a negative
    /// rate.
    pub fn area_rate(&self, velocities: &[Vec2]) -> Result<f64, GeometryError> {
        let v = &self.vertices;
        let n = v.len();
        if velocities.len() != n {
            return Err(GeometryError::VelocityCountMismatch {
                expected: n,
                got: velocities.len(),
            });
        }
        let mut acc = 0.0;
        for i in 0..n {
            let prev = v[(i + n - 1) % n];
            let next = v[(i + 1) % n];
            acc += (prev.y - next.y) * velocities[i].x + (next.x - prev.x) * velocities[i].y;
        }
        Ok(0.5 * acc)
    }

    /// Area centroid. Consistent for either winding because the signed area
    /// cancels.
    pub fn centroid(&self) -> Point2 {
        let v = &self.vertices;
        let n = v.len();
        let mut a = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let p = v[i];
            let q = v[(i + 1) % n];
            let w = p.x * q.y - q.x * p.y;
            a += w;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        a *= 0.5;
        Point2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Outward half-plane of edge `i` (from vertex `i` to vertex `i + 1`).
    pub fn edge_half_plane(&self, i: usize) -> HalfPlane {
        let n = self.vertices.len();
        let a = self.vertices[i % n];
        let b = self.vertices[(i + 1) % n];
        let e = b - a;
        // clockwise winding: rotating the edge by +90 degrees points outward
        let normal = Vec2::new(-e.y, e.x) / e.norm();
        HalfPlane {
            normal,
            offset: normal.dot(a - Point2::default()),
        }
    }

    /// Distance from an interior point to the polygon boundary
    /// (minimum over edge lines); negative if the point is outside.
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        (0..self.vertices.len())
            .map(|i| -self.edge_half_plane(i).signed_distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: Point2, tolerance: f64) -> bool {
        self.boundary_distance(p) >= -tolerance
    }

    /// Center and radius of the largest inscribed circle.
    ///
    /// Solves the small linear program max r s.t. n_i . c + r <= o_i by
    /// enumerating triples of active edges; the optimum of the bounded LP is
    /// attained at one of them. Deterministic: ties keep the first maximizer
    /// in edge-index order.
    pub fn chebyshev_center(&self) -> (Point2, f64) {
        let n = self.vertices.len();
        let planes: Vec<HalfPlane> = (0..n).map(|i| self.edge_half_plane(i)).collect();
        let feasible = |c: Point2, r: f64| {
            planes
                .iter()
                .all(|h| h.signed_distance(c) + r <= 1e-9)
        };
        let mut best: Option<(Point2, f64)> = None;
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let Some((c, r)) = solve_three_plane_circle(&planes[i], &planes[j], &planes[k])
                    else {
                        continue;
                    };
                    if r <= 0.0 || !c.is_finite() || !feasible(c, r) {
                        continue;
                    }
                    if best.map_or(true, |(_, rb)| r > rb) {
                        best = Some((c, r));
                    }
                }
            }
        }
        best.expect("valid convex polygon admits an inscribed circle")
    }
}

/// Solves n_a.c + r = o_a (three equations) for the circle center and radius.
fn solve_three_plane_circle(a: &HalfPlane, b: &HalfPlane, c: &HalfPlane) -> Option<(Point2, f64)> {
    // 3x3 system [n_x n_y 1][cx cy r]^T = o, solved by Cramer's rule.
    let m = [
        [a.normal.x, a.normal.y, 1.0],
        [b.normal.x, b.normal.y, 1.0],
        [c.normal.x, c.normal.y, 1.0],
    ];
    let rhs = [a.offset, b.offset, c.offset];
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(&m);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut mx = m;
    for (row, &b) in rhs.iter().enumerate() {
        mx[row][0] = b;
    }
    let mut my = m;
    for (row, &b) in rhs.iter().enumerate() {
        my[row][1] = b;
    }
    let mut mr = m;
    for (row, &b) in rhs.iter().enumerate() {
        mr[row][2] = b;
    }
    Some((
        Point2::new(det3(&mx) / d, det3(&my) / d),
        det3(&mr) / d,
    ))
}

/// Inscribed-circle radius of a regular polygon with the given area and side
/// count: sqrt(area / (m tan(pi/m))).
pub fn regular_polygon_inscribed_radius(area: f64, sides: usize) -> Result<f64, GeometryError> {
    if sides < 3 {
        return Err(GeometryError::TooFewSides(sides));
    }
    if !(area > 0.0) {
        return Err(GeometryError::NonPositiveArea(area));
    }
    let m = sides as f64;
    Ok((area / (m * (std::f64::consts::PI / m).tan())).sqrt())
}

/// Intersection of half-planes as a clockwise convex polygon.
///
/// `seed` must strictly satisfy every half-plane; the intersection must be
/// bounded, otherwise `UnboundedIntersection` is returned.
pub fn halfplane_intersection(
    planes: &[HalfPlane],
    seed: Point2,
) -> Result<ConvexPolygon, GeometryError> {
    halfplane_intersection_tagged(planes, seed).map(|(poly, _)| poly)
}

/// Like [`halfplane_intersection`], additionally reporting for each polygon
/// edge the index of the half-plane whose boundary carries it. Edge `i` runs
/// from vertex `i` to vertex `i + 1`.
pub fn halfplane_intersection_tagged(
    planes: &[HalfPlane],
    seed: Point2,
) -> Result<(ConvexPolygon, Vec<usize>), GeometryError> {
    if !seed.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    for (i, h) in planes.iter().enumerate() {
        if h.signed_distance(seed) >= 0.0 {
            return Err(GeometryError::SeedInfeasible(i));
        }
    }

    // Start from a large clockwise box around the seed; box edges keep a
    // `None` tag so survivors reveal an unbounded intersection.
    let w = CLIP_BOX_HALF_WIDTH;
    let mut poly: Vec<(Point2, Option<usize>)> = [(-w, -w), (-w, w), (w, w), (w, -w)]
        .iter()
        .map(|&(dx, dy)| (seed + Vec2::new(dx, dy), None))
        .collect();

    for (idx, plane) in planes.iter().enumerate() {
        poly = clip(&poly, plane, idx);
        if poly.len() < 3 {
            return Err(GeometryError::EmptyIntersection);
        }
    }

    if poly.iter().any(|(_, tag)| tag.is_none()) {
        return Err(GeometryError::UnboundedIntersection);
    }

    // Re-derive each vertex from its two adjacent planes. This removes the
    // error accumulated by chained segment interpolation during clipping.
    let n = poly.len();
    let snapped: Vec<(Point2, usize)> = (0..n)
        .map(|i| {
            let prev_tag = poly[(i + n - 1) % n].1.unwrap();
            let tag = poly[i].1.unwrap();
            let v = planes[prev_tag]
                .line_intersection(&planes[tag])
                .unwrap_or(poly[i].0);
            (v, tag)
        })
        .collect();

    // Drop edges shorter than the merge tolerance; their half-plane grazes a
    // corner and contributes no edge.
    let mut vertices = Vec::with_capacity(n);
    let mut tags = Vec::with_capacity(n);
    for i in 0..n {
        let (v, tag) = snapped[i];
        let (next, _) = snapped[(i + 1) % n];
        if v.distance(next) < VERTEX_MERGE_TOLERANCE {
            continue;
        }
        vertices.push(v);
        tags.push(tag);
    }

    let polygon = ConvexPolygon::new(vertices)?;
    Ok((polygon, tags))
}

fn clip(
    poly: &[(Point2, Option<usize>)],
    plane: &HalfPlane,
    src: usize,
) -> Vec<(Point2, Option<usize>)> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (a, tag) = poly[i];
        let (b, _) = poly[(i + 1) % n];
        let da = plane.signed_distance(a);
        let db = plane.signed_distance(b);
        let ina = da <= 0.0;
        let inb = db <= 0.0;
        if ina {
            out.push((a, tag));
        }
        if ina != inb {
            let t = da / (da - db);
            let p = a + (b - a) * t;
            // leaving: the boundary turns onto the clip line; entering: it
            // resumes the original edge.
            out.push((p, if ina { Some(src) } else { tag }));
        }
    }
    out
}
