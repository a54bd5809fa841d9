//! Construction of the evader's proximity cell: the set of points closer to
//! the evader than to any pursuer. While the evader lies strictly inside the
//! pursuers' convex hull this is a bounded convex polygon, obtained by
//! intersecting the perpendicular-bisector half-planes. Pursuers whose
//! bisector contributes an edge are *active*; the rest are redundant and are
//! commanded to stay put by the control layer.

use thiserror::Error;

use crate::geometry::{
    halfplane_intersection_tagged, ConvexPolygon, GeometryError, HalfPlane, Point2,
};

/// Two pursuers closer than this are treated as collocated (meters).
pub const COLLOCATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CellError {
    #[error("need at least 3 pursuers, got {0}")]
    TooFewPursuers(usize),
    #[error("pursuer {0} is collocated with the evader")]
    CollocatedAgents(usize),
    #[error("evader cell is unbounded: evader is outside the pursuers' convex hull")]
    UnboundedCell,
    #[error("evader lies outside the cell")]
    EvaderOutsideCell,
    #[error("degenerate cell geometry: {0}")]
    Degenerate(#[from] GeometryError),
}

/// One shared edge between the evader's cell and an active pursuer's cell.
/// `endpoints` are indices into the cell's clockwise vertex list and are
/// always cyclically adjacent: the edge runs from `endpoints.0` to
/// `endpoints.1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveEdge {
    pub pursuer: usize,
    pub endpoints: (usize, usize),
}

/// The evader's bounded Voronoi cell with per-pursuer edge bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityCell {
    polygon: ConvexPolygon,
    active: Vec<ActiveEdge>,
}

impl ProximityCell {
    pub fn polygon(&self) -> &ConvexPolygon {
        &self.polygon
    }

    pub fn vertices(&self) -> &[Point2] {
        self.polygon.vertices()
    }

    pub fn vertex_count(&self) -> usize {
        self.polygon.vertex_count()
    }

    /// Active edges in clockwise order (one per active pursuer).
    pub fn active(&self) -> &[ActiveEdge] {
        &self.active
    }

    pub fn active_pursuers(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().map(|e| e.pursuer)
    }

    pub fn edge_for_pursuer(&self, pursuer: usize) -> Option<ActiveEdge> {
        self.active.iter().copied().find(|e| e.pursuer == pursuer)
    }

    pub fn area(&self) -> f64 {
        self.polygon.area()
    }

    pub fn centroid(&self) -> Point2 {
        self.polygon.centroid()
    }
}

/// Builds the evader's proximity cell from agent positions.
///
/// Errors with [`CellError::UnboundedCell`] when the evader is on or outside
/// the pursuers' convex hull, and with [`CellError::CollocatedAgents`] when a
/// pursuer sits on the evader.
pub fn evader_cell(evader: Point2, pursuers: &[Point2]) -> Result<ProximityCell, CellError> {
    if pursuers.len() < 3 {
        return Err(CellError::TooFewPursuers(pursuers.len()));
    }
    let mut planes = Vec::with_capacity(pursuers.len());
    for (i, &p) in pursuers.iter().enumerate() {
        if evader.distance(p) <= COLLOCATION_TOLERANCE {
            return Err(CellError::CollocatedAgents(i));
        }
        planes.push(
            HalfPlane::bisector_toward(evader, p).map_err(|_| CellError::CollocatedAgents(i))?,
        );
    }
    let (polygon, tags) = match halfplane_intersection_tagged(&planes, evader) {
        Ok(out) => out,
        Err(GeometryError::UnboundedIntersection) => return Err(CellError::UnboundedCell),
        Err(e) => return Err(CellError::Degenerate(e)),
    };

    // Deterministic vertex origin: start from the vertex at the largest polar
    // angle about the evader, nearer vertex first on ties.
    let start = canonical_start(polygon.vertices(), evader);
    let n = polygon.vertex_count();
    let vertices: Vec<Point2> = (0..n)
        .map(|i| polygon.vertices()[(start + i) % n])
        .collect();
    let tags: Vec<usize> = (0..n).map(|i| tags[(start + i) % n]).collect();
    let polygon = ConvexPolygon::new(vertices)?;

    let active = tags
        .iter()
        .enumerate()
        .map(|(i, &pursuer)| ActiveEdge {
            pursuer,
            endpoints: (i, (i + 1) % n),
        })
        .collect();

    Ok(ProximityCell { polygon, active })
}

fn canonical_start(vertices: &[Point2], evader: Point2) -> usize {
    let key = |v: Point2| {
        let d = v - evader;
        (d.y.atan2(d.x), -d.norm())
    };
    let mut best = 0;
    for i in 1..vertices.len() {
        let (a, da) = key(vertices[i]);
        let (b, db) = key(vertices[best]);
        if (a, da) > (b, db) {
            best = i;
        }
    }
    best
}

/// Structural self-test: reflecting the evader across each active edge must
/// land on the owning pursuer. Returns the largest deviation in meters.
pub fn mirror_check(cell: &ProximityCell, evader: Point2, pursuers: &[Point2]) -> f64 {
    cell.active
        .iter()
        .map(|edge| {
            let h = cell.polygon.edge_half_plane(edge.endpoints.0);
            h.reflect(evader).distance(pursuers[edge.pursuer])
        })
        .fold(0.0, f64::max)
}

/// Minimum perpendicular distance from the evader to the cell boundary.
/// Twice this value is the distance to the closest pursuer.
pub fn min_evader_boundary_distance(
    cell: &ProximityCell,
    evader: Point2,
) -> Result<f64, CellError> {
    let d = cell.polygon.boundary_distance(evader);
    if d <= 0.0 {
        return Err(CellError::EvaderOutsideCell);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn cross_pursuers() -> Vec<Point2> {
        vec![
            Point2::new(1.0, 0.0),
            Point2::new(-1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.0, -1.0),
        ]
    }

    pub(crate) fn section_v_pursuers() -> Vec<Point2> {
        vec![
            Point2::new(-80.65, 44.48),
            Point2::new(63.63, -70.02),
            Point2::new(63.51, 31.92),
        ]
    }

    pub(crate) const SECTION_V_EVADER: Point2 = Point2::new(0.7438, 18.92);

    #[test]
    fn symmetric_cross_yields_square_cell() {
        let cell = evader_cell(Point2::new(0.0, 0.0), &cross_pursuers()).unwrap();
        assert_eq!(cell.vertex_count(), 4);
        assert_eq!(cell.active().len(), 4);
        assert!((cell.area() - 1.0).abs() < 1e-9);
        for v in cell.vertices() {
            assert!((v.x.abs() - 0.5).abs() < 1e-9);
            assert!((v.y.abs() - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn initial_configuration_cell() {
        let cell = evader_cell(SECTION_V_EVADER, &section_v_pursuers()).unwrap();
        assert_eq!(cell.active().len(), 3);
        let area = cell.area();
        assert!(
            (area - 13370.0).abs() / 13370.0 < 0.01,
            "area {area} not within 1% of 13370"
        );
    }

    #[test]
    fn evader_outside_hull_is_unbounded() {
        let pursuers = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let err = evader_cell(Point2::new(2.0, 2.0), &pursuers).unwrap_err();
        assert_eq!(err, CellError::UnboundedCell);
    }

    #[test]
    fn too_few_pursuers() {
        let err = evader_cell(Point2::new(0.0, 0.0), &cross_pursuers()[..2]).unwrap_err();
        assert_eq!(err, CellError::TooFewPursuers(2));
    }

    #[test]
    fn collocated_pursuer_detected() {
        let mut p = cross_pursuers();
        p.push(Point2::new(0.0, 5e-10));
        let err = evader_cell(Point2::new(0.0, 0.0), &p).unwrap_err();
        assert_eq!(err, CellError::CollocatedAgents(4));
    }

    #[test]
    fn redundant_pursuer_absent_from_active() {
        let mut p = cross_pursuers();
        p.push(Point2::new(5.0, 0.0)); // behind pursuer 0, never contributes
        let cell = evader_cell(Point2::new(0.0, 0.0), &p).unwrap();
        assert_eq!(cell.active().len(), 4);
        assert!(cell.edge_for_pursuer(4).is_none());
        assert!(cell.edge_for_pursuer(0).is_some());
    }

    #[test]
    fn mirror_check_on_cross_and_initial_configuration() {
        let cell = evader_cell(Point2::new(0.0, 0.0), &cross_pursuers()).unwrap();
        assert!(mirror_check(&cell, Point2::new(0.0, 0.0), &cross_pursuers()) < 1e-9);

        let p = section_v_pursuers();
        let cell = evader_cell(SECTION_V_EVADER, &p).unwrap();
        assert!(mirror_check(&cell, SECTION_V_EVADER, &p) < 1e-6);
    }

    #[test]
    fn vertices_equidistant_from_adjacent_generators() {
        let p = section_v_pursuers();
        let e = SECTION_V_EVADER;
        let cell = evader_cell(e, &p).unwrap();
        for edge in cell.active() {
            for &vi in [edge.endpoints.0, edge.endpoints.1].iter() {
                let v = cell.vertices()[vi];
                let de = v.distance(e);
                let dp = v.distance(p[edge.pursuer]);
                assert!(
                    (de - dp).abs() < 1e-6,
                    "vertex {vi} not equidistant: {de} vs {dp}"
                );
            }
        }
    }

    #[test]
    fn vertex_count_equals_active_count() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..100 {
            let (e, p) = random_configuration(&mut rng, 3 + rng.gen_range(0..6));
            let cell = evader_cell(e, &p).unwrap();
            assert_eq!(cell.vertex_count(), cell.active().len());
        }
    }

    #[test]
    fn min_boundary_distance_examples() {
        let cell = evader_cell(Point2::new(0.0, 0.0), &cross_pursuers()).unwrap();
        let d = min_evader_boundary_distance(&cell, Point2::new(0.0, 0.0)).unwrap();
        assert!((d - 0.5).abs() < 1e-9);
        let d = min_evader_boundary_distance(&cell, Point2::new(0.4, 0.0)).unwrap();
        assert!((d - 0.1).abs() < 1e-9);
        assert!(matches!(
            min_evader_boundary_distance(&cell, Point2::new(2.0, 0.0)),
            Err(CellError::EvaderOutsideCell)
        ));
    }

    #[test]
    fn min_boundary_distance_is_half_closest_pursuer_distance() {
        let p = section_v_pursuers();
        let e = SECTION_V_EVADER;
        let cell = evader_cell(e, &p).unwrap();
        let d = min_evader_boundary_distance(&cell, e).unwrap();
        let closest = p.iter().map(|&q| e.distance(q)).fold(f64::INFINITY, f64::min);
        assert!((2.0 * d - closest).abs() < 1e-9);
    }

    #[test]
    fn cell_invariant_under_pursuer_relabeling() {
        let mut rng = StdRng::seed_from_u64(17);
        let (e, p) = random_configuration(&mut rng, 5);
        let cell = evader_cell(e, &p).unwrap();
        let mut perm = p.clone();
        perm.rotate_left(2);
        let cell_perm = evader_cell(e, &perm).unwrap();
        assert_eq!(cell.vertex_count(), cell_perm.vertex_count());
        // canonical start vertex makes the vertex lists equal, not just
        // cyclically equal
        for (a, b) in cell.vertices().iter().zip(cell_perm.vertices()) {
            assert!(a.distance(*b) < 1e-9);
        }
        // active sets map through the relabeling p[i] == perm[(i + 3) % 5]
        let relabeled: Vec<usize> = cell
            .active_pursuers()
            .map(|i| (i + 5 - 2) % 5)
            .collect();
        let got: Vec<usize> = cell_perm.active_pursuers().collect();
        assert_eq!(relabeled, got);
    }

    #[test]
    fn grid_voronoi_area_agreement() {
        let mut rng = StdRng::seed_from_u64(29);
        for trial in 0..8 {
            let (e, p) = random_configuration(&mut rng, 3 + trial % 5);
            let cell = evader_cell(e, &p).unwrap();
            let (area, cellsize) = grid_voronoi_evader_area(e, &p, 260);
            let perimeter: f64 = (0..cell.vertex_count())
                .map(|i| {
                    cell.vertices()[i].distance(cell.vertices()[(i + 1) % cell.vertex_count()])
                })
                .sum();
            let tol = 2.0 * perimeter * cellsize + 4.0 * cellsize * cellsize;
            assert!(
                (cell.area() - area).abs() < tol,
                "cell {} vs grid {} (tol {tol})",
                cell.area(),
                area
            );
        }
    }

    /// Random pursuer ring with the evader inside the hull.
    pub(crate) fn random_configuration(rng: &mut StdRng, n: usize) -> (Point2, Vec<Point2>) {
        loop {
            let center = Point2::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
            let pursuers: Vec<Point2> = (0..n)
                .map(|_| {
                    let a = rng.gen_range(0.0..std::f64::consts::TAU);
                    let r = rng.gen_range(20.0..120.0);
                    center + Vec2::new(r * a.cos(), r * a.sin())
                })
                .collect();
            let evader = center
                + Vec2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            if evader_cell(evader, &pursuers).is_ok() {
                return (evader, pursuers);
            }
        }
    }

    /// Labels a dense grid by nearest agent and sums the evader-labeled cells.
    fn grid_voronoi_evader_area(e: Point2, pursuers: &[Point2], n: usize) -> (f64, f64) {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in pursuers.iter().chain(std::iter::once(&e)) {
            min = Point2::new(min.x.min(p.x), min.y.min(p.y));
            max = Point2::new(max.x.max(p.x), max.y.max(p.y));
        }
        let pad = 1.0;
        min = Point2::new(min.x - pad, min.y - pad);
        max = Point2::new(max.x + pad, max.y + pad);
        let dx = (max.x - min.x) / n as f64;
        let dy = (max.y - min.y) / n as f64;
        let mut count = 0usize;
        for i in 0..n {
            for j in 0..n {
                let p = Point2::new(
                    min.x + dx * (i as f64 + 0.5),
                    min.y + dy * (j as f64 + 0.5),
                );
                let de = (p - e).norm_squared();
                if pursuers.iter().all(|&q| de <= (p - q).norm_squared()) {
                    count += 1;
                }
            }
        }
        (count as f64 * dx * dy, dx.max(dy))
    }
}
