//! Pursuit control pipeline. Cell vertices are commanded toward the cell
//! centroid with gain `K`, which contracts the cell area at the exact rate
//! `-2 K A`. Differentiating the two vertex-equidistance constraints of each
//! shared edge turns those vertex velocities into a 2x2 linear solve for the
//! owning pursuer's velocity command. Redundant pursuers hold position.
//!
//! Also provides the evader policy library used by the scenarios and the
//! closed-form upper bound on capture time derived from the Chebyshev radius
//! of a regular polygon of matching area.

use thiserror::Error;

use crate::geometry::{regular_polygon_inscribed_radius, GeometryError, Point2, Vec2};
use crate::voronoi::ProximityCell;

/// Determinant of the edge-endpoint matrix below this is treated as singular
/// (square meters). Reached only when a pursuer collapses onto the evader,
/// which capture detection preempts at practical capture radii.
pub const SINGULARITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("gain must be positive, got {0}")]
    NonPositiveGain(f64),
    #[error("singular edge geometry for pursuer {pursuer:?} (|det| = {det:.3e})")]
    SingularGeometry { pursuer: Option<usize>, det: f64 },
    #[error("capture radius must be positive, got {0}")]
    NonPositiveCaptureRadius(f64),
    #[error("capture condition already met: regular-polygon radius {radius:.3} m <= r_c/2")]
    AlreadyCaptured { radius: f64 },
    #[error("policy requires the evader's cell")]
    PolicyNeedsCell,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Positive vertex-contraction gain, 1/seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gain(f64);

impl Gain {
    pub fn new(k: f64) -> Result<Self, ControlError> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(ControlError::NonPositiveGain(k));
        }
        Ok(Gain(k))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Velocity command for one pursuer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PursuerCommand {
    pub pursuer: usize,
    pub velocity: Vec2,
}

/// Evader motion policies. `Sinusoid` produces, per axis,
/// `amplitude * sin(frequency * t + phase) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub enum EvaderPolicy {
    ConstantVelocity(Vec2),
    Sinusoid {
        amplitude: Vec2,
        frequency: f64,
        phase: Vec2,
        bias: Vec2,
    },
    /// Move toward the cell centroid with the given gain (1/s).
    MoveToCentroid { gain: f64 },
    /// Move toward the cell's Chebyshev center with the given gain (1/s).
    MoveToChebyshev { gain: f64 },
    /// Piecewise-constant velocity schedule: entries `(start_time, velocity)`
    /// sorted by start time; the last entry at or before `t` applies.
    Schedule(Vec<(f64, Vec2)>),
}

impl EvaderPolicy {
    pub fn needs_cell(&self) -> bool {
        matches!(
            self,
            EvaderPolicy::MoveToCentroid { .. } | EvaderPolicy::MoveToChebyshev { .. }
        )
    }
}

/// Instantaneous evader velocity under `policy`. The cell is only consulted
/// by the centroid / Chebyshev-seeking policies.
pub fn evader_velocity(
    policy: &EvaderPolicy,
    t: f64,
    evader: Point2,
    cell: Option<&ProximityCell>,
) -> Result<Vec2, ControlError> {
    match policy {
        EvaderPolicy::ConstantVelocity(v) => Ok(*v),
        EvaderPolicy::Sinusoid {
            amplitude,
            frequency,
            phase,
            bias,
        } => Ok(Vec2::new(
            amplitude.x * (frequency * t + phase.x).sin() + bias.x,
            amplitude.y * (frequency * t + phase.y).sin() + bias.y,
        )),
        EvaderPolicy::MoveToCentroid { gain } => {
            let cell = cell.ok_or(ControlError::PolicyNeedsCell)?;
            Ok((cell.centroid() - evader) * *gain)
        }
        EvaderPolicy::MoveToChebyshev { gain } => {
            let cell = cell.ok_or(ControlError::PolicyNeedsCell)?;
            let (center, _) = cell.polygon().chebyshev_center();
            Ok((center - evader) * *gain)
        }
        EvaderPolicy::Schedule(entries) => Ok(entries
            .iter()
            .take_while(|(start, _)| *start <= t)
            .last()
            .map(|(_, v)| *v)
            .unwrap_or(Vec2::zero())),
    }
}

/// Centroid-seeking vertex velocities `K (x_C - q_i)`, one per cell vertex.
pub fn vertex_velocities(cell: &ProximityCell, gain: Gain) -> Vec<Vec2> {
    let c = cell.centroid();
    cell.vertices()
        .iter()
        .map(|&q| (c - q) * gain.value())
        .collect()
}

/// Velocity command for one active pursuer from the motion of its shared-edge
/// endpoints and of the evader.
///
/// Differentiating the equidistance of each endpoint from pursuer and evader
/// gives two scalar equations; with rows `(p - q_a)`, `(p - q_b)` they read
/// `(p - q)^T u = (p - e)^T qdot + (e - q)^T edot`. The 2x2 system is solved
/// directly.
pub fn pursuer_velocity(
    pursuer: Point2,
    evader: Point2,
    evader_velocity: Vec2,
    endpoints: (Point2, Point2),
    endpoint_velocities: (Vec2, Vec2),
) -> Result<Vec2, ControlError> {
    let (qa, qb) = endpoints;
    let (va, vb) = endpoint_velocities;
    let row_a = pursuer - qa;
    let row_b = pursuer - qb;
    let pe = pursuer - evader;
    let rhs_a = pe.dot(va) + (evader - qa).dot(evader_velocity);
    let rhs_b = pe.dot(vb) + (evader - qb).dot(evader_velocity);
    let det = row_a.cross(row_b);
    if det.abs() < SINGULARITY_TOLERANCE {
        return Err(ControlError::SingularGeometry {
            pursuer: None,
            det,
        });
    }
    Ok(Vec2::new(
        (rhs_a * row_b.y - rhs_b * row_a.y) / det,
        (row_a.x * rhs_b - row_b.x * rhs_a) / det,
    ))
}

/// One command per pursuer: active pursuers get the edge-constrained solve
/// fed with centroid-seeking vertex velocities, redundant pursuers get zero.
pub fn all_pursuer_commands(
    cell: &ProximityCell,
    pursuers: &[Point2],
    evader: Point2,
    evader_velocity: Vec2,
    gain: Gain,
) -> Result<Vec<PursuerCommand>, ControlError> {
    let vertex_vels = vertex_velocities(cell, gain);
    let mut commands = Vec::with_capacity(pursuers.len());
    for (i, &p) in pursuers.iter().enumerate() {
        let velocity = match cell.edge_for_pursuer(i) {
            None => Vec2::zero(),
            Some(edge) => {
                let (a, b) = edge.endpoints;
                pursuer_velocity(
                    p,
                    evader,
                    evader_velocity,
                    (cell.vertices()[a], cell.vertices()[b]),
                    (vertex_vels[a], vertex_vels[b]),
                )
                .map_err(|e| match e {
                    ControlError::SingularGeometry { det, .. } => {
                        ControlError::SingularGeometry {
                            pursuer: Some(i),
                            det,
                        }
                    }
                    other => other,
                })?
            }
        };
        commands.push(PursuerCommand {
            pursuer: i,
            velocity,
        });
    }
    Ok(commands)
}

/// Conservative upper bound on the capture time:
/// `-1/(2K) ln(m r_c^2 tan(pi/m) / (4 A_0))`.
///
/// Errors with [`ControlError::AlreadyCaptured`] when the bound would be
/// non-positive, i.e. `r_c / 2` already covers the inscribed radius of the
/// regular `m`-gon of area `A_0`.
pub fn capture_time_bound(
    initial_area: f64,
    sides: usize,
    gain: Gain,
    capture_radius: f64,
) -> Result<f64, ControlError> {
    if !(capture_radius > 0.0) {
        return Err(ControlError::NonPositiveCaptureRadius(capture_radius));
    }
    let radius = regular_polygon_inscribed_radius(initial_area, sides)?;
    if capture_radius >= 2.0 * radius {
        return Err(ControlError::AlreadyCaptured { radius });
    }
    let m = sides as f64;
    let arg = m * capture_radius * capture_radius * (std::f64::consts::PI / m).tan()
        / (4.0 * initial_area);
    Ok(-arg.ln() / (2.0 * gain.value()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voronoi::evader_cell;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn cross_cell() -> (Point2, Vec<Point2>, ProximityCell) {
        let e = Point2::new(0.0, 0.0);
        let p = vec![
            Point2::new(1.0, 0.0),
            Point2::new(-1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.0, -1.0),
        ];
        let cell = evader_cell(e, &p).unwrap();
        (e, p, cell)
    }

    fn random_cell(rng: &mut StdRng, n: usize) -> (Point2, Vec<Point2>, ProximityCell) {
        loop {
            let center = Point2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
            let pursuers: Vec<Point2> = (0..n)
                .map(|_| {
                    let a = rng.gen_range(0.0..std::f64::consts::TAU);
                    let r = rng.gen_range(10.0..80.0);
                    center + Vec2::new(r * a.cos(), r * a.sin())
                })
                .collect();
            let evader =
                center + Vec2::new(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0));
            if let Ok(cell) = evader_cell(evader, &pursuers) {
                return (evader, pursuers, cell);
            }
        }
    }

    #[test]
    fn vertex_velocities_point_at_centroid() {
        let (_, _, cell) = cross_cell();
        let k = Gain::new(1.0).unwrap();
        let c = cell.centroid();
        // symmetric cell: centroid at origin, each velocity is -vertex
        assert!(c.distance(Point2::new(0.0, 0.0)) < 1e-12);
        for (q, v) in cell.vertices().iter().zip(vertex_velocities(&cell, k)) {
            assert!((v.x + q.x).abs() < 1e-12);
            assert!((v.y + q.y).abs() < 1e-12);
        }
    }

    #[test]
    fn vertex_velocity_direct_evaluation() {
        // unit-square cell around (0.5, 0.5), K = 0.05: the (1, 1) corner
        // moves with 0.05 * ((0.5, 0.5) - (1, 1))
        let e = Point2::new(0.5, 0.5);
        let p = vec![
            Point2::new(1.5, 0.5),
            Point2::new(-0.5, 0.5),
            Point2::new(0.5, 1.5),
            Point2::new(0.5, -0.5),
        ];
        let cell = evader_cell(e, &p).unwrap();
        let k = Gain::new(0.05).unwrap();
        let vels = vertex_velocities(&cell, k);
        let corner = cell
            .vertices()
            .iter()
            .position(|v| v.distance(Point2::new(1.0, 1.0)) < 1e-9)
            .unwrap();
        let v = vels[corner];
        assert!((v.x + 0.025).abs() < 1e-12);
        assert!((v.y + 0.025).abs() < 1e-12);
    }

    #[test]
    fn area_rate_identity_for_centroid_policy() {
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..200 {
            let (_, _, cell) = random_cell(&mut rng, 3 + rng.gen_range(0..5));
            let k = Gain::new(rng.gen_range(0.01..2.0)).unwrap();
            let vels = vertex_velocities(&cell, k);
            let rate = cell.polygon().area_rate(&vels).unwrap();
            let expected = -2.0 * k.value() * cell.area();
            assert!(
                (rate - expected).abs() <= 1e-9 * expected.abs(),
                "rate {rate} vs -2KA {expected}"
            );
        }
    }

    #[test]
    fn pursuer_velocity_zero_inputs_zero_output() {
        let u = pursuer_velocity(
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 0.0),
            Vec2::zero(),
            (Point2::new(0.5, 0.5), Point2::new(0.5, -0.5)),
            (Vec2::zero(), Vec2::zero()),
        )
        .unwrap();
        assert_eq!(u, Vec2::zero());
    }

    /// Residual of the two differentiated equidistance constraints; this is
    /// the defining property of the solve and is written out independently.
    fn edge_constraint_residual(
        pursuer: Point2,
        pursuer_velocity: Vec2,
        evader: Point2,
        evader_vel: Vec2,
        q: Point2,
        q_vel: Vec2,
    ) -> f64 {
        let lhs = (pursuer_velocity.x - q_vel.x) * (pursuer.x - q.x)
            + (pursuer_velocity.y - q_vel.y) * (pursuer.y - q.y);
        let rhs = (evader_vel.x - q_vel.x) * (evader.x - q.x)
            + (evader_vel.y - q_vel.y) * (evader.y - q.y);
        (lhs - rhs).abs()
    }

    #[test]
    fn cross_configuration_command_points_inward() {
        let (e, p, cell) = cross_cell();
        let k = Gain::new(1.0).unwrap();
        let commands = all_pursuer_commands(&cell, &p, e, Vec2::zero(), k).unwrap();
        // all four point radially inward with equal magnitude
        let mags: Vec<f64> = commands.iter().map(|c| c.velocity.norm()).collect();
        for w in mags.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-12);
        }
        let u0 = commands[0].velocity; // pursuer at (1, 0)
        assert!(u0.x < 0.0, "command must move toward the evader: {u0:?}");
        assert!(u0.y.abs() < 1e-12);
        // and satisfies the differentiated constraints
        let vels = vertex_velocities(&cell, k);
        let edge = cell.edge_for_pursuer(0).unwrap();
        for &(vi, vv) in [
            (edge.endpoints.0, vels[edge.endpoints.0]),
            (edge.endpoints.1, vels[edge.endpoints.1]),
        ]
        .iter()
        {
            let r = edge_constraint_residual(
                p[0],
                u0,
                e,
                Vec2::zero(),
                cell.vertices()[vi],
                vv,
            );
            assert!(r < 1e-9, "residual {r}");
        }
    }

    #[test]
    fn commands_satisfy_constraints_on_random_cells() {
        let mut rng = StdRng::seed_from_u64(59);
        for _ in 0..100 {
            let (e, p, cell) = random_cell(&mut rng, 3 + rng.gen_range(0..4));
            let k = Gain::new(0.3).unwrap();
            let ev = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let vels = vertex_velocities(&cell, k);
            let commands = all_pursuer_commands(&cell, &p, e, ev, k).unwrap();
            for edge in cell.active() {
                let u = commands[edge.pursuer].velocity;
                for &(vi, vv) in [
                    (edge.endpoints.0, vels[edge.endpoints.0]),
                    (edge.endpoints.1, vels[edge.endpoints.1]),
                ]
                .iter()
                {
                    let r = edge_constraint_residual(
                        p[edge.pursuer],
                        u,
                        e,
                        ev,
                        cell.vertices()[vi],
                        vv,
                    );
                    assert!(r < 1e-9, "residual {r}");
                }
            }
        }
    }

    #[test]
    fn command_is_linear_in_velocities() {
        let mut rng = StdRng::seed_from_u64(61);
        let (e, p, cell) = random_cell(&mut rng, 4);
        let edge = cell.active()[0];
        let qa = cell.vertices()[edge.endpoints.0];
        let qb = cell.vertices()[edge.endpoints.1];
        let pursuer = p[edge.pursuer];
        let sample = |ev: Vec2, va: Vec2, vb: Vec2| {
            pursuer_velocity(pursuer, e, ev, (qa, qb), (va, vb)).unwrap()
        };
        let ev1 = Vec2::new(1.3, -0.4);
        let va1 = Vec2::new(0.2, 0.9);
        let vb1 = Vec2::new(-0.7, 0.1);
        let ev2 = Vec2::new(-2.0, 0.6);
        let va2 = Vec2::new(1.0, -1.0);
        let vb2 = Vec2::new(0.3, 0.8);
        let a = 0.65;
        let sum = sample(
            ev1 * a + ev2 * (1.0 - a),
            va1 * a + va2 * (1.0 - a),
            vb1 * a + vb2 * (1.0 - a),
        );
        let parts = sample(ev1, va1, vb1) * a + sample(ev2, va2, vb2) * (1.0 - a);
        assert!((sum.x - parts.x).abs() < 1e-12);
        assert!((sum.y - parts.y).abs() < 1e-12);
    }

    #[test]
    fn redundant_pursuer_gets_zero_command() {
        let e = Point2::new(0.0, 0.0);
        let mut p = vec![
            Point2::new(1.0, 0.0),
            Point2::new(-1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.0, -1.0),
        ];
        p.push(Point2::new(4.0, 0.0));
        let cell = evader_cell(e, &p).unwrap();
        let commands =
            all_pursuer_commands(&cell, &p, e, Vec2::new(0.3, 0.1), Gain::new(0.5).unwrap())
                .unwrap();
        assert_eq!(commands.len(), 5);
        assert_eq!(commands[4].velocity, Vec2::zero());
        assert!(commands[0].velocity.norm() > 0.0);
    }

    #[test]
    fn singular_geometry_reports_pursuer() {
        // endpoints collinear with the pursuer
        let err = pursuer_velocity(
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 0.0),
            Vec2::zero(),
            (Point2::new(2.0, 0.0), Point2::new(3.0, 0.0)),
            (Vec2::zero(), Vec2::zero()),
        )
        .unwrap_err();
        assert!(matches!(err, ControlError::SingularGeometry { .. }));
    }

    #[test]
    fn capture_bound_reference_value() {
        let k = Gain::new(0.05).unwrap();
        let t = capture_time_bound(13370.0, 3, k, 0.2).unwrap();
        assert!((t - 124.58).abs() < 0.01, "bound {t}");
    }

    #[test]
    fn capture_bound_zero_at_matching_radius() {
        let k = Gain::new(0.05).unwrap();
        let radius = regular_polygon_inscribed_radius(500.0, 4).unwrap();
        // r_c exactly 2x the inscribed radius: bound is zero, reported as
        // already captured
        let err = capture_time_bound(500.0, 4, k, 2.0 * radius).unwrap_err();
        assert!(matches!(err, ControlError::AlreadyCaptured { .. }));
        // just below, the bound is tiny but positive
        let t = capture_time_bound(500.0, 4, k, 2.0 * radius * (1.0 - 1e-9)).unwrap();
        assert!(t > 0.0 && t < 1e-6);
    }

    #[test]
    fn capture_bound_scales_inversely_with_gain() {
        let t1 = capture_time_bound(13370.0, 3, Gain::new(0.05).unwrap(), 0.2).unwrap();
        let t2 = capture_time_bound(13370.0, 3, Gain::new(0.10).unwrap(), 0.2).unwrap();
        assert!((t1 - 2.0 * t2).abs() < 1e-9);
    }

    #[test]
    fn capture_bound_monotonicity() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let area = rng.gen_range(100.0..20000.0);
            let sides = rng.gen_range(3..8);
            let k = rng.gen_range(0.01..1.0);
            let rc = rng.gen_range(0.05..1.0);
            let Ok(t) = capture_time_bound(area, sides, Gain::new(k).unwrap(), rc) else {
                continue;
            };
            if let Ok(t_k) = capture_time_bound(area, sides, Gain::new(k * 1.5).unwrap(), rc) {
                assert!(t_k < t);
            }
            if let Ok(t_rc) = capture_time_bound(area, sides, Gain::new(k).unwrap(), rc * 1.5) {
                assert!(t_rc < t);
            }
            if let Ok(t_a) =
                capture_time_bound(area * 1.5, sides, Gain::new(k).unwrap(), rc)
            {
                assert!(t_a > t);
            }
        }
    }

    #[test]
    fn policy_velocities() {
        let v = evader_velocity(
            &EvaderPolicy::ConstantVelocity(Vec2::new(-1.8, -2.5)),
            7.3,
            Point2::default(),
            None,
        )
        .unwrap();
        assert_eq!(v, Vec2::new(-1.8, -2.5));

        // weaving profile: at t = 0 the x-channel is at sin(0) and the
        // y-channel at sin(pi/2)
        let weaving = EvaderPolicy::Sinusoid {
            amplitude: Vec2::new(-2.5, -2.5),
            frequency: 0.06,
            phase: Vec2::new(0.0, std::f64::consts::FRAC_PI_2),
            bias: Vec2::zero(),
        };
        let v = evader_velocity(&weaving, 0.0, Point2::default(), None).unwrap();
        assert_eq!(v, Vec2::new(0.0, -2.5));

        let (e, p, cell) = cross_cell();
        let _ = p;
        let v = evader_velocity(
            &EvaderPolicy::MoveToCentroid { gain: 0.2 },
            0.0,
            e,
            Some(&cell),
        )
        .unwrap();
        // evader already at the centroid
        assert!(v.norm() < 1e-12);

        assert!(matches!(
            evader_velocity(&EvaderPolicy::MoveToCentroid { gain: 0.2 }, 0.0, e, None),
            Err(ControlError::PolicyNeedsCell)
        ));

        let schedule = EvaderPolicy::Schedule(vec![
            (0.0, Vec2::new(1.0, 0.0)),
            (2.0, Vec2::new(0.0, 1.0)),
        ]);
        assert_eq!(
            evader_velocity(&schedule, 1.0, e, None).unwrap(),
            Vec2::new(1.0, 0.0)
        );
        assert_eq!(
            evader_velocity(&schedule, 2.0, e, None).unwrap(),
            Vec2::new(0.0, 1.0)
        );
    }
}
