//! Cooperative capture of a single evader by a team of pursuers.
//!
//! The pursuers shape the evader's Voronoi proximity cell: each cell vertex
//! is commanded toward the cell centroid with gain `K`, which makes the cell
//! area decay exactly as `A(0) exp(-2 K t)` regardless of how the evader
//! moves. Inverting the vertex motion through the shared-edge constraints
//! yields explicit velocity commands for the active pursuers; capture (some
//! pursuer within `r_c` of the evader) follows in finite time, with a
//! closed-form upper bound on the capture instant.
//!
//! The crate is organized around a small set of layers:
//!
//! - [`geometry`]: convex polygons, half-plane clipping, Chebyshev centers.
//! - [`voronoi`]: the evader's proximity cell and active-pursuer bookkeeping.
//! - [`control`]: vertex velocities, per-pursuer solves, evader policies and
//!   the capture-time bound.
//! - [`estimation`]: a polynomial Kalman filter plus the measurement-noise
//!   injector for runs where only noisy evader positions are available.
//! - [`sim`]: the fixed-step simulation loop tying it all together.
//! - [`config`], [`report`], [`plot`]: scenario files, CSV/summary artifacts
//!   and SVG figures for the bundled command-line front end.
//!
//! See the `examples/` directory for runnable walkthroughs of each layer and
//! the `scenarios/` directory for ready-made experiment files.

pub mod config;
pub mod control;
pub mod estimation;
pub mod geometry;
pub mod plot;
pub mod report;
pub mod sim;
pub mod voronoi;

pub use control::{
    all_pursuer_commands, capture_time_bound, evader_velocity, vertex_velocities, ControlError,
    EvaderPolicy, Gain, PursuerCommand,
};
pub use estimation::{
    add_measurement_noise, kf_init, kf_step, matched_noise_sigma, FilterState, InitCovariance,
    NoiseModel, ProcessNoise,
};
pub use geometry::{
    halfplane_intersection, regular_polygon_inscribed_radius, ConvexPolygon, GeometryError,
    HalfPlane, Point2, Vec2,
};
pub use sim::{
    decay_residual, integrate_step, run, FilterSettings, Integrator, Scenario, ScenarioError,
    SimOutcome, SimRecord, SimStatus,
};
pub use voronoi::{
    evader_cell, min_evader_boundary_distance, mirror_check, ActiveEdge, CellError, ProximityCell,
};
