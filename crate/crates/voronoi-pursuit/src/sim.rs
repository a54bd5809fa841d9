//! Deterministic fixed-step simulation of the pursuit: per step, build the
//! evader's cell, derive pursuer commands, integrate the single-integrator
//! kinematics, then test the capture condition. Optionally the evader's
//! position is observed through additive Gaussian noise and a polynomial
//! Kalman filter, in which case the control pipeline runs on the estimated
//! state while capture and logging remain tied to the physical one.

use thiserror::Error;

use crate::control::{
    all_pursuer_commands, capture_time_bound, evader_velocity, ControlError, EvaderPolicy, Gain,
};
use crate::estimation::{
    add_measurement_noise, kf_init, kf_step, FilterState, InitCovariance, NoiseModel,
    ProcessNoise,
};
use crate::geometry::{Point2, Vec2};
use crate::voronoi::{evader_cell, CellError, ProximityCell};

/// How long the controller may coast on held commands while the estimated
/// evader position sits outside the pursuers' hull (seconds).
pub const CONTROL_GRACE_WINDOW: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("need at least 3 pursuers, got {0}")]
    TooFewPursuers(usize),
    #[error("agents {0} and {1} are collocated")]
    CollocatedAgents(String, String),
    #[error("evader must start strictly inside the pursuers' convex hull")]
    EvaderOutsideHull,
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("the Runge-Kutta integrator does not support measurement noise or filtering")]
    RungeKuttaWithFilter,
    #[error("invalid control setup: {0}")]
    Control(#[from] ControlError),
    #[error("invalid initial geometry: {0}")]
    Cell(#[from] CellError),
}

/// Filter wiring for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSettings {
    /// White-jerk intensity of the process-noise model (m/s^3).
    pub jerk_sigma: f64,
    /// Measurement noise standard deviation assumed by the filter (meters).
    /// Defaults to the injected noise sigma when absent.
    pub measurement_sigma: Option<f64>,
    pub init: InitCovariance,
}

impl Default for FilterSettings {
    fn default() -> Self {
        FilterSettings {
            jerk_sigma: ProcessNoise::default().jerk_sigma,
            measurement_sigma: None,
            init: InitCovariance::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    RungeKutta4,
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub pursuers: Vec<Point2>,
    pub evader: Point2,
    /// Vertex-contraction gain K (1/s).
    pub gain: f64,
    /// Capture radius r_c (m).
    pub capture_radius: f64,
    pub policy: EvaderPolicy,
    /// Integration step (s).
    pub dt: f64,
    /// Wall-clock cap; defaults to twice the capture-time bound.
    pub max_time: Option<f64>,
    pub noise: Option<NoiseModel>,
    pub filter: Option<FilterSettings>,
    pub integrator: Integrator,
    /// Optional cap on commanded pursuer speed (m/s). Enabling it voids the
    /// exponential-decay guarantee; the run records a warning.
    pub pursuer_speed_limit: Option<f64>,
}

impl Scenario {
    /// Minimal scenario with defaults for the optional machinery.
    pub fn new(pursuers: Vec<Point2>, evader: Point2, gain: f64, capture_radius: f64) -> Self {
        Scenario {
            name: String::new(),
            pursuers,
            evader,
            gain,
            capture_radius,
            policy: EvaderPolicy::ConstantVelocity(Vec2::zero()),
            dt: 1e-3,
            max_time: None,
            noise: None,
            filter: None,
            integrator: Integrator::Euler,
            pursuer_speed_limit: None,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.pursuers.len() < 3 {
            return Err(ScenarioError::TooFewPursuers(self.pursuers.len()));
        }
        if !self.evader.is_finite() || self.pursuers.iter().any(|p| !p.is_finite()) {
            return Err(ScenarioError::NonFinite);
        }
        for (name, value) in [
            ("dt", self.dt),
            ("capture_radius", self.capture_radius),
            ("gain", self.gain),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ScenarioError::NonPositive { name, value });
            }
        }
        if let Some(t) = self.max_time {
            if !(t > 0.0) {
                return Err(ScenarioError::NonPositive {
                    name: "max_time",
                    value: t,
                });
            }
        }
        for i in 0..self.pursuers.len() {
            for j in (i + 1)..self.pursuers.len() {
                if self.pursuers[i].distance(self.pursuers[j]) <= 1e-9 {
                    return Err(ScenarioError::CollocatedAgents(
                        format!("pursuer {i}"),
                        format!("pursuer {j}"),
                    ));
                }
            }
            if self.pursuers[i].distance(self.evader) <= 1e-9 {
                return Err(ScenarioError::CollocatedAgents(
                    format!("pursuer {i}"),
                    "evader".to_string(),
                ));
            }
        }
        if self.integrator == Integrator::RungeKutta4
            && (self.noise.is_some() || self.filter.is_some())
        {
            return Err(ScenarioError::RungeKuttaWithFilter);
        }
        // A1: bounded initial cell <=> evader strictly inside the hull
        match evader_cell(self.evader, &self.pursuers) {
            Ok(_) => Ok(()),
            Err(CellError::UnboundedCell) => Err(ScenarioError::EvaderOutsideHull),
            Err(e) => Err(ScenarioError::Cell(e)),
        }
    }
}

/// One logged step.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    pub evader_pos: Point2,
    pub evader_vel: Vec2,
    pub pursuer_pos: Vec<Point2>,
    pub pursuer_vel: Vec<Vec2>,
    /// Clockwise vertices of the cell the controller acted on.
    pub cell: Vec<Point2>,
    pub area: f64,
    /// Smallest true evader-pursuer separation.
    pub min_distance: f64,
    pub active: Vec<usize>,
}

impl SimRecord {
    pub fn pursuer_speed(&self, i: usize) -> f64 {
        self.pursuer_vel[i].norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimStatus {
    Captured,
    TimedOut,
    EvaderEscapedHull,
    SingularGeometry,
}

impl SimStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimStatus::Captured => "captured",
            SimStatus::TimedOut => "timed_out",
            SimStatus::EvaderEscapedHull => "evader_escaped_hull",
            SimStatus::SingularGeometry => "singular_geometry",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub status: SimStatus,
    pub capture_time: Option<f64>,
    pub capturing_pursuer: Option<usize>,
    pub records: Vec<SimRecord>,
    /// Analytic capture-time bound from the initial cell; `None` when the
    /// capture condition is already met by the initial regular-polygon
    /// geometry.
    pub bound: Option<f64>,
    pub diagnostics: Vec<String>,
}

/// Explicit Euler update of single-integrator kinematics.
pub fn integrate_step(positions: &[Point2], velocities: &[Vec2], dt: f64) -> Vec<Point2> {
    positions
        .iter()
        .zip(velocities)
        .map(|(&p, &v)| p + v * dt)
        .collect()
}

/// Largest relative deviation of the logged areas from the exponential decay
/// law `A(0) exp(-2 K t)`.
pub fn decay_residual(records: &[SimRecord], gain: Gain) -> f64 {
    let Some(first) = records.first() else {
        return 0.0;
    };
    let a0 = first.area;
    records
        .iter()
        .map(|r| (r.area - a0 * (-2.0 * gain.value() * (r.t - first.t)).exp()).abs() / a0)
        .fold(0.0, f64::max)
}

struct ControlView {
    position: Point2,
    velocity: Vec2,
}

/// Runs the scenario to termination.
pub fn run(scenario: &Scenario) -> Result<SimOutcome, ScenarioError> {
    scenario.validate()?;
    let gain = Gain::new(scenario.gain)?;

    // the capture-time bound always refers to the true initial partition
    let initial_cell = evader_cell(scenario.evader, &scenario.pursuers)?;
    let bound = match capture_time_bound(
        initial_cell.area(),
        initial_cell.active().len(),
        gain,
        scenario.capture_radius,
    ) {
        Ok(t) => Some(t),
        Err(ControlError::AlreadyCaptured { .. }) => None,
        Err(e) => return Err(ScenarioError::Control(e)),
    };
    let max_time = scenario
        .max_time
        .unwrap_or_else(|| bound.map_or(0.0, |b| 2.0 * b));

    let mut diagnostics = Vec::new();
    if scenario.pursuer_speed_limit.is_some() {
        diagnostics.push(
            "pursuer speed limit enabled: the exponential area-decay guarantee does not hold"
                .to_string(),
        );
    }

    match scenario.integrator {
        Integrator::Euler => run_euler(scenario, gain, bound, max_time, diagnostics),
        Integrator::RungeKutta4 => run_rk4(scenario, gain, bound, max_time, diagnostics),
    }
}

fn run_euler(
    scenario: &Scenario,
    gain: Gain,
    bound: Option<f64>,
    max_time: f64,
    mut diagnostics: Vec<String>,
) -> Result<SimOutcome, ScenarioError> {
    let dt = scenario.dt;
    let mut pursuers = scenario.pursuers.clone();
    let mut evader = scenario.evader;
    let mut filter: Option<FilterState> = None;
    let mut records: Vec<SimRecord> = Vec::new();
    let mut held_commands: Vec<Vec2> = vec![Vec2::zero(); pursuers.len()];
    let mut grace_steps = 0u64;
    let mut total_grace = 0u64;
    let mut step: u64 = 0;

    let estimating = scenario.filter.is_some();
    let filter_settings = scenario.filter.unwrap_or_default();
    let injected_sigma = scenario.noise.map_or(0.0, |n| n.position_sigma);
    let measurement_var = filter_settings
        .measurement_sigma
        .unwrap_or(injected_sigma)
        .powi(2);

    loop {
        let t = step as f64 * dt;
        let (min_distance, closest) = closest_pursuer(evader, &pursuers);

        if min_distance <= scenario.capture_radius {
            append_terminal_record(
                &mut records,
                &mut diagnostics,
                t,
                evader,
                &pursuers,
                filter.as_ref(),
                estimating,
                min_distance,
                scenario,
            );
            return Ok(finish(
                SimStatus::Captured,
                Some(t),
                Some(closest),
                records,
                bound,
                diagnostics,
                total_grace,
            ));
        }
        if t > max_time {
            return Ok(finish(
                SimStatus::TimedOut,
                None,
                None,
                records,
                bound,
                diagnostics,
                total_grace,
            ));
        }

        // observe: inject noise and update the filter before any control
        let view = match observe(scenario, &filter_settings, measurement_var, &mut filter, evader, step)
        {
            Ok(view) => view,
            Err(e) => {
                diagnostics.push(format!("filter failed at t = {t:.3}: {e}"));
                return Ok(finish(
                    SimStatus::SingularGeometry,
                    None,
                    None,
                    records,
                    bound,
                    diagnostics,
                    total_grace,
                ));
            }
        };

        match evader_cell(view.position, &pursuers) {
            Ok(cell) => {
                grace_steps = 0;
                let true_vel = match true_evader_velocity(scenario, t, evader, &pursuers, &cell, estimating)
                {
                    Ok(v) => v,
                    Err(status) => {
                        return Ok(finish(
                            status,
                            None,
                            None,
                            records,
                            bound,
                            diagnostics,
                            total_grace,
                        ));
                    }
                };
                let control_vel = if estimating { view.velocity } else { true_vel };
                let commands = match all_pursuer_commands(
                    &cell,
                    &pursuers,
                    view.position,
                    control_vel,
                    gain,
                ) {
                    Ok(c) => c,
                    Err(ControlError::SingularGeometry { pursuer, det }) => {
                        diagnostics.push(format!(
                            "singular edge geometry for pursuer {pursuer:?} at t = {t:.3} (|det| = {det:.3e})"
                        ));
                        return Ok(finish(
                            SimStatus::SingularGeometry,
                            None,
                            None,
                            records,
                            bound,
                            diagnostics,
                            total_grace,
                        ));
                    }
                    Err(e) => return Err(ScenarioError::Control(e)),
                };
                let mut velocities: Vec<Vec2> =
                    commands.iter().map(|c| c.velocity).collect();
                apply_speed_limit(&mut velocities, scenario.pursuer_speed_limit);

                records.push(SimRecord {
                    t,
                    evader_pos: evader,
                    evader_vel: true_vel,
                    pursuer_pos: pursuers.clone(),
                    pursuer_vel: velocities.clone(),
                    cell: cell.vertices().to_vec(),
                    area: cell.area(),
                    min_distance,
                    active: cell.active_pursuers().collect(),
                });

                pursuers = integrate_step(&pursuers, &velocities, dt);
                evader = evader + true_vel * dt;
                held_commands = velocities;
            }
            Err(CellError::UnboundedCell) if estimating => {
                // the estimate strayed outside the hull; coast on the held
                // commands for a bounded grace window
                grace_steps += 1;
                total_grace += 1;
                if grace_steps as f64 * dt > CONTROL_GRACE_WINDOW {
                    diagnostics.push(format!(
                        "estimated evader position stayed outside the pursuers' hull for {CONTROL_GRACE_WINDOW} s (t = {t:.3})"
                    ));
                    return Ok(finish(
                        SimStatus::EvaderEscapedHull,
                        None,
                        None,
                        records,
                        bound,
                        diagnostics,
                        total_grace,
                    ));
                }
                let true_vel = match true_evader_velocity_no_cell(scenario, t, evader, &pursuers) {
                    Ok(v) => v,
                    Err(status) => {
                        return Ok(finish(
                            status,
                            None,
                            None,
                            records,
                            bound,
                            diagnostics,
                            total_grace,
                        ));
                    }
                };
                pursuers = integrate_step(&pursuers, &held_commands, dt);
                evader = evader + true_vel * dt;
            }
            Err(CellError::UnboundedCell) => {
                diagnostics.push(format!("evader left the pursuers' hull at t = {t:.3}"));
                return Ok(finish(
                    SimStatus::EvaderEscapedHull,
                    None,
                    None,
                    records,
                    bound,
                    diagnostics,
                    total_grace,
                ));
            }
            Err(e) => {
                diagnostics.push(format!("cell construction failed at t = {t:.3}: {e}"));
                return Ok(finish(
                    SimStatus::SingularGeometry,
                    None,
                    None,
                    records,
                    bound,
                    diagnostics,
                    total_grace,
                ));
            }
        }

        step += 1;
    }
}

/// Velocity field evaluation for the Runge-Kutta integrator: full control
/// pipeline on the true state.
fn rk4_field(
    scenario: &Scenario,
    gain: Gain,
    t: f64,
    evader: Point2,
    pursuers: &[Point2],
) -> Result<(Vec2, Vec<Vec2>), SimStatus> {
    let cell = evader_cell(evader, pursuers).map_err(|e| match e {
        CellError::UnboundedCell => SimStatus::EvaderEscapedHull,
        _ => SimStatus::SingularGeometry,
    })?;
    let ev = evader_velocity(&scenario.policy, t, evader, Some(&cell))
        .map_err(|_| SimStatus::SingularGeometry)?;
    let commands = all_pursuer_commands(&cell, pursuers, evader, ev, gain)
        .map_err(|_| SimStatus::SingularGeometry)?;
    let mut velocities: Vec<Vec2> = commands.iter().map(|c| c.velocity).collect();
    apply_speed_limit(&mut velocities, scenario.pursuer_speed_limit);
    Ok((ev, velocities))
}

fn run_rk4(
    scenario: &Scenario,
    gain: Gain,
    bound: Option<f64>,
    max_time: f64,
    mut diagnostics: Vec<String>,
) -> Result<SimOutcome, ScenarioError> {
    let dt = scenario.dt;
    let mut pursuers = scenario.pursuers.clone();
    let mut evader = scenario.evader;
    let mut records = Vec::new();
    let mut step: u64 = 0;

    loop {
        let t = step as f64 * dt;
        let (min_distance, closest) = closest_pursuer(evader, &pursuers);
        if min_distance <= scenario.capture_radius {
            append_terminal_record(
                &mut records,
                &mut diagnostics,
                t,
                evader,
                &pursuers,
                None,
                false,
                min_distance,
                scenario,
            );
            return Ok(finish(
                SimStatus::Captured,
                Some(t),
                Some(closest),
                records,
                bound,
                diagnostics,
                0,
            ));
        }
        if t > max_time {
            return Ok(finish(
                SimStatus::TimedOut,
                None,
                None,
                records,
                bound,
                diagnostics,
                0,
            ));
        }

        let stage = |tt: f64, e: Point2, p: &[Point2]| rk4_field(scenario, gain, tt, e, p);
        let k1 = match stage(t, evader, &pursuers) {
            Ok(k) => k,
            Err(status) => {
                diagnostics.push(format!("integration stage failed at t = {t:.3}"));
                return Ok(finish(status, None, None, records, bound, diagnostics, 0));
            }
        };

        // log the instantaneous (stage-1) state and velocities
        if let Ok(cell) = evader_cell(evader, &pursuers) {
            records.push(SimRecord {
                t,
                evader_pos: evader,
                evader_vel: k1.0,
                pursuer_pos: pursuers.clone(),
                pursuer_vel: k1.1.clone(),
                cell: cell.vertices().to_vec(),
                area: cell.area(),
                min_distance,
                active: cell.active_pursuers().collect(),
            });
        }

        let half = 0.5 * dt;
        let advance = |e: Point2, p: &[Point2], k: &(Vec2, Vec<Vec2>), h: f64| {
            (e + k.0 * h, integrate_step(p, &k.1, h))
        };
        let (e2, p2) = advance(evader, &pursuers, &k1, half);
        let k2 = match stage(t + half, e2, &p2) {
            Ok(k) => k,
            Err(status) => {
                diagnostics.push(format!("integration stage failed at t = {t:.3}"));
                return Ok(finish(status, None, None, records, bound, diagnostics, 0));
            }
        };
        let (e3, p3) = advance(evader, &pursuers, &k2, half);
        let k3 = match stage(t + half, e3, &p3) {
            Ok(k) => k,
            Err(status) => {
                diagnostics.push(format!("integration stage failed at t = {t:.3}"));
                return Ok(finish(status, None, None, records, bound, diagnostics, 0));
            }
        };
        let (e4, p4) = advance(evader, &pursuers, &k3, dt);
        let k4 = match stage(t + dt, e4, &p4) {
            Ok(k) => k,
            Err(status) => {
                diagnostics.push(format!("integration stage failed at t = {t:.3}"));
                return Ok(finish(status, None, None, records, bound, diagnostics, 0));
            }
        };

        let sixth = dt / 6.0;
        evader = evader + (k1.0 + (k2.0 + k3.0) * 2.0 + k4.0) * sixth;
        for i in 0..pursuers.len() {
            pursuers[i] = pursuers[i]
                + (k1.1[i] + (k2.1[i] + k3.1[i]) * 2.0 + k4.1[i]) * sixth;
        }
        step += 1;
    }
}

fn observe(
    scenario: &Scenario,
    settings: &FilterSettings,
    measurement_var: f64,
    filter: &mut Option<FilterState>,
    evader: Point2,
    step: u64,
) -> Result<ControlView, crate::estimation::FilterError> {
    let measurement = match &scenario.noise {
        Some(model) => add_measurement_noise(evader, model, step),
        None => evader,
    };
    if scenario.filter.is_none() {
        // without a filter the controller sees the raw measurement and the
        // true velocity is supplied by the caller
        return Ok(ControlView {
            position: measurement,
            velocity: Vec2::zero(),
        });
    }
    let next = match filter.take() {
        None => kf_init(measurement, settings.init),
        Some(state) => kf_step(
            &state,
            measurement,
            scenario.dt,
            ProcessNoise {
                jerk_sigma: settings.jerk_sigma,
            },
            measurement_var,
        )?,
    };
    let view = ControlView {
        position: next.position(),
        velocity: next.velocity(),
    };
    *filter = Some(next);
    Ok(view)
}

/// The evader always acts on its own true state; policies that need geometry
/// consult the cell built from the true position.
fn true_evader_velocity(
    scenario: &Scenario,
    t: f64,
    evader: Point2,
    pursuers: &[Point2],
    control_cell: &ProximityCell,
    estimating: bool,
) -> Result<Vec2, SimStatus> {
    if !estimating || !scenario.policy.needs_cell() {
        // without estimation the control cell already is the true cell
        let cell = scenario.policy.needs_cell().then_some(control_cell);
        return evader_velocity(&scenario.policy, t, evader, cell)
            .map_err(|_| SimStatus::SingularGeometry);
    }
    true_evader_velocity_no_cell(scenario, t, evader, pursuers)
}

fn true_evader_velocity_no_cell(
    scenario: &Scenario,
    t: f64,
    evader: Point2,
    pursuers: &[Point2],
) -> Result<Vec2, SimStatus> {
    if !scenario.policy.needs_cell() {
        return evader_velocity(&scenario.policy, t, evader, None)
            .map_err(|_| SimStatus::SingularGeometry);
    }
    let cell = evader_cell(evader, pursuers).map_err(|_| SimStatus::EvaderEscapedHull)?;
    evader_velocity(&scenario.policy, t, evader, Some(&cell))
        .map_err(|_| SimStatus::SingularGeometry)
}

fn apply_speed_limit(velocities: &mut [Vec2], limit: Option<f64>) {
    let Some(vmax) = limit else { return };
    for v in velocities.iter_mut() {
        let speed = v.norm();
        if speed > vmax {
            *v = *v * (vmax / speed);
        }
    }
}

fn closest_pursuer(evader: Point2, pursuers: &[Point2]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (i, &p) in pursuers.iter().enumerate() {
        let d = evader.distance(p);
        if d < best.0 {
            best = (d, i);
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn append_terminal_record(
    records: &mut Vec<SimRecord>,
    diagnostics: &mut Vec<String>,
    t: f64,
    evader: Point2,
    pursuers: &[Point2],
    filter: Option<&FilterState>,
    estimating: bool,
    min_distance: f64,
    scenario: &Scenario,
) {
    // prefer the controller's view of the final cell, fall back to the true
    // one, and as a last resort carry the previous geometry forward
    let view_pos = if estimating {
        filter.map(|f| f.position()).unwrap_or(evader)
    } else {
        evader
    };
    let cell = evader_cell(view_pos, pursuers)
        .or_else(|_| evader_cell(evader, pursuers))
        .ok();
    let (cell_vertices, area, active) = match cell {
        Some(c) => (
            c.vertices().to_vec(),
            c.area(),
            c.active_pursuers().collect(),
        ),
        None => {
            diagnostics.push(format!(
                "terminal cell not constructible at t = {t:.3}; carried previous geometry"
            ));
            match records.last() {
                Some(prev) => (prev.cell.clone(), prev.area, prev.active.clone()),
                None => (Vec::new(), 0.0, Vec::new()),
            }
        }
    };
    let evader_vel = evader_velocity(&scenario.policy, t, evader, None).unwrap_or(Vec2::zero());
    records.push(SimRecord {
        t,
        evader_pos: evader,
        evader_vel,
        pursuer_pos: pursuers.to_vec(),
        pursuer_vel: vec![Vec2::zero(); pursuers.len()],
        cell: cell_vertices,
        area,
        min_distance,
        active,
    });
}

fn finish(
    status: SimStatus,
    capture_time: Option<f64>,
    capturing_pursuer: Option<usize>,
    records: Vec<SimRecord>,
    bound: Option<f64>,
    mut diagnostics: Vec<String>,
    total_grace: u64,
) -> SimOutcome {
    if total_grace > 0 {
        diagnostics.push(format!(
            "controller coasted on held commands for {total_grace} steps while the estimate was outside the hull"
        ));
    }
    SimOutcome {
        status,
        capture_time,
        capturing_pursuer,
        records,
        bound,
        diagnostics,
    }
}
