//! Discrete second-order polynomial Kalman filter for the evader: per-axis
//! position / velocity / acceleration states driven by position-only
//! measurements, with the gain obtained from the covariance recursion
//! (prior covariance, gain, posterior covariance) each step.
//!
//! Also houses the deterministic measurement-noise injector used by the
//! simulator and the offline helper that matches a noise level to a target
//! signal-to-noise ratio against a recorded trajectory.

use nalgebra::{SMatrix, SVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{Point2, Vec2};

type State6 = SVector<f64, 6>;
type Mat6 = SMatrix<f64, 6, 6>;
type Mat2x6 = SMatrix<f64, 2, 6>;
type Mat2 = SMatrix<f64, 2, 2>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("filter state became non-finite")]
    NonFinite,
}

/// Estimated evader state `[x, vx, ax, y, vy, ay]` with covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    estimate: State6,
    covariance: Mat6,
    step_index: u64,
}

impl FilterState {
    pub fn position(&self) -> Point2 {
        Point2::new(self.estimate[0], self.estimate[3])
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.estimate[1], self.estimate[4])
    }

    pub fn acceleration(&self) -> Vec2 {
        Vec2::new(self.estimate[2], self.estimate[5])
    }

    pub fn estimate(&self) -> &State6 {
        &self.estimate
    }

    pub fn covariance(&self) -> &Mat6 {
        &self.covariance
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }
}

/// Per-block initial variances for [`kf_init`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitCovariance {
    pub position_var: f64,
    pub velocity_var: f64,
    pub acceleration_var: f64,
}

impl Default for InitCovariance {
    fn default() -> Self {
        InitCovariance {
            position_var: 1.0,
            velocity_var: 100.0,
            acceleration_var: 100.0,
        }
    }
}

/// Process-noise intensity: standard deviation of the white jerk driving each
/// axis (m/s^3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessNoise {
    pub jerk_sigma: f64,
}

impl Default for ProcessNoise {
    fn default() -> Self {
        ProcessNoise { jerk_sigma: 5.0 }
    }
}

/// Additive white Gaussian position noise, reproducible from `(seed,
/// step_index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub position_sigma: f64,
    pub seed: u64,
}

/// Initializes the filter at the first measurement with zero velocity and
/// acceleration and a block-diagonal covariance.
pub fn kf_init(first_measurement: Point2, cov: InitCovariance) -> FilterState {
    let mut estimate = State6::zeros();
    estimate[0] = first_measurement.x;
    estimate[3] = first_measurement.y;
    let mut covariance = Mat6::zeros();
    for axis in [0, 3] {
        covariance[(axis, axis)] = cov.position_var;
        covariance[(axis + 1, axis + 1)] = cov.velocity_var;
        covariance[(axis + 2, axis + 2)] = cov.acceleration_var;
    }
    FilterState {
        estimate,
        covariance,
        step_index: 0,
    }
}

/// Per-axis constant-acceleration transition, block diagonal over both axes.
fn transition_matrix(dt: f64) -> Mat6 {
    let mut phi = Mat6::identity();
    for axis in [0, 3] {
        phi[(axis, axis + 1)] = dt;
        phi[(axis, axis + 2)] = 0.5 * dt * dt;
        phi[(axis + 1, axis + 2)] = dt;
    }
    phi
}

/// Third-order discretization of continuous white jerk with PSD
/// `jerk_sigma^2` on each axis.
fn process_noise_matrix(dt: f64, noise: ProcessNoise) -> Mat6 {
    let q = noise.jerk_sigma * noise.jerk_sigma;
    let d2 = dt * dt;
    let d3 = d2 * dt;
    let d4 = d3 * dt;
    let d5 = d4 * dt;
    let block = [
        [d5 / 20.0, d4 / 8.0, d3 / 6.0],
        [d4 / 8.0, d3 / 3.0, d2 / 2.0],
        [d3 / 6.0, d2 / 2.0, dt],
    ];
    let mut out = Mat6::zeros();
    for axis in [0, 3] {
        for r in 0..3 {
            for c in 0..3 {
                out[(axis + r, axis + c)] = q * block[r][c];
            }
        }
    }
    out
}

fn measurement_matrix() -> Mat2x6 {
    let mut h = Mat2x6::zeros();
    h[(0, 0)] = 1.0;
    h[(1, 3)] = 1.0;
    h
}

/// One measurement update. Order matches the covariance recursion: prior
/// covariance from the transition, gain from the prior, posterior covariance,
/// then the state update; the posterior is re-symmetrized to keep it PSD over
/// long runs.
pub fn kf_step(
    state: &FilterState,
    measurement: Point2,
    dt: f64,
    process_noise: ProcessNoise,
    measurement_noise_variance: f64,
) -> Result<FilterState, FilterError> {
    if !(dt > 0.0) {
        return Err(FilterError::NonPositiveStep(dt));
    }
    let phi = transition_matrix(dt);
    let h = measurement_matrix();
    let prior = phi * state.covariance * phi.transpose() + process_noise_matrix(dt, process_noise);
    let innovation_cov: Mat2 =
        h * prior * h.transpose() + Mat2::identity() * measurement_noise_variance;
    let innovation_inv = innovation_cov
        .try_inverse()
        .ok_or(FilterError::SingularInnovation)?;
    let gain = prior * h.transpose() * innovation_inv;
    let posterior = (Mat6::identity() - gain * h) * prior;
    let covariance = 0.5 * (posterior + posterior.transpose());

    let predicted = phi * state.estimate;
    let z = SVector::<f64, 2>::new(measurement.x, measurement.y);
    let estimate = predicted + gain * (z - h * predicted);
    if estimate.iter().any(|v| !v.is_finite()) {
        return Err(FilterError::NonFinite);
    }
    Ok(FilterState {
        estimate,
        covariance,
        step_index: state.step_index + 1,
    })
}

/// Corrupts a true position with independent zero-mean Gaussian noise per
/// axis. Deterministic for a given `(seed, step_index)` pair.
pub fn add_measurement_noise(
    true_position: Point2,
    model: &NoiseModel,
    step_index: u64,
) -> Point2 {
    if model.position_sigma == 0.0 {
        return true_position;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(model.seed ^ splitmix64(step_index)));
    let (g0, g1) = standard_normal_pair(&mut rng);
    true_position + Vec2::new(model.position_sigma * g0, model.position_sigma * g1)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Box-Muller transform; kept in-house so the noise stream is stable across
/// dependency upgrades.
fn standard_normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64; // [0, 1)
    let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Per-axis noise standard deviation that would put the given trajectory at
/// `snr_db` decibels, with the signal power averaged per axis over the whole
/// trajectory. Offline utility: the signal power is not knowable during a
/// run.
pub fn matched_noise_sigma(positions: &[Point2], snr_db: f64) -> f64 {
    if positions.is_empty() {
        return 0.0;
    }
    let power: f64 = positions
        .iter()
        .map(|p| p.x * p.x + p.y * p.y)
        .sum::<f64>()
        / (2.0 * positions.len() as f64);
    (power / 10f64.powf(snr_db / 10.0)).sqrt()
}
