//! Target vehicle model: linear point-mass dynamics with saturated feedback,
//! maneuver-dependent reference selection, deterministic prediction, and
//! truncated-Gaussian sensor measurement.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ev_model::{lane_of, RoadGeometry};

/// Target vehicle state: longitudinal position/velocity `x`, `vx` and lateral
/// position/velocity `y`, `vy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvState {
    pub x: f64,
    pub vx: f64,
    pub y: f64,
    pub vy: f64,
}

impl TvState {
    pub fn new(x: f64, vx: f64, y: f64, vy: f64) -> Self {
        Self { x, vx, y, vy }
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.x, self.vx, self.y, self.vy)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// Reference the target vehicle tracks: longitudinal speed and a lane
/// centerline with zero lateral velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvReference {
    pub vx_ref: f64,
    pub y_ref: f64,
    pub vy_ref: f64,
}

impl TvReference {
    pub fn to_vector(self) -> Vector4<f64> {
        // x is a measured quantity only; the feedback never touches it
        Vector4::new(0.0, self.vx_ref, self.y_ref, self.vy_ref)
    }
}

/// Target vehicle model parameters: discrete double-integrator matrices,
/// feedback gain, input box, disturbance covariance, and sensor noise model.
#[derive(Debug, Clone)]
pub struct TvParams {
    pub a: Matrix4<f64>,
    pub b: Matrix4x2<f64>,
    pub k: Matrix2x4<f64>,
    /// Input box `[a_min, a_max] x [ay_min, ay_max]`.
    pub u_min: Vector2<f64>,
    pub u_max: Vector2<f64>,
    /// Disturbance covariance on the input channels.
    pub w_cov: Matrix2<f64>,
    /// Sensor noise covariance (diagonal) on the full state.
    pub sens_cov: Matrix4<f64>,
    /// Componentwise truncation bounds of the sensor noise.
    pub sens_bounds: Vector4<f64>,
    pub dt: f64,
}

impl TvParams {
    /// Discrete matrices for sampling time `dt` with the standard highway
    /// gains and noise levels.
    pub fn highway(dt: f64) -> Self {
        let (k12, k21, k22) = (-0.55, -0.63, -1.15);
        Self {
            a: Matrix4::new(
                1.0, dt, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, dt, //
                0.0, 0.0, 0.0, 1.0,
            ),
            b: Matrix4x2::new(
                0.5 * dt * dt, 0.0, //
                dt, 0.0, //
                0.0, 0.5 * dt * dt, //
                0.0, dt,
            ),
            k: Matrix2x4::new(
                0.0, k12, 0.0, 0.0, //
                0.0, 0.0, k21, k22,
            ),
            u_min: Vector2::new(-9.0, -0.4),
            u_max: Vector2::new(5.0, 0.4),
            w_cov: Matrix2::from_diagonal(&Vector2::new(0.44, 0.09)),
            sens_cov: Matrix4::from_diagonal(&Vector4::new(0.25, 0.25, 0.028, 0.028)),
            sens_bounds: Vector4::new(0.25, 0.25, 0.028, 0.028),
            dt,
        }
    }

    /// Closed-loop matrix of the unsaturated feedback system.
    pub fn closed_loop(&self) -> Matrix4<f64> {
        self.a + self.b * self.k
    }
}

/// Saturated tracking feedback `sat(K (xi - ref))`.
pub fn tv_feedback_input(xi: &TvState, reference: &TvReference, p: &TvParams) -> Vector2<f64> {
    let u = p.k * (xi.to_vector() - reference.to_vector());
    Vector2::new(
        u[0].clamp(p.u_min[0], p.u_max[0]),
        u[1].clamp(p.u_min[1], p.u_max[1]),
    )
}

/// Reference describing the current maneuver: keep speed, settle on the
/// current lane center unless the body already overlaps an adjacent lane and
/// the lateral velocity points into it, in which case that lane is the target.
pub fn tv_reference(xi_hat: &TvState, road: &RoadGeometry) -> TvReference {
    let lane = lane_of(xi_hat.y, road);
    let mut y_ref = road.lane_center(lane);
    let half_body = 0.5 * road.veh_width;
    let half_lane = 0.5 * road.lane_width;

    if lane + 1 < road.n_lanes
        && xi_hat.y + half_body > road.lane_center(lane) + half_lane
        && xi_hat.vy > 0.0
    {
        y_ref = road.lane_center(lane + 1);
    } else if lane > 0
        && xi_hat.y - half_body < road.lane_center(lane) - half_lane
        && xi_hat.vy < 0.0
    {
        y_ref = road.lane_center(lane - 1);
    }

    TvReference {
        vx_ref: xi_hat.vx,
        y_ref,
        vy_ref: 0.0,
    }
}

/// Deterministic prediction over `n` steps with the reference latched at k=0.
/// Element 0 is the initial state; `vx` is floored at zero and `y` is kept on
/// the road.
pub fn tv_predict(xi_hat0: &TvState, n: usize, p: &TvParams, road: &RoadGeometry) -> Vec<TvState> {
    assert!(n >= 1);
    let reference = tv_reference(xi_hat0, road);
    let (y_lo, y_hi) = road.center_bounds();
    let mut out = Vec::with_capacity(n + 1);
    out.push(*xi_hat0);
    let mut xi = *xi_hat0;
    for _ in 0..n {
        let u = tv_feedback_input(&xi, &reference, p);
        let next = p.a * xi.to_vector() + p.b * u;
        xi = TvState::new(next[0], next[1].max(0.0), next[2].clamp(y_lo, y_hi), next[3]);
        out.push(xi);
    }
    out
}

/// Sample a truncated Gaussian by componentwise rejection.
fn truncated_normal<R: Rng>(rng: &mut R, std: f64, bound: f64) -> f64 {
    if std == 0.0 {
        return 0.0;
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let w = z * std;
        if w.abs() <= bound {
            return w;
        }
    }
}

/// Noisy measurement of a target vehicle state: additive truncated Gaussian
/// per component.
pub fn measure<R: Rng>(xi_true: &TvState, rng: &mut R, p: &TvParams) -> TvState {
    let mut v = xi_true.to_vector();
    for i in 0..4 {
        v[i] += truncated_normal(rng, p.sens_cov[(i, i)].sqrt(), p.sens_bounds[i]);
    }
    TvState::from_vector(&v)
}

/// True plant step: `xi' = A xi + B (u + w)` with optional process noise,
/// longitudinal velocity floored at zero.
pub fn tv_step_true<R: Rng>(
    xi: &TvState,
    script_input: &Vector2<f64>,
    rng: &mut R,
    p: &TvParams,
    noise_on: bool,
) -> TvState {
    let mut u = *script_input;
    if noise_on {
        for i in 0..2 {
            let z: f64 = StandardNormal.sample(rng);
            u[i] += z * p.w_cov[(i, i)].sqrt();
        }
    }
    let next = p.a * xi.to_vector() + p.b * u;
    TvState::new(next[0], next[1].max(0.0), next[2], next[3])
}
