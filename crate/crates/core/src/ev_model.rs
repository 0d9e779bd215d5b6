//! Ego vehicle model: kinematic bicycle dynamics, analytic linearization and
//! discretization, RK4 plant integration, and straight multi-lane road geometry.

use nalgebra::{Matrix4, Matrix4x2, Vector2, Vector4};

/// Ego vehicle state: longitudinal position `s`, lateral deviation `d` from
/// the right-lane centerline, heading `phi` relative to the road, speed `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvState {
    pub s: f64,
    pub d: f64,
    pub phi: f64,
    pub v: f64,
}

impl EvState {
    pub fn new(s: f64, d: f64, phi: f64, v: f64) -> Self {
        Self { s, d, phi, v }
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.s, self.d, self.phi, self.v)
    }

    pub fn from_vector(x: &Vector4<f64>) -> Self {
        Self::new(x[0], x[1], x[2], x[3])
    }
}

/// Ego vehicle input: longitudinal acceleration `a` and steering angle `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvInput {
    pub a: f64,
    pub delta: f64,
}

impl EvInput {
    pub const ZERO: EvInput = EvInput { a: 0.0, delta: 0.0 };

    pub fn new(a: f64, delta: f64) -> Self {
        Self { a, delta }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.a, self.delta)
    }
}

/// Straight road with `n_lanes` parallel lanes. Lane `i` has its centerline at
/// `i * lane_width`; lane 0 is the rightmost lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadGeometry {
    pub n_lanes: usize,
    pub lane_width: f64,
    pub veh_length: f64,
    pub veh_width: f64,
}

impl RoadGeometry {
    /// Three 3.5 m lanes, 5 m x 2 m vehicles.
    pub fn three_lane() -> Self {
        Self {
            n_lanes: 3,
            lane_width: 3.5,
            veh_length: 5.0,
            veh_width: 2.0,
        }
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        lane as f64 * self.lane_width
    }

    /// Lateral band the vehicle center may occupy while the shape stays on the road.
    pub fn center_bounds(&self) -> (f64, f64) {
        let margin = 0.5 * (self.lane_width - self.veh_width);
        (
            -margin,
            (self.n_lanes - 1) as f64 * self.lane_width + margin,
        )
    }

    /// Outer road edges (pavement limits).
    pub fn road_edges(&self) -> (f64, f64) {
        (
            -0.5 * self.lane_width,
            (self.n_lanes - 1) as f64 * self.lane_width + 0.5 * self.lane_width,
        )
    }
}

/// Ego vehicle parameters: axle distances, input and input-rate bounds,
/// speed limit, and the road the vehicle drives on.
#[derive(Debug, Clone, Copy)]
pub struct EvParams {
    pub l_r: f64,
    pub l_f: f64,
    pub u_min: EvInput,
    pub u_max: EvInput,
    pub du_min: EvInput,
    pub du_max: EvInput,
    pub v_max: f64,
    pub road: RoadGeometry,
}

impl EvParams {
    /// Standard highway parameter set.
    pub fn highway() -> Self {
        Self {
            l_r: 2.0,
            l_f: 2.0,
            u_min: EvInput::new(-9.0, -0.2),
            u_max: EvInput::new(5.0, 0.2),
            du_min: EvInput::new(-9.0, -0.4),
            du_max: EvInput::new(9.0, 0.4),
            v_max: 35.0,
            road: RoadGeometry::three_lane(),
        }
    }
}

/// Linearized, discretized ego model around a reference state with zero
/// reference input: `xi_{k+1} = affine + A_d xi_k + B_d u_k`.
#[derive(Debug, Clone)]
pub struct LinearDiscreteModel {
    pub a_d: Matrix4<f64>,
    pub b_d: Matrix4x2<f64>,
    pub affine: Vector4<f64>,
    pub dt: f64,
}

impl LinearDiscreteModel {
    pub fn predict(&self, xi: &EvState, u: &EvInput) -> EvState {
        let x = self.affine + self.a_d * xi.to_vector() + self.b_d * u.to_vector();
        EvState::from_vector(&x)
    }
}

/// Continuous kinematic bicycle model: returns d/dt [s, d, phi, v].
pub fn ev_derivative(xi: &EvState, u: &EvInput, p: &EvParams) -> Vector4<f64> {
    let alpha = (p.l_r * u.delta.tan() / (p.l_r + p.l_f)).atan();
    Vector4::new(
        xi.v * (xi.phi + alpha).cos(),
        xi.v * (xi.phi + alpha).sin(),
        xi.v / p.l_r * alpha.sin(),
        u.a,
    )
}

/// Closed-form discrete-time system matrices of the bicycle model linearized
/// at `(xi, u)`. Exact for the one-step flow map when the reference input is
/// zero (the Jacobian chain s <- phi <- v terminates).
pub fn discrete_matrices(
    xi: &EvState,
    u: &EvInput,
    dt: f64,
    p: &EvParams,
) -> (Matrix4<f64>, Matrix4x2<f64>) {
    let t = dt;
    let l = p.l_r + p.l_f;
    let tan_d = u.delta.tan();
    let v = xi.v;

    let z1 = xi.phi + (p.l_r * tan_d / l).atan();
    let z2 = t * t * v * tan_d;
    let z3 = (p.l_r * tan_d).powi(2);
    let z4 = l * (z3 / (l * l) + 1.0).sqrt();
    let z5 = v * (tan_d * tan_d + 1.0);
    let z6 = l.powi(3) * (z3 / (l * l) + 1.0).powf(1.5);
    let z7 = z5 / z4 - z3 * z5 / z6;
    let z8 = t * p.l_r * z5;
    let z9 = l * (z3 / (l * l) + 1.0);

    let (sin1, cos1) = z1.sin_cos();

    let a_d = Matrix4::new(
        1.0, 0.0, -t * v * sin1, t * cos1 - z2 * sin1 / (2.0 * z4),
        0.0, 1.0, t * v * cos1, t * sin1 + z2 * cos1 / (2.0 * z4),
        0.0, 0.0, 1.0, t * tan_d / z4,
        0.0, 0.0, 0.0, 1.0,
    );
    let b_d = Matrix4x2::new(
        t * t * cos1 / 2.0, -t * t * v * z7 * sin1 / 2.0 - z8 * sin1 / z9,
        t * t * sin1 / 2.0, t * t * v * z7 * cos1 / 2.0 + z8 * cos1 / z9,
        t * t * tan_d / (2.0 * z4), t * z7,
        t, 0.0,
    );
    (a_d, b_d)
}

/// Linearize and discretize around `xi0` with zero reference input. The
/// affine term uses forward Euler on the nonlinear derivative, so
/// `predict(xi0, 0) = xi0 + dt * f(xi0, 0)`.
pub fn linearize_discretize(xi0: &EvState, dt: f64, p: &EvParams) -> LinearDiscreteModel {
    assert!(dt > 0.0, "sampling time must be positive");
    let (a_d, b_d) = discrete_matrices(xi0, &EvInput::ZERO, dt, p);
    let x0 = xi0.to_vector();
    let affine = x0 + dt * ev_derivative(xi0, &EvInput::ZERO, p) - a_d * x0;
    LinearDiscreteModel {
        a_d,
        b_d,
        affine,
        dt,
    }
}

/// One linear prediction step.
pub fn predict_linear(model: &LinearDiscreteModel, xi: &EvState, u: &EvInput) -> EvState {
    model.predict(xi, u)
}

/// Integrate the nonlinear plant over one sampling period with classical RK4,
/// then clamp the speed to `[0, v_max]`.
pub fn step_plant(xi: &EvState, u: &EvInput, dt: f64, p: &EvParams) -> EvState {
    assert!(dt > 0.0, "sampling time must be positive");
    let x0 = xi.to_vector();
    let f = |x: &Vector4<f64>| ev_derivative(&EvState::from_vector(x), u, p);
    let k1 = f(&x0);
    let k2 = f(&(x0 + 0.5 * dt * k1));
    let k3 = f(&(x0 + 0.5 * dt * k2));
    let k4 = f(&(x0 + dt * k3));
    let mut x = x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    x[3] = x[3].clamp(0.0, p.v_max);
    EvState::from_vector(&x)
}

/// Index of the lane whose centerline is nearest to `d`, clamped to the road.
/// Ties round down (toward the lower lane index).
pub fn lane_of(d: f64, road: &RoadGeometry) -> usize {
    let raw = d / road.lane_width;
    let mut idx = raw.round();
    // round() takes half-ticks away from zero; tie-break toward the lower lane
    if (raw - raw.floor() - 0.5).abs() < 1e-12 {
        idx = raw.floor();
    }
    (idx.max(0.0) as usize).min(road.n_lanes - 1)
}
