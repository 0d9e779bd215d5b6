//! Prediction-error covariance propagation, positional marginalization,
//! chi-squared tolerance levels, and the uncertainty-enlarged safety
//! rectangle around a predicted target vehicle.

use nalgebra::{Matrix2, Matrix4};
use thiserror::Error;

use crate::ev_model::{EvState, RoadGeometry};
use crate::tv_model::{TvParams, TvState};

#[derive(Debug, Error, PartialEq)]
pub enum UncertaintyError {
    #[error("risk parameter beta must lie in (0, 1), got {0}")]
    BetaOutOfRange(f64),
}

/// Prediction-error covariance at one prediction step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorCovariance {
    pub sigma: Matrix4<f64>,
}

impl ErrorCovariance {
    /// Initial error covariance equals the sensor covariance.
    pub fn initial(p: &TvParams) -> Self {
        Self { sigma: p.sens_cov }
    }
}

/// Axis-aligned exclusion rectangle around a predicted TV position, enlarged
/// for vehicle shape, braking-distance difference, and prediction uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyRectangle {
    pub center_x: f64,
    pub center_y: f64,
    pub half_length: f64,
    pub half_width: f64,
    pub step: usize,
}

impl SafetyRectangle {
    pub fn full_length(&self) -> f64 {
        2.0 * self.half_length
    }

    pub fn full_width(&self) -> f64 {
        2.0 * self.half_width
    }
}

/// One step of the error-covariance recursion:
/// `S' = B W B^T + (A + BK) S (A + BK)^T`.
pub fn propagate_error_cov(sigma_k: &ErrorCovariance, p: &TvParams) -> ErrorCovariance {
    let cl = p.closed_loop();
    ErrorCovariance {
        sigma: p.b * p.w_cov * p.b.transpose() + cl * sigma_k.sigma * cl.transpose(),
    }
}

/// Positional marginal: keep the (x, x) and (y, y) variances, drop the
/// velocity correlations.
pub fn reduce_cov(sigma: &ErrorCovariance) -> Matrix2<f64> {
    Matrix2::new(sigma.sigma[(0, 0)], 0.0, 0.0, sigma.sigma[(2, 2)])
}

/// Tolerance level of the positional confidence ellipse: the 2-dof
/// chi-squared quantile with containment probability `beta`, in closed form
/// `kappa = -2 ln(1 - beta)`.
pub fn tolerance_level(beta: f64) -> Result<f64, UncertaintyError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(UncertaintyError::BetaOutOfRange(beta));
    }
    Ok(-2.0 * (1.0 - beta).ln())
}

/// Build the safety rectangle for prediction step `k`.
///
/// The velocity-dependent part compensates the braking-distance difference
/// between the two vehicles; the ellipse semi-axes `sigma * sqrt(kappa)`
/// enlarge the rectangle for prediction uncertainty.
pub fn safety_rectangle(
    xi0_ev: &EvState,
    tv_k: &TvState,
    sigma_k: &ErrorCovariance,
    kappa: f64,
    road: &RoadGeometry,
    a_min: f64,
    m_safe: f64,
    step: usize,
) -> SafetyRectangle {
    assert!(a_min < 0.0, "a_min must be a deceleration");
    let a_tilde = -(1.0 / a_min) * (xi0_ev.v.powi(2) - tv_k.vx.powi(2)).max(0.0);
    let pos = reduce_cov(sigma_k);
    let e_x = pos[(0, 0)].max(0.0).sqrt() * kappa.sqrt();
    let e_y = pos[(1, 1)].max(0.0).sqrt() * kappa.sqrt();
    let a_r = road.veh_length + m_safe + a_tilde + e_x;
    let b_r = road.veh_width + m_safe + e_y;
    SafetyRectangle {
        center_x: tv_k.x,
        center_y: tv_k.y,
        half_length: 0.5 * a_r,
        half_width: 0.5 * b_r,
        step,
    }
}
