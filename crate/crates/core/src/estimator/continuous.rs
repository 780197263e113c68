//! Continuous-time filter
//!
//! ```text
//! 𝕁 φ̇ = ad*_φ 𝕁 φ − Z − 𝔻 φ
//! ξ̂   = ξ^m − Ad_{ĝ⁻¹} φ
//! ĝ̇   = ĝ ξ̂^∨
//! ```
//!
//! and a fourth-order Runge-Kutta-Munthe-Kaas stepper used as a reference
//! for the discrete integrator.

use nalgebra::Vector6;

use super::potential::z_vector;
use super::{estimated_twist, EstimatorGains, EstimatorState};
use crate::error::{Error, Result};
use crate::liegroup::{ad_star, bracket, exp_se3, Pose, Twist, VelocityError};
use crate::measurement::{KnownReference, MeasurementFrame};

/// Returns `(φ̇, ξ̂)`; `ĝ̇ = ĝ ξ̂^∨` is left to the integrator.
pub fn continuous_rhs(
    state: &EstimatorState,
    xi_meas: &Twist,
    frame: &MeasurementFrame,
    reference: &KnownReference,
    gains: &EstimatorGains,
) -> (Vector6<f64>, Twist) {
    rhs_at(&state.pose, &state.phi, xi_meas, frame, reference, gains)
}

fn rhs_at(
    pose: &Pose,
    phi: &VelocityError,
    xi_meas: &Twist,
    frame: &MeasurementFrame,
    reference: &KnownReference,
    gains: &EstimatorGains,
) -> (Vector6<f64>, Twist) {
    let inertia = gains.inertia();
    let phi_v = phi.to_vector();
    let z = z_vector(pose, &frame.l_meas, &reference.d, &frame.a_bar, &reference.p_bar, gains);
    let phi_as_twist = Twist::from_vector(&phi_v);
    let force = ad_star(&phi_as_twist) * (inertia * phi_v) - z - gains.dissipation() * phi_v;
    // 𝕁 is block-diagonal and positive definite
    let phi_dot = inertia
        .cholesky()
        .expect("inertia gains are positive definite")
        .solve(&force);
    (phi_dot, estimated_twist(pose, phi, xi_meas))
}

/// Measurements at the start, midpoint and end of an RK4 step.
#[derive(Clone, Copy, Debug)]
pub struct Rk4Frames<'a> {
    pub start: &'a MeasurementFrame,
    pub mid: &'a MeasurementFrame,
    pub end: &'a MeasurementFrame,
}

// θ̇ for g = g₀ exp(θ) with g⁻¹ġ = v, i.e. dexp⁻¹_{−u}(v), truncated after
// the second bracket, enough for order four.
fn dexp_inv(u: &Twist, v: &Twist) -> Twist {
    let uv = bracket(u, v);
    let uuv = bracket(u, &uv);
    Twist::from_vector(&(v.to_vector() + uv.to_vector() * 0.5 + uuv.to_vector() / 12.0))
}

/// One RKMK4 step. The pose is advanced by `ĝ exp(θ)` with `θ` accumulated
/// in the Lie algebra, so it stays on SE(3); `xi_meas` is held over the step.
pub fn rk4_step(
    state: &EstimatorState,
    xi_meas: &Twist,
    frames: Rk4Frames<'_>,
    reference: &KnownReference,
    gains: &EstimatorGains,
    dt: f64,
) -> Result<EstimatorState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let g0 = state.pose;
    let phi0 = state.phi.to_vector();

    let stage = |theta: &Twist, phi: &Vector6<f64>, frame: &MeasurementFrame| {
        let pose = g0 * exp_se3(theta, 1.0);
        let (phi_dot, xi_hat) = rhs_at(&pose, &VelocityError::from_vector(phi), xi_meas, frame, reference, gains);
        (dexp_inv(theta, &xi_hat), phi_dot, xi_hat)
    };

    let (k1, l1, xi_hat) = stage(&Twist::zero(), &phi0, frames.start);
    let (k2, l2, _) = stage(&k1.scaled(0.5 * dt), &(phi0 + l1 * (0.5 * dt)), frames.mid);
    let (k3, l3, _) = stage(&k2.scaled(0.5 * dt), &(phi0 + l2 * (0.5 * dt)), frames.mid);
    let (k4, l4, _) = stage(&k3.scaled(dt), &(phi0 + l3 * dt), frames.end);

    let theta = (k1.to_vector() + (k2.to_vector() + k3.to_vector()) * 2.0 + k4.to_vector()) * (dt / 6.0);
    let phi = phi0 + (l1 + (l2 + l3) * 2.0 + l4) * (dt / 6.0);
    Ok(EstimatorState {
        pose: g0 * exp_se3(&Twist::from_vector(&theta), 1.0),
        phi: VelocityError::from_vector(&phi),
        xi_hat,
    })
}
