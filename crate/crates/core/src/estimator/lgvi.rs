//! First-order Lie group variational integrator for the filter.
//!
//! One step, in the only order in which every right-hand side is available:
//!
//! 1. `ξ̂_i = ξ^m_i − Ad_{ĝ_i⁻¹} φ_i`
//! 2. `ĝ_{i+1} = ĝ_i exp(Δt ξ̂_i^∨)`
//! 3. `Δt (Jω_i)^× = F_i 𝒥 − 𝒥 F_iᵀ`, solved for `F_i`
//! 4. `(M + Δt𝔻_t) υ_{i+1} = F_iᵀ M υ_i + Δt κ (b̂_{i+1} + R̂_{i+1} ā^m_{i+1} − p̄)`
//! 5. `(J + Δt𝔻_r) ω_{i+1} = F_iᵀ J ω_i + Δt Mυ_{i+1} × υ_{i+1}
//!    + Δt κ p̄^× (b̂_{i+1} + R̂_{i+1} ā^m_{i+1}) − Δt Φ′(U⁰_r) S_Γ(R̂_{i+1})`

use nalgebra::Matrix3;

use super::newton::{newton_solve_f, NewtonConfig};
use super::potential::{s_gamma, total_potential, wahba_cost};
use super::{estimated_twist, EstimatorGains, EstimatorState};
use crate::error::{Error, Result};
use crate::liegroup::{exp_se3, Twist, VelocityError};
use crate::measurement::{KnownReference, MeasurementFrame};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LgviStep {
    pub state: EstimatorState,
    pub newton_iterations: usize,
    pub newton_residual: f64,
}

/// Advances `(ĝ_i, φ_i)` to `(ĝ_{i+1}, φ_{i+1})`.
///
/// `next` holds the measurements at `t_{i+1}`; `xi_meas` is `ξ^m_i`. The
/// returned state carries `ξ̂_i`, the twist used for the pose update.
pub fn lgvi_step(
    state: &EstimatorState,
    next: &MeasurementFrame,
    reference: &KnownReference,
    xi_meas: &Twist,
    gains: &EstimatorGains,
    dt: f64,
    newton: &NewtonConfig,
) -> Result<LgviStep> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let omega = state.phi.omega;
    let upsilon = state.phi.upsilon;

    let xi_hat = estimated_twist(&state.pose, &state.phi, xi_meas);
    let pose = state.pose * exp_se3(&xi_hat, dt);

    let sol = newton_solve_f(&omega, &gains.j, dt, newton)?;
    let ft = sol.f.matrix().transpose();

    let r = pose.rotation.matrix();
    let observed_centroid = pose.translation + r * next.a_bar;
    let kappa = gains.kappa;

    let lhs_t = gains.m + gains.d_t * dt;
    let rhs_t = ft * (gains.m * upsilon) + (observed_centroid - reference.p_bar) * (dt * kappa);
    let upsilon_next = solve_spd(&lhs_t, &rhs_t);

    let u_r = wahba_cost(&pose, &next.l_meas, &reference.d, &gains.w);
    let s = s_gamma(&pose, &next.l_meas, &reference.d, &gains.w);
    let lhs_r = gains.j + gains.d_r * dt;
    let rhs_r = ft * (gains.j * omega)
        + (gains.m * upsilon_next).cross(&upsilon_next) * dt
        + reference.p_bar.cross(&observed_centroid) * (dt * kappa)
        - s * (dt * gains.phi.derivative(u_r));
    let omega_next = solve_spd(&lhs_r, &rhs_r);

    Ok(LgviStep {
        state: EstimatorState {
            pose,
            phi: VelocityError::new(omega_next, upsilon_next),
            xi_hat,
        },
        newton_iterations: sol.iterations,
        newton_residual: sol.residual,
    })
}

fn solve_spd(a: &Matrix3<f64>, b: &nalgebra::Vector3<f64>) -> nalgebra::Vector3<f64> {
    // gain + Δt·dissipation is positive definite
    a.cholesky().expect("positive definite").solve(b)
}

/// `E = ½ ωᵀJω + ½ υᵀMυ + U(ĝ)` evaluated with the measurements in `frame`.
pub fn discrete_energy(
    state: &EstimatorState,
    frame: &MeasurementFrame,
    reference: &KnownReference,
    gains: &EstimatorGains,
) -> f64 {
    let VelocityError { omega, upsilon } = state.phi;
    0.5 * omega.dot(&(gains.j * omega))
        + 0.5 * upsilon.dot(&(gains.m * upsilon))
        + total_potential(
            &state.pose,
            &frame.l_meas,
            &reference.d,
            &frame.a_bar,
            &reference.p_bar,
            gains,
        )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::{exp_so3, Pose};
    use crate::measurement::FeatureSet;
    use nalgebra::Vector3;

    #[test]
    fn discrete_equilibrium_is_exact() {
        let features = FeatureSet::paper();
        let reference = KnownReference::from_features(&features);
        let gains = EstimatorGains::paper(3);
        let xi = Twist::new(Vector3::new(0.02, -0.05, 0.1), Vector3::new(0.08, -0.003, -0.0007));
        let dt = 0.01;
        let mut truth = Pose::new(exp_so3(&Vector3::new(0.0, 0.3, 0.0)), Vector3::new(1.5, 5.0, 6.0));
        let mut state = EstimatorState {
            pose: truth,
            phi: VelocityError::zero(),
            xi_hat: xi,
        };
        for i in 0..500 {
            truth = truth * exp_se3(&xi, dt);
            let next = MeasurementFrame::exact((i + 1) as f64 * dt, &truth, &xi, &features);
            let step = lgvi_step(&state, &next, &reference, &xi, &gains, dt, &NewtonConfig::default()).unwrap();
            state = step.state;
            assert!((state.pose.to_homogeneous() - truth.to_homogeneous()).norm() < 1e-12);
            assert!(state.phi.to_vector().norm() < 1e-12);
        }
    }

    #[test]
    fn energy_of_paper_initial_condition() {
        let features = FeatureSet::paper();
        let reference = KnownReference::from_features(&features);
        let gains = EstimatorGains::paper(3);
        let truth = Pose::new(crate::Rotation::identity(), Vector3::new(1.5, 5.0, 6.0));
        let frame = MeasurementFrame::exact(0.0, &truth, &Twist::zero(), &features);
        let state = EstimatorState {
            pose: truth,
            phi: VelocityError::new(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 2.0, 0.0)),
            xi_hat: Twist::zero(),
        };
        let e = discrete_energy(&state, &frame, &reference, &gains);
        assert!((e - (0.5 * 0.9 + 0.5 * 4.0 * 0.0486)).abs() < 1e-14);
    }

    #[test]
    fn propagates_newton_failure() {
        let features = FeatureSet::paper();
        let reference = KnownReference::from_features(&features);
        let gains = EstimatorGains::paper(3);
        let frame = MeasurementFrame::exact(0.0, &Pose::identity(), &Twist::zero(), &features);
        let state = EstimatorState {
            pose: Pose::identity(),
            phi: VelocityError::new(Vector3::new(800.0, 0.0, 0.0), Vector3::zeros()),
            xi_hat: Twist::zero(),
        };
        let cfg = NewtonConfig { tolerance: 1e-12, max_iterations: 3 };
        let err = lgvi_step(&state, &frame, &reference, &Twist::zero(), &gains, 0.01, &cfg).unwrap_err();
        assert!(err.is_numerical());
    }
}
