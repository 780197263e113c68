//! Measurement-residual potentials and their gradient `Z`.

use nalgebra::{DMatrix, Matrix3xX, Vector3, Vector6};

use super::EstimatorGains;
use crate::liegroup::{vex, Pose};

/// Wahba cost `½⟨D − R̂L^m, (D − R̂L^m) W⟩`.
pub fn wahba_cost(g_hat: &Pose, l_meas: &Matrix3xX<f64>, d: &Matrix3xX<f64>, w: &DMatrix<f64>) -> f64 {
    let residual = d - g_hat.rotation.matrix() * l_meas;
    0.5 * (residual.transpose() * &residual * w).trace()
}

/// `½κ‖y‖²` with `y = p̄ − R̂ā^m − b̂`; returns the value and `y`.
pub fn translational_potential(
    g_hat: &Pose,
    a_bar: &Vector3<f64>,
    p_bar: &Vector3<f64>,
    kappa: f64,
) -> (f64, Vector3<f64>) {
    let y = p_bar - g_hat.rotation * *a_bar - g_hat.translation;
    (0.5 * kappa * y.norm_squared(), y)
}

/// `Φ(U⁰_r) + U_t`.
pub fn total_potential(
    g_hat: &Pose,
    l_meas: &Matrix3xX<f64>,
    d: &Matrix3xX<f64>,
    a_bar: &Vector3<f64>,
    p_bar: &Vector3<f64>,
    gains: &EstimatorGains,
) -> f64 {
    let rot = gains.phi.value(wahba_cost(g_hat, l_meas, d, &gains.w));
    rot + translational_potential(g_hat, a_bar, p_bar, gains.kappa).0
}

/// `S_Γ(R̂) = vex(D W L^mᵀ R̂ᵀ − R̂ L^m W Dᵀ)`.
pub fn s_gamma(g_hat: &Pose, l_meas: &Matrix3xX<f64>, d: &Matrix3xX<f64>, w: &DMatrix<f64>) -> Vector3<f64> {
    let a = s_gamma_argument(g_hat, l_meas, d, w);
    vex(&a)
}

/// The skew-symmetric matrix whose `vex` is `S_Γ`.
pub fn s_gamma_argument(
    g_hat: &Pose,
    l_meas: &Matrix3xX<f64>,
    d: &Matrix3xX<f64>,
    w: &DMatrix<f64>,
) -> nalgebra::Matrix3<f64> {
    let r = g_hat.rotation.matrix();
    let k = d * w * l_meas.transpose() * r.transpose();
    // R̂ L W Dᵀ = (D Wᵀ Lᵀ R̂ᵀ)ᵀ and W is symmetric
    let kt = r * l_meas * w * d.transpose();
    k - kt
}

/// Gradient of the total potential with respect to the error pose,
/// `Z = [Φ′(U⁰_r) S_Γ + κ p̄^× y; κ y]`.
pub fn z_vector(
    g_hat: &Pose,
    l_meas: &Matrix3xX<f64>,
    d: &Matrix3xX<f64>,
    a_bar: &Vector3<f64>,
    p_bar: &Vector3<f64>,
    gains: &EstimatorGains,
) -> Vector6<f64> {
    let u_r = wahba_cost(g_hat, l_meas, d, &gains.w);
    let s = s_gamma(g_hat, l_meas, d, &gains.w);
    let (_, y) = translational_potential(g_hat, a_bar, p_bar, gains.kappa);
    let top = s * gains.phi.derivative(u_r) + p_bar.cross(&y) * gains.kappa;
    let bottom = y * gains.kappa;
    Vector6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z)
}
