//! Implicit rotational update `Δt (Jω)^× = F 𝒥 − 𝒥 Fᵀ`, solved for
//! `F ∈ SO(3)` by Newton iteration in the exponential chart `F = exp(f^×)`.
//!
//! With `𝒥 = ½ tr(J) I − J` the right-hand side has the vector form
//! `vex(F𝒥 − 𝒥Fᵀ) = (sin θ/θ) J f + ((1 − cos θ)/θ²) f × J f`, `θ = ‖f‖`,
//! which is differentiated analytically for the Newton Jacobian.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::liegroup::{exp_so3, hat3, vex, Rotation};

/// Below this chart radius the Jacobian coefficients use Taylor series.
const SERIES_RADIUS: f64 = 1e-2;

/// Step of the central-difference Jacobian used when the analytic one is
/// singular.
const FD_STEP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Bound on the Frobenius norm of the matrix residual.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tolerance: 1e-12,
            max_iterations: 50,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations < 1 {
            return Err(Error::InvalidConfig(format!(
                "newton tolerance must be > 0 and max_iterations ≥ 1, got {} and {}",
                self.tolerance, self.max_iterations
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSolution {
    pub f: Rotation,
    /// Newton updates performed; 0 when the initial guess already satisfies
    /// the tolerance.
    pub iterations: usize,
    /// Frobenius norm of `Δt (Jω)^× − (F𝒥 − 𝒥Fᵀ)` at the returned `F`.
    pub residual: f64,
}

/// `𝒥 = ½ tr(J) I − J`.
pub fn nonstandard_inertia(j: &Matrix3<f64>) -> Matrix3<f64> {
    Matrix3::identity() * (0.5 * j.trace()) - j
}

/// Matrix residual `Δt (Jω)^× − (F𝒥 − 𝒥Fᵀ)`.
pub fn residual_matrix(f: &Rotation, omega: &Vector3<f64>, j: &Matrix3<f64>, dt: f64) -> Matrix3<f64> {
    let jd = nonstandard_inertia(j);
    let fm = f.matrix();
    hat3(&(j * omega * dt)) - (fm * jd - jd * fm.transpose())
}

/// Vector form of `vex(F𝒥 − 𝒥Fᵀ)` for `F = exp(f^×)`.
pub fn momentum_map(f: &Vector3<f64>, j: &Matrix3<f64>) -> Vector3<f64> {
    let (a, b, _, _) = chart_coefficients(f.norm());
    let jf = j * f;
    jf * a + f.cross(&jf) * b
}

// (sin θ/θ, (1 − cos θ)/θ², a′(θ)/θ, b′(θ)/θ)
fn chart_coefficients(theta: f64) -> (f64, f64, f64, f64) {
    let t2 = theta * theta;
    if theta < SERIES_RADIUS {
        let t4 = t2 * t2;
        (
            1.0 - t2 / 6.0 + t4 / 120.0,
            0.5 - t2 / 24.0 + t4 / 720.0,
            -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0,
            -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        (
            s / theta,
            (1.0 - c) / t2,
            (theta * c - s) / (t2 * theta),
            (theta * s - 2.0 * (1.0 - c)) / (t2 * t2),
        )
    }
}

/// Analytic Jacobian of [`momentum_map`] with respect to `f`.
pub fn momentum_jacobian(f: &Vector3<f64>, j: &Matrix3<f64>) -> Matrix3<f64> {
    let (a, b, da, db) = chart_coefficients(f.norm());
    let jf = j * f;
    let fxjf = f.cross(&jf);
    j * a + jf * f.transpose() * da + (hat3(f) * j - hat3(&jf)) * b + fxjf * f.transpose() * db
}

fn fd_jacobian(f: &Vector3<f64>, j: &Matrix3<f64>) -> Matrix3<f64> {
    let jd = nonstandard_inertia(j);
    let map = |x: &Vector3<f64>| {
        let m = exp_so3(x);
        vex(&(m.matrix() * jd - jd * m.matrix().transpose()))
    };
    let mut jac = Matrix3::zeros();
    for k in 0..3 {
        let e = Vector3::ith(k, FD_STEP);
        jac.set_column(k, &((map(&(f + e)) - map(&(f - e))) / (2.0 * FD_STEP)));
    }
    jac
}

/// Solves `Δt (Jω)^× = F𝒥 − 𝒥Fᵀ` for `F`, starting from `f₀ = Δt ω`.
pub fn newton_solve_f(
    omega: &Vector3<f64>,
    j: &Matrix3<f64>,
    dt: f64,
    cfg: &NewtonConfig,
) -> Result<NewtonSolution> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let target = j * omega * dt;
    let mut f = omega * dt;
    let mut residual = f64::INFINITY;
    for iterations in 0..=cfg.max_iterations {
        let rot = exp_so3(&f);
        let r = residual_matrix(&rot, omega, j, dt);
        residual = r.norm();
        if residual <= cfg.tolerance {
            return Ok(NewtonSolution {
                f: rot,
                iterations,
                residual,
            });
        }
        if !residual.is_finite() || iterations == cfg.max_iterations {
            break;
        }
        let rhs = target - momentum_map(&f, j);
        let step = momentum_jacobian(&f, j)
            .lu()
            .solve(&rhs)
            .or_else(|| fd_jacobian(&f, j).lu().solve(&rhs));
        match step {
            Some(step) => f += step,
            None => break,
        }
    }
    Err(Error::NewtonDiverged {
        iterations: cfg.max_iterations,
        residual,
    })
}
