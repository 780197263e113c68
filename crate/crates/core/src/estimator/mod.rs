//! The variational pose-and-velocity estimator.
//!
//! The estimation error `h = g ĝ⁻¹` evolves like a rigid body on SE(3) with
//! potential energy [`potential::total_potential`], kinetic energy
//! `½ φᵀ 𝕁 φ` and Rayleigh dissipation `𝔻 φ`, where `φ = Ad_ĝ(ξ^m − ξ̂)`.
//! [`continuous`] holds the continuous-time filter and its RK4 reference
//! stepper, [`lgvi`] the discrete variational integrator.

pub mod continuous;
pub mod lgvi;
pub mod newton;
pub mod potential;
pub mod run;

use nalgebra::{DMatrix, Matrix3, Matrix6, SymmetricEigen};

use crate::error::{Error, Result};
use crate::liegroup::{adjoint_matrix, Pose, Twist, VelocityError};

pub use continuous::{continuous_rhs, rk4_step, Rk4Frames};
pub use lgvi::{discrete_energy, lgvi_step, LgviStep};
pub use newton::{newton_solve_f, NewtonConfig, NewtonSolution};
pub use potential::{s_gamma, total_potential, translational_potential, wahba_cost, z_vector};
pub use run::{run_estimator, IntegratorMode, StepRecord, StreamSample};

/// The shaping function `Φ` applied to the Wahba cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PotentialShaping {
    /// `Φ(x) = x`
    Linear,
    /// `Φ(x) = x + ε x²`
    Quadratic { epsilon: f64 },
}

impl PotentialShaping {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            PotentialShaping::Linear => x,
            PotentialShaping::Quadratic { epsilon } => x + epsilon * x * x,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            PotentialShaping::Linear => 1.0,
            PotentialShaping::Quadratic { epsilon } => 1.0 + 2.0 * epsilon * x,
        }
    }

    /// `Φ(0) = 0` and `Φ′ > 0`, checked on a grid over `[0, 1e3]`.
    pub fn validate(&self) -> Result<()> {
        if let PotentialShaping::Quadratic { epsilon } = self {
            if !(epsilon.is_finite() && *epsilon >= 0.0) {
                return Err(Error::InvalidGain {
                    field: "phi",
                    reason: format!("quadratic coefficient must be finite and ≥ 0, got {epsilon}"),
                });
            }
        }
        if self.value(0.0) != 0.0 {
            return Err(Error::InvalidGain {
                field: "phi",
                reason: "Φ(0) must be 0".into(),
            });
        }
        let bad = (0..=1000)
            .map(|k| k as f64)
            .find(|&x| !(self.derivative(x) > 0.0));
        if let Some(x) = bad {
            return Err(Error::InvalidGain {
                field: "phi",
                reason: format!("Φ′({x}) is not positive"),
            });
        }
        Ok(())
    }
}

/// Tunable kernels of the filter.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorGains {
    /// Rotational inertia-like gain `J`.
    pub j: Matrix3<f64>,
    /// Translational inertia-like gain `M`.
    pub m: Matrix3<f64>,
    /// Rotational dissipation `𝔻_r`.
    pub d_r: Matrix3<f64>,
    /// Translational dissipation `𝔻_t`.
    pub d_t: Matrix3<f64>,
    pub kappa: f64,
    /// Weights of the pairwise vectors in the Wahba cost, β×β.
    pub w: DMatrix<f64>,
    pub phi: PotentialShaping,
}

impl EstimatorGains {
    /// Gains of the two-UAV simulation with `κ = 1` and `W = I`.
    pub fn paper(pair_count: usize) -> Self {
        EstimatorGains {
            j: Matrix3::from_diagonal(&[0.9, 0.6, 0.3].into()),
            m: Matrix3::from_diagonal(&[0.0608, 0.0486, 0.0365].into()),
            d_r: Matrix3::from_diagonal(&[2.7, 2.2, 1.5].into()),
            d_t: Matrix3::from_diagonal(&[0.1, 0.12, 0.14].into()),
            kappa: 1.0,
            w: DMatrix::identity(pair_count, pair_count),
            phi: PotentialShaping::Linear,
        }
    }

    /// `𝕁 = blkdiag(J, M)`.
    pub fn inertia(&self) -> Matrix6<f64> {
        block_diag(&self.j, &self.m)
    }

    /// `𝔻 = blkdiag(𝔻_r, 𝔻_t)`.
    pub fn dissipation(&self) -> Matrix6<f64> {
        block_diag(&self.d_r, &self.d_t)
    }

    pub fn validate(&self, pair_count: usize) -> Result<()> {
        for (field, mat) in [("J", &self.j), ("M", &self.m), ("Dr", &self.d_r), ("Dt", &self.d_t)] {
            check_spd(field, &DMatrix::from_column_slice(3, 3, mat.as_slice()))?;
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidGain {
                field: "kappa",
                reason: format!("must be positive, got {}", self.kappa),
            });
        }
        if self.w.shape() != (pair_count, pair_count) {
            return Err(Error::InvalidGain {
                field: "W",
                reason: format!(
                    "must be {pair_count}×{pair_count} for {pair_count} pairwise vectors, got {}×{}",
                    self.w.nrows(),
                    self.w.ncols()
                ),
            });
        }
        check_spd("W", &self.w)?;
        self.phi.validate()
    }
}

fn block_diag(a: &Matrix3<f64>, b: &Matrix3<f64>) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(a);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(b);
    m
}

fn check_spd(field: &'static str, m: &DMatrix<f64>) -> Result<()> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidGain {
            field,
            reason: "contains non-finite entries".into(),
        });
    }
    let asym = (m - m.transpose()).norm();
    if asym > 1e-12 * m.norm().max(1.0) {
        return Err(Error::InvalidGain {
            field,
            reason: format!("must be symmetric (‖A − Aᵀ‖ = {asym:.3e})"),
        });
    }
    let min_eig = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(min_eig > 0.0) {
        return Err(Error::InvalidGain {
            field,
            reason: format!("must be positive definite (smallest eigenvalue {min_eig:.3e})"),
        });
    }
    Ok(())
}

/// Pose estimate, velocity-estimation error and the last computed twist
/// estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorState {
    pub pose: Pose,
    pub phi: VelocityError,
    pub xi_hat: Twist,
}

impl EstimatorState {
    /// State whose twist estimate is `xi_hat` when the measured twist is
    /// `xi_meas`: `φ = Ad_ĝ(ξ^m − ξ̂)`.
    pub fn from_twist_estimate(pose: Pose, xi_hat: Twist, xi_meas: &Twist) -> Self {
        let diff = xi_meas.to_vector() - xi_hat.to_vector();
        let phi = VelocityError::from_vector(&(adjoint_matrix(&pose) * diff));
        EstimatorState { pose, phi, xi_hat }
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite()
            && self.xi_hat.is_finite()
            && self.pose.translation.iter().all(|x| x.is_finite())
            && self.pose.rotation.matrix().iter().all(|x| x.is_finite())
    }
}

/// `ξ̂ = ξ^m − Ad_{ĝ⁻¹} φ`.
pub fn estimated_twist(pose: &Pose, phi: &VelocityError, xi_meas: &Twist) -> Twist {
    let back = adjoint_matrix(&pose.inverse()) * phi.to_vector();
    Twist::from_vector(&(xi_meas.to_vector() - back))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::exp_so3;
    use nalgebra::Vector3;

    #[test]
    fn paper_gains_are_valid() {
        let g = EstimatorGains::paper(3);
        g.validate(3).unwrap();
        assert_eq!(g.j, Matrix3::from_diagonal(&Vector3::new(0.9, 0.6, 0.3)));
        assert_eq!(g.m, Matrix3::from_diagonal(&Vector3::new(0.0608, 0.0486, 0.0365)));
        assert_eq!(g.d_r, Matrix3::from_diagonal(&Vector3::new(2.7, 2.2, 1.5)));
        assert_eq!(g.d_t, Matrix3::from_diagonal(&Vector3::new(0.1, 0.12, 0.14)));
    }

    #[test]
    fn invalid_gains_name_the_field() {
        let mut g = EstimatorGains::paper(3);
        g.j[(2, 2)] = 0.0;
        assert!(matches!(g.validate(3), Err(Error::InvalidGain { field: "J", .. })));

        let mut g = EstimatorGains::paper(3);
        g.d_t[(0, 0)] = -0.1;
        assert!(matches!(g.validate(3), Err(Error::InvalidGain { field: "Dt", .. })));

        let mut g = EstimatorGains::paper(3);
        g.m[(0, 1)] = 0.01;
        assert!(matches!(g.validate(3), Err(Error::InvalidGain { field: "M", .. })));

        let mut g = EstimatorGains::paper(3);
        g.kappa = 0.0;
        assert!(matches!(g.validate(3), Err(Error::InvalidGain { field: "kappa", .. })));

        let g = EstimatorGains::paper(3);
        assert!(matches!(g.validate(6), Err(Error::InvalidGain { field: "W", .. })));

        let mut g = EstimatorGains::paper(3);
        g.phi = PotentialShaping::Quadratic { epsilon: -1.0 };
        assert!(matches!(g.validate(3), Err(Error::InvalidGain { field: "phi", .. })));
    }

    #[test]
    fn shaping_functions() {
        for phi in [PotentialShaping::Linear, PotentialShaping::Quadratic { epsilon: 0.5 }] {
            phi.validate().unwrap();
            assert_eq!(phi.value(0.0), 0.0);
        }
        let q = PotentialShaping::Quadratic { epsilon: 0.5 };
        assert_eq!(q.value(2.0), 4.0);
        assert_eq!(q.derivative(2.0), 3.0);
    }

    #[test]
    fn twist_estimate_roundtrip() {
        let pose = Pose::new(exp_so3(&Vector3::new(0.2, -0.4, 0.9)), Vector3::new(-3.0, 2.0, 4.0));
        let xi_hat = Twist::new(Vector3::new(0.1, -0.5, 0.05), Vector3::new(0.05, -0.09, 0.01));
        let xi_meas = Twist::new(Vector3::zeros(), Vector3::new(0.08, -0.003, -0.0007));
        let s = EstimatorState::from_twist_estimate(pose, xi_hat, &xi_meas);
        let back = estimated_twist(&s.pose, &s.phi, &xi_meas);
        assert!((back.to_vector() - xi_hat.to_vector()).norm() < 1e-15);

        // at the identity pose ξ̂ = ξ^m − φ
        let phi = VelocityError::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(-1.0, 0.5, 0.0));
        let t = estimated_twist(&Pose::identity(), &phi, &xi_meas);
        assert_eq!(t.to_vector(), xi_meas.to_vector() - phi.to_vector());
    }
}
