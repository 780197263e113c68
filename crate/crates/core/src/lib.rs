//! Variational estimation of relative pose and velocities on SE(3).
//!
//! The estimator treats the pose-estimation error as the configuration of an
//! artificial rigid body whose potential energy is built from optical
//! measurement residuals (a Wahba-type attitude cost plus a translational
//! term) and whose kinetic energy is built from the velocity-estimation error.
//! A linear dissipation term drains that energy, so the estimate converges to
//! the true relative motion. Two integrators are provided:
//!
//! * [`estimator::lgvi_step`], the first-order Lie group variational
//!   integrator with an implicit Newton solve on SO(3), which keeps the pose
//!   estimate on SE(3) without re-projection;
//! * [`estimator::rk4_step`], a fourth-order Runge-Kutta-Munthe-Kaas stepper
//!   of the continuous-time filter, used as a cross-validation reference.
//!
//! [`scenario`] reproduces the two-vehicle simulation end to end, and
//! [`acceptance`] holds the property checks that define a healthy build.

pub mod acceptance;
pub mod error;
pub mod estimator;
pub mod liegroup;
pub mod measurement;
pub mod scenario;

pub use error::{Error, Result};
pub use estimator::{
    EstimatorGains, EstimatorState, IntegratorMode, NewtonConfig, PotentialShaping,
};
pub use liegroup::{Pose, Rotation, Twist, VelocityError};
pub use measurement::{FeatureSet, KnownReference, MeasurementFrame, NoiseSpec};
pub use scenario::{run_scenario, RunRecord, ScenarioConfig, ScenarioRun};

