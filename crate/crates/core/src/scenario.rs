//! Two-vehicle simulation: truth generation, measurement synthesis, the
//! estimator loop and the error metrics.
//!
//! The truth is a prescribed relative twist profile integrated exactly per
//! step. At every sample the measurement pipeline runs before the estimator
//! step for the interval that starts there.

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::run::{advance, StreamSample};
use crate::estimator::{
    discrete_energy, estimated_twist, EstimatorGains, EstimatorState, IntegratorMode, NewtonConfig,
};
use crate::liegroup::{exp_se3, exp_so3, principal_angle, Pose, Rotation, Twist, VelocityError};
use crate::measurement::{
    extract_twist, point_velocity_matrix, project_features, BumpNoise, FeatureSet, KnownReference,
    MeasurementFrame, NoiseSpec, VelocityFilter,
};

/// Relative twist of the truth as a function of time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TwistProfile {
    Constant(Twist),
    /// `base + amplitude · sin(2π f t)`
    Sinusoidal {
        base: Twist,
        amplitude: Twist,
        frequency_hz: f64,
    },
}

impl TwistProfile {
    pub fn at(&self, t: f64) -> Twist {
        match *self {
            TwistProfile::Constant(xi) => xi,
            TwistProfile::Sinusoidal {
                base,
                amplitude,
                frequency_hz,
            } => {
                let s = (2.0 * PI * frequency_hz * t).sin();
                Twist::from_vector(&(base.to_vector() + amplitude.to_vector() * s))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthMotion {
    pub initial_pose: Pose,
    pub profile: TwistProfile,
}

/// Where the estimator's measured twist `ξ^m` comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VelocitySource {
    /// Filtered finite differences of the measured points, then the
    /// pseudo-inverse twist extraction.
    Filtered { cutoff_hz: f64 },
    /// The true relative twist, injected directly.
    Truth,
}

/// Initial estimate, given either as a twist estimate or as `φ₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialEstimate {
    Twist { pose: Pose, xi_hat: Twist },
    VelocityError { pose: Pose, phi: VelocityError },
}

impl InitialEstimate {
    pub fn pose(&self) -> &Pose {
        match self {
            InitialEstimate::Twist { pose, .. } | InitialEstimate::VelocityError { pose, .. } => pose,
        }
    }

    /// Resolves against the first measured twist.
    pub fn to_state(&self, xi_meas: &Twist) -> EstimatorState {
        match *self {
            InitialEstimate::Twist { pose, xi_hat } => {
                EstimatorState::from_twist_estimate(pose, xi_hat, xi_meas)
            }
            InitialEstimate::VelocityError { pose, phi } => EstimatorState {
                pose,
                phi,
                xi_hat: estimated_twist(&pose, &phi, xi_meas),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub duration: f64,
    pub dt: f64,
    pub features: FeatureSet,
    pub truth: TruthMotion,
    pub noise: NoiseSpec,
    pub gains: EstimatorGains,
    pub initial_estimate: InitialEstimate,
    pub velocity_source: VelocitySource,
    pub newton: NewtonConfig,
    pub mode: IntegratorMode,
}

/// Initial relative pose of the observed vehicle in the two-UAV run.
pub fn paper_initial_pose() -> Pose {
    Pose::new(Rotation::identity(), Vector3::new(1.5, 5.0, 6.0))
}

/// Initial relative twist of the two-UAV run.
pub fn paper_initial_twist() -> Twist {
    Twist::new(Vector3::zeros(), Vector3::new(0.08, -0.003, -0.0007))
}

/// Initial estimate of the two-UAV run, as `(ĝ₀, ξ̂₀)`.
pub fn paper_initial_estimate() -> InitialEstimate {
    InitialEstimate::Twist {
        pose: Pose::new(
            exp_so3(&(Vector3::z() * FRAC_PI_4)),
            Vector3::new(-3.0, 2.0, 4.0),
        ),
        xi_hat: Twist::new(
            Vector3::new(0.1, -0.5, 0.05),
            Vector3::new(0.05, -0.09, 0.01),
        ),
    }
}

/// Estimator state of the two-UAV run given the first measured twist:
/// `φ₀ = Ad_{ĝ₀}(ξ^m₀ − ξ̂₀)`.
pub fn initial_estimate_from_paper(xi_meas0: &Twist) -> EstimatorState {
    paper_initial_estimate().to_state(xi_meas0)
}

impl ScenarioConfig {
    /// The two-UAV simulation: T = 10 s, dt = 0.01 s, 1 mm bump noise.
    pub fn paper() -> Self {
        let features = FeatureSet::paper();
        let pairs = features.pair_count();
        ScenarioConfig {
            duration: 10.0,
            dt: 0.01,
            features,
            truth: TruthMotion {
                initial_pose: paper_initial_pose(),
                profile: TwistProfile::Constant(paper_initial_twist()),
            },
            noise: NoiseSpec {
                support_width: 1e-3,
                velocity_support_width: 1e-3,
                seed: 1,
            },
            gains: EstimatorGains::paper(pairs),
            initial_estimate: paper_initial_estimate(),
            velocity_source: VelocitySource::Filtered { cutoff_hz: 10.0 },
            newton: NewtonConfig::default(),
            mode: IntegratorMode::Lgvi,
        }
    }

    /// Number of estimator steps, `T / dt`.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidTimeStep(self.dt));
        }
        let ratio = self.duration / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "duration {} is not an integer multiple of dt {}",
                self.duration, self.dt
            )));
        }
        self.noise.validate()?;
        self.gains.validate(self.features.pair_count())?;
        self.newton.validate()?;
        if let VelocitySource::Filtered { cutoff_hz } = self.velocity_source {
            if !(cutoff_hz > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "velocity filter cutoff must be positive, got {cutoff_hz}"
                )));
            }
        }
        if let TwistProfile::Sinusoidal { frequency_hz, .. } = self.truth.profile {
            if !frequency_hz.is_finite() {
                return Err(Error::InvalidConfig("sinusoid frequency must be finite".into()));
            }
        }
        Ok(())
    }
}

/// One sample of the truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthSample {
    pub time: f64,
    pub pose: Pose,
    pub twist: Twist,
}

/// Truth poses at every sample, `g_{i+1} = g_i exp(dt ξ(t_i))`.
pub fn generate_truth(config: &ScenarioConfig) -> Vec<TruthSample> {
    let mut truth = TruthIntegrator::new(&config.truth, config.dt);
    let mut out = Vec::with_capacity(config.steps() + 1);
    out.push(truth.current);
    for _ in 0..config.steps() {
        out.push(truth.advance());
    }
    out
}

struct TruthIntegrator {
    motion: TruthMotion,
    dt: f64,
    index: usize,
    current: TruthSample,
}

impl TruthIntegrator {
    fn new(motion: &TruthMotion, dt: f64) -> Self {
        TruthIntegrator {
            motion: *motion,
            dt,
            index: 0,
            current: TruthSample {
                time: 0.0,
                pose: motion.initial_pose,
                twist: motion.profile.at(0.0),
            },
        }
    }

    fn advance(&mut self) -> TruthSample {
        self.index += 1;
        let time = self.index as f64 * self.dt;
        let pose = self.current.pose * exp_se3(&self.current.twist, self.dt);
        self.current = TruthSample {
            time,
            pose,
            twist: self.motion.profile.at(time),
        };
        self.current
    }
}

/// Estimation errors with the convention `Q = R R̂ᵀ`, `x = b − Q b̂`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorMetrics {
    /// Principal angle of `Q` (rad).
    pub attitude: f64,
    /// `x = b − Q b̂` (m).
    pub position: Vector3<f64>,
    /// `b − b̂` (m).
    pub position_raw: Vector3<f64>,
    /// `Ω − Ω̂` (rad/s).
    pub omega: Vector3<f64>,
    /// `ν − ν̂` (m/s).
    pub nu: Vector3<f64>,
}

pub fn error_metrics(true_pose: &Pose, true_twist: &Twist, est_pose: &Pose, est_twist: &Twist) -> ErrorMetrics {
    let q = true_pose.rotation * est_pose.rotation.transpose();
    ErrorMetrics {
        attitude: principal_angle(&q),
        position: true_pose.translation - q * est_pose.translation,
        position_raw: true_pose.translation - est_pose.translation,
        omega: true_twist.omega - est_twist.omega,
        nu: true_twist.nu - est_twist.nu,
    }
}

/// Everything logged for one sample time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunRecord {
    pub time: f64,
    pub true_pose: Pose,
    pub true_twist: Twist,
    pub est_pose: Pose,
    pub est_twist: Twist,
    pub errors: ErrorMetrics,
    /// Newton iterations of the step taken from this sample.
    pub newton_iterations: usize,
    pub newton_residual: f64,
    /// `½ωᵀJω + ½υᵀMυ + U(ĝ)` with this sample's measurements.
    pub energy: f64,
}

/// Step-by-step driver: owns the truth, the measurement pipeline, and the
/// estimator state. Memory use does not grow with the number of steps.
pub struct Simulation {
    config: ScenarioConfig,
    reference: KnownReference,
    rng: ChaCha8Rng,
    position_noise: BumpNoise,
    velocity_noise: BumpNoise,
    filter: Option<VelocityFilter>,
    truth: TruthIntegrator,
    sample: StreamSample,
    state: EstimatorState,
    step: usize,
}

impl Simulation {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let filter = match config.velocity_source {
            VelocitySource::Filtered { cutoff_hz } => Some(VelocityFilter::new(config.dt, cutoff_hz)?),
            VelocitySource::Truth => None,
        };
        let mut sim = Simulation {
            reference: KnownReference::from_features(&config.features),
            rng: config.noise.rng(),
            position_noise: BumpNoise::new(config.noise.support_width),
            velocity_noise: BumpNoise::new(config.noise.velocity_support_width),
            filter,
            truth: TruthIntegrator::new(&config.truth, config.dt),
            sample: StreamSample {
                frame: MeasurementFrame::exact(0.0, &Pose::identity(), &Twist::zero(), &config.features),
                xi_meas: Twist::zero(),
            },
            state: EstimatorState {
                pose: Pose::identity(),
                phi: VelocityError::zero(),
                xi_hat: Twist::zero(),
            },
            step: 0,
            config: config.clone(),
        };
        sim.sample = sim.synthesize()?;
        sim.state = config.initial_estimate.to_state(&sim.sample.xi_meas);
        Ok(sim)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn reference(&self) -> &KnownReference {
        &self.reference
    }

    pub fn state(&self) -> &EstimatorState {
        &self.state
    }

    pub fn truth(&self) -> &TruthSample {
        &self.truth.current
    }

    pub fn sample(&self) -> &StreamSample {
        &self.sample
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.steps()
    }

    // measurements at the current truth sample
    fn synthesize(&mut self) -> Result<StreamSample> {
        let truth = self.truth.current;
        let clean = project_features(&truth.pose, &self.config.features);
        let a_meas: Vec<_> = clean
            .iter()
            .map(|a| a + self.position_noise.sample_vector(&mut self.rng))
            .collect();
        let velocity_noise: Vec<_> = (0..a_meas.len())
            .map(|_| self.velocity_noise.sample_vector(&mut self.rng))
            .collect();
        let (v_meas, xi_meas) = match self.filter.as_mut() {
            Some(filter) => {
                let v: Vec<_> = filter
                    .update(&a_meas)
                    .iter()
                    .zip(&velocity_noise)
                    .map(|(v, n)| v + n)
                    .collect();
                let xi = extract_twist(&a_meas, &v)?;
                (v, xi)
            }
            None => {
                let v = clean
                    .iter()
                    .zip(&velocity_noise)
                    .map(|(a, n)| point_velocity_matrix(a) * truth.twist.to_vector() + n)
                    .collect();
                (v, truth.twist)
            }
        };
        Ok(StreamSample {
            frame: MeasurementFrame::new(truth.time, a_meas, v_meas)?,
            xi_meas,
        })
    }

    /// Metrics of the current sample. `newton` is filled in by [`advance`].
    ///
    /// [`advance`]: Simulation::advance
    pub fn record(&self) -> RunRecord {
        let truth = self.truth.current;
        let est_twist = estimated_twist(&self.state.pose, &self.state.phi, &self.sample.xi_meas);
        RunRecord {
            time: truth.time,
            true_pose: truth.pose,
            true_twist: truth.twist,
            est_pose: self.state.pose,
            est_twist,
            errors: error_metrics(&truth.pose, &truth.twist, &self.state.pose, &est_twist),
            newton_iterations: 0,
            newton_residual: 0.0,
            energy: discrete_energy(&self.state, &self.sample.frame, &self.reference, &self.config.gains),
        }
    }

    /// Advances truth, measurements and estimator by one step. Returns the
    /// record of the sample the step started from.
    pub fn advance(&mut self) -> Result<RunRecord> {
        let step = self.step;
        let mut record = self.record();
        self.truth.advance();
        let next = self.synthesize().map_err(|e| e.at_step(step))?;
        let out = advance(
            self.config.mode,
            &self.state,
            &self.sample,
            &next.frame,
            &self.reference,
            &self.config.gains,
            self.config.dt,
            &self.config.newton,
        )
        .map_err(|e| e.at_step(step))?;
        if !out.state.is_finite() {
            return Err(Error::NonFiniteState.at_step(step));
        }
        record.newton_iterations = out.newton_iterations;
        record.newton_residual = out.newton_residual;
        self.state = out.state;
        self.sample = next;
        self.step += 1;
        Ok(record)
    }
}

/// Records of a whole run.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioRun {
    /// One record per step, at the sample each step starts from
    /// (`t = 0, dt, …, T − dt`).
    pub records: Vec<RunRecord>,
    /// The state reached at `t = T`.
    pub terminal: RunRecord,
}

impl ScenarioRun {
    pub fn max_newton_iterations(&self) -> usize {
        self.records.iter().map(|r| r.newton_iterations).max().unwrap_or(0)
    }

    pub fn max_newton_residual(&self) -> f64 {
        self.records.iter().map(|r| r.newton_residual).fold(0.0, f64::max)
    }

    /// Mean of `metric` over records with `time ≥ from`, the terminal one
    /// included.
    pub fn mean_since(&self, from: f64, metric: impl Fn(&RunRecord) -> f64) -> f64 {
        let values: Vec<f64> = self
            .records
            .iter()
            .chain(std::iter::once(&self.terminal))
            .filter(|r| r.time >= from - 1e-9)
            .map(metric)
            .collect();
        values.iter().sum::<f64>() / values.len().max(1) as f64
    }
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    let mut sim = Simulation::new(config)?;
    let mut records = Vec::with_capacity(config.steps());
    while !sim.is_finished() {
        records.push(sim.advance()?);
    }
    Ok(ScenarioRun {
        records,
        terminal: sim.record(),
    })
}
