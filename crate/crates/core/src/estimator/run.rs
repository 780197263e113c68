use std::fmt;
use std::str::FromStr;

use super::continuous::{rk4_step, Rk4Frames};
use super::lgvi::lgvi_step;
use super::{EstimatorGains, EstimatorState, NewtonConfig};
use crate::error::{Error, Result};
use crate::liegroup::Twist;
use crate::measurement::{KnownReference, MeasurementFrame};

/// Which integrator advances the estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntegratorMode {
    /// Discrete variational integrator (the estimator proper).
    Lgvi,
    /// RK4 of the continuous filter; measurements are interpolated linearly
    /// between samples and the measured twist is held.
    Rk4,
}

impl fmt::Display for IntegratorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntegratorMode::Lgvi => "lgvi",
            IntegratorMode::Rk4 => "rk4",
        })
    }
}

impl FromStr for IntegratorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lgvi" => Ok(IntegratorMode::Lgvi),
            "rk4" => Ok(IntegratorMode::Rk4),
            other => Err(Error::InvalidConfig(format!(
                "unknown integrator mode `{other}` (expected lgvi or rk4)"
            ))),
        }
    }
}

/// Measurements at one sample time together with the twist `ξ^m` derived
/// from them.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamSample {
    pub frame: MeasurementFrame,
    pub xi_meas: Twist,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub state: EstimatorState,
    /// Zero for the initial state and for RK4 steps.
    pub newton_iterations: usize,
    pub newton_residual: f64,
}

/// Advances one sample interval with the chosen integrator.
#[allow(clippy::too_many_arguments)]
pub fn advance(
    mode: IntegratorMode,
    state: &EstimatorState,
    current: &StreamSample,
    next: &MeasurementFrame,
    reference: &KnownReference,
    gains: &EstimatorGains,
    dt: f64,
    newton: &NewtonConfig,
) -> Result<StepRecord> {
    match mode {
        IntegratorMode::Lgvi => {
            let step = lgvi_step(state, next, reference, &current.xi_meas, gains, dt, newton)?;
            Ok(StepRecord {
                state: step.state,
                newton_iterations: step.newton_iterations,
                newton_residual: step.newton_residual,
            })
        }
        IntegratorMode::Rk4 => {
            let mid = current.frame.lerp(next, 0.5);
            let frames = Rk4Frames {
                start: &current.frame,
                mid: &mid,
                end: next,
            };
            let state = rk4_step(state, &current.xi_meas, frames, reference, gains, dt)?;
            Ok(StepRecord {
                state,
                newton_iterations: 0,
                newton_residual: 0.0,
            })
        }
    }
}

/// Folds the chosen stepper over a uniformly sampled stream. The returned
/// trajectory has one entry per sample, starting with `initial`.
pub fn run_estimator(
    initial: EstimatorState,
    stream: &[StreamSample],
    reference: &KnownReference,
    gains: &EstimatorGains,
    dt: f64,
    mode: IntegratorMode,
    newton: &NewtonConfig,
) -> Result<Vec<StepRecord>> {
    if stream.is_empty() {
        return Err(Error::InvalidConfig("measurement stream is empty".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let mut out = Vec::with_capacity(stream.len());
    out.push(StepRecord {
        state: initial,
        newton_iterations: 0,
        newton_residual: 0.0,
    });
    let mut state = initial;
    for (i, pair) in stream.windows(2).enumerate() {
        let spacing = pair[1].frame.timestamp - pair[0].frame.timestamp;
        if (spacing - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "stream is not sampled at dt = {dt} (spacing {spacing})"
            ))
            .at_step(i));
        }
        let rec = advance(mode, &state, &pair[0], &pair[1].frame, reference, gains, dt, newton)
            .map_err(|e| e.at_step(i))?;
        state = rec.state;
        out.push(rec);
    }
    Ok(out)
}
