//! The ten acceptance criteria, as runnable checks.
//!
//! Every check takes a base [`ScenarioConfig`] so that a tampered
//! configuration (say, a dissipation gain set to zero) surfaces as a named
//! failing criterion rather than a panic. Tolerances are pinned here as
//! constants. [`Scale::Desk`] shortens the long runs for smoke tests; only
//! [`Scale::Full`] decides acceptance.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{
    total_potential, z_vector, EstimatorGains, EstimatorState, IntegratorMode,
    PotentialShaping,
};
use crate::liegroup::{exp_se3, exp_so3, log_so3, Pose, Rotation, Twist};
use crate::measurement::{
    extract_twist, pairwise_matrix, point_velocity_matrix, project_features, FeatureSet,
    KnownReference, NoiseSpec,
};
use crate::scenario::{
    run_scenario, InitialEstimate, ScenarioConfig, Simulation, TwistProfile, VelocitySource,
};

pub const C1_TERMINAL_FRACTION: f64 = 0.10;
pub const C1_RUNTIME_SECONDS: f64 = 5.0;
pub const C2_DURATION: f64 = 60.0;
pub const C2_ATTITUDE: f64 = 1e-3;
pub const C2_POSITION: f64 = 1e-3;
pub const C3_SLACK: f64 = 1e-9;
pub const C4_STEPS: usize = 10_000;
pub const C4_RESIDUAL: f64 = 1e-12;
pub const C4_ITERATIONS: usize = 10;
pub const C5_STEPS: usize = 1_000_000;
pub const C5_ORTHONORMALITY: f64 = 1e-8;
pub const C5_YAW_RATE: f64 = 0.05;
pub const C6_TRIPLES: usize = 1000;
pub const C6_TOLERANCE: f64 = 1e-10;
pub const C7_STATES: usize = 100;
pub const C7_RELATIVE_ERROR: f64 = 1e-4;
pub const C8_RATIO: (f64, f64) = (1.7, 2.3);
pub const C9_WIDTHS_MM: [f64; 4] = [0.0, 1.0, 5.0, 10.0];
pub const C9_SEEDS: u64 = 5;
pub const C9_DURATION: f64 = 60.0;
pub const C9_WINDOW: f64 = 2.0;
pub const C10_SAMPLES: usize = 100;
pub const C10_MAX_ANGLE: f64 = 3.0;
pub const C10_DURATION: f64 = 120.0;

/// How much of each long run to execute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Full,
    /// Shorter runs and fewer samples; thresholds that depend on run length
    /// are not meaningful at this scale.
    Desk,
}

impl Scale {
    fn pick<T>(self, full: T, reduced: T) -> T {
        match self {
            Scale::Full => full,
            Scale::Desk => reduced,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    /// The headline quantity compared against `threshold`.
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {:>2} {:<28} measured {:.3e} threshold {:.3e}  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.threshold,
            self.detail
        )
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "scenario-reproduction"),
    (2, "noise-free-convergence"),
    (3, "energy-dissipation"),
    (4, "newton-correctness"),
    (5, "structure-preservation"),
    (6, "twist-recovery"),
    (7, "gradient-check"),
    (8, "integrator-consistency"),
    (9, "noise-monotonicity"),
    (10, "basin-sampling"),
];

/// Runs one criterion. Errors inside the check become a failed report.
pub fn run_criterion(id: u8, base: &ScenarioConfig, scale: Scale) -> CriterionReport {
    let name = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .unwrap_or("unknown");
    let result = match id {
        1 => scenario_reproduction(base),
        2 => noise_free_convergence(base, scale),
        3 => energy_dissipation(base, scale),
        4 => newton_correctness(base, scale),
        5 => structure_preservation(base, scale),
        6 => twist_recovery(scale),
        7 => gradient_check(base, scale),
        8 => integrator_consistency(base),
        9 => noise_monotonicity(base, scale),
        10 => basin_sampling(base, scale),
        other => Err(Error::InvalidConfig(format!("no criterion {other}"))),
    };
    match result {
        Ok(o) => CriterionReport {
            id,
            name,
            measured: o.measured,
            threshold: o.threshold,
            passed: o.passed,
            detail: o.detail,
        },
        Err(e) => CriterionReport {
            id,
            name,
            measured: f64::NAN,
            threshold: f64::NAN,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// All ten criteria, in order. The criteria run one after another (criterion
/// 1 times itself); the sweeps inside 9 and 10 are parallel.
pub fn run_all(base: &ScenarioConfig, scale: Scale) -> Vec<CriterionReport> {
    CRITERIA.iter().map(|(id, _)| run_criterion(*id, base, scale)).collect()
}

struct Outcome {
    measured: f64,
    threshold: f64,
    passed: bool,
    detail: String,
}

fn noise_free(base: &ScenarioConfig) -> ScenarioConfig {
    let mut c = base.clone();
    c.noise = NoiseSpec {
        support_width: 0.0,
        velocity_support_width: 0.0,
        ..base.noise
    };
    c
}

fn with_duration(base: &ScenarioConfig, duration: f64) -> ScenarioConfig {
    let mut c = base.clone();
    c.duration = duration;
    c
}

/// Terminal principal angle and `‖b − b̂‖` after running `config`, streaming.
fn terminal_errors(config: &ScenarioConfig) -> Result<(f64, f64)> {
    let mut sim = Simulation::new(config)?;
    while !sim.is_finished() {
        sim.advance()?;
    }
    let r = sim.record();
    Ok((r.errors.attitude, r.errors.position_raw.norm()))
}

fn scenario_reproduction(base: &ScenarioConfig) -> Result<Outcome> {
    let start = Instant::now();
    let run = run_scenario(base)?;
    let runtime = start.elapsed().as_secs_f64();

    let first = &run.records[0];
    let (theta0, x0) = (first.errors.attitude, first.errors.position_raw.norm());
    let (theta_t, x_t) = (run.terminal.errors.attitude, run.terminal.errors.position_raw.norm());
    let fraction = (theta_t / theta0).max(x_t / x0);
    // bounded: nothing in the second half exceeds the initial error
    let half = base.duration * 0.5;
    let bounded = run
        .records
        .iter()
        .filter(|r| r.time >= half)
        .all(|r| r.errors.attitude <= theta0 && r.errors.position_raw.norm() <= x0);
    Ok(Outcome {
        measured: fraction,
        threshold: C1_TERMINAL_FRACTION,
        passed: fraction < C1_TERMINAL_FRACTION && bounded && runtime < C1_RUNTIME_SECONDS,
        detail: format!(
            "attitude {theta0:.4} -> {theta_t:.3e} rad, position {x0:.4} -> {x_t:.3e} m, \
             bounded in second half: {bounded}, runtime {runtime:.3} s (limit {C1_RUNTIME_SECONDS} s)"
        ),
    })
}

fn noise_free_convergence(base: &ScenarioConfig, scale: Scale) -> Result<Outcome> {
    let c = with_duration(&noise_free(base), scale.pick(C2_DURATION, 20.0));
    let (theta, x) = terminal_errors(&c)?;
    Ok(Outcome {
        measured: theta.max(x),
        threshold: C2_ATTITUDE.min(C2_POSITION),
        passed: theta < C2_ATTITUDE && x < C2_POSITION,
        detail: format!("T = {} s: attitude {theta:.3e} rad, position {x:.3e} m", c.duration),
    })
}

/// Largest single-step energy increase of a run, and where it happened.
fn max_energy_increase(config: &ScenarioConfig) -> Result<(f64, f64)> {
    let mut sim = Simulation::new(config)?;
    let mut prev = sim.record().energy;
    let mut worst = (f64::NEG_INFINITY, 0.0);
    while !sim.is_finished() {
        sim.advance()?;
        let r = sim.record();
        if r.energy - prev > worst.0 {
            worst = (r.energy - prev, r.time);
        }
        prev = r.energy;
    }
    Ok(worst)
}

fn energy_dissipation(base: &ScenarioConfig, scale: Scale) -> Result<Outcome> {
    // the scenario as configured, and with the measured twist injected from
    // the truth so the velocity-filter start-up is excluded
    let filtered = with_duration(&noise_free(base), scale.pick(C2_DURATION, 10.0));
    let mut injected = filtered.clone();
    injected.velocity_source = VelocitySource::Truth;
    let (rise_f, t_f) = max_energy_increase(&filtered)?;
    let (rise_i, t_i) = max_energy_increase(&injected)?;
    let worst = rise_f.max(rise_i);
    Ok(Outcome {
        measured: worst,
        threshold: C3_SLACK,
        passed: worst <= C3_SLACK,
        detail: format!(
            "max E_(i+1) - E_i: filtered twist {rise_f:.3e} (t = {t_f:.2} s), \
             injected twist {rise_i:.3e} (t = {t_i:.2} s)"
        ),
    })
}

fn newton_correctness(base: &ScenarioConfig, scale: Scale) -> Result<Outcome> {
    let steps = scale.pick(C4_STEPS, 1000);
    let mut c = with_duration(base, steps as f64 * base.dt);
    c.mode = IntegratorMode::Lgvi;
    let mut sim = Simulation::new(&c)?;
    let (mut residual, mut iterations) = (0.0f64, 0usize);
    while !sim.is_finished() {
        let r = sim.advance()?;
        residual = residual.max(r.newton_residual);
        iterations = iterations.max(r.newton_iterations);
    }
    Ok(Outcome {
        measured: residual,
        threshold: C4_RESIDUAL,
        passed: residual <= C4_RESIDUAL && iterations <= C4_ITERATIONS,
        detail: format!(
            "{steps} steps at dt = {}: max residual {residual:.3e}, max iterations {iterations} (limit {C4_ITERATIONS})",
            c.dt
        ),
    })
}

fn structure_preservation(base: &ScenarioConfig, scale: Scale) -> Result<Outcome> {
    let steps = scale.pick(C5_STEPS, 20_000);
    let mut c = with_duration(base, steps as f64 * base.dt);
    c.mode = IntegratorMode::Lgvi;
    // A straight-line truth drifts hundreds of metres over this many steps
    // and eventually crosses the feature plane, where twist extraction is
    // singular. A yaw rate bends the path into a tight helix instead, which
    // also keeps the attitude estimate turning every step.
    let nu = base.truth.profile.at(0.0).nu;
    c.truth.profile = TwistProfile::Constant(Twist::new(Vector3::new(0.0, 0.0, C5_YAW_RATE), nu));
    let mut sim = Simulation::new(&c)?;
    while !sim.is_finished() {
        sim.advance()?;
    }
    let drift = sim.state().pose.rotation.orthonormality_error();
    Ok(Outcome {
        measured: drift,
        threshold: C5_ORTHONORMALITY,
        passed: drift < C5_ORTHONORMALITY,
        detail: format!("||R^T R - I||_F after {steps} steps, truth yaw rate {C5_YAW_RATE} rad/s"),
    })
}

fn random_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_vector<R: Rng>(rng: &mut R, scale: f64) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

fn random_pose<R: Rng>(rng: &mut R, reach: f64) -> Pose {
    let angle = rng.random_range(0.0..PI);
    Pose::new(exp_so3(&(random_unit(rng) * angle)), random_vector(rng, reach))
}

fn twist_recovery(scale: Scale) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let count = scale.pick(C6_TRIPLES, 200);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < count {
        let points: Vec<_> = (0..3).map(|_| random_vector(&mut rng, 2.0)).collect();
        // keep the geometry comfortably non-collinear
        let d = pairwise_matrix(&points)?;
        // pair vectors of three points span at most a plane
        let mut sv: Vec<f64> = d.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        if sv[1] < 0.2 {
            continue;
        }
        let g = random_pose(&mut rng, 10.0);
        let xi = Twist::new(random_vector(&mut rng, 1.0), random_vector(&mut rng, 1.0));
        let a: Vec<_> = points.iter().map(|p| g.rotation.transpose() * (p - g.translation)).collect();
        let v: Vec<_> = a.iter().map(|a| point_velocity_matrix(a) * xi.to_vector()).collect();
        let back = extract_twist(&a, &v)?;
        worst = worst.max((back.to_vector() - xi.to_vector()).norm());
        done += 1;
    }
    Ok(Outcome {
        measured: worst,
        threshold: C6_TOLERANCE,
        passed: worst <= C6_TOLERANCE,
        detail: format!("max |xi_recovered - xi| over {count} random triples"),
    })
}

/// Worst relative error between `z_vector` and central differences of the
/// total potential under `ĝ ← exp(−εη) ĝ`, for one shaping function.
fn worst_gradient_error(
    gains: &EstimatorGains,
    features: &FeatureSet,
    states: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let reference = KnownReference::from_features(features);
    let mut worst = 0.0f64;
    for _ in 0..states {
        let truth = random_pose(rng, 8.0);
        let g_hat = random_pose(rng, 8.0);
        let a = project_features(&truth, features);
        let l = pairwise_matrix(&a)?;
        let a_bar = a.iter().sum::<Vector3<f64>>() / a.len() as f64;
        let u = |g: &Pose| total_potential(g, &l, &reference.d, &a_bar, &reference.p_bar, gains);
        let z = z_vector(&g_hat, &l, &reference.d, &a_bar, &reference.p_bar, gains);
        let eps = 1e-6;
        let mut fd = nalgebra::Vector6::zeros();
        for k in 0..6 {
            let mut e = nalgebra::Vector6::zeros();
            e[k] = 1.0;
            let eta = Twist::from_vector(&e);
            fd[k] = (u(&(exp_se3(&eta, -eps) * g_hat)) - u(&(exp_se3(&eta, eps) * g_hat))) / (2.0 * eps);
        }
        worst = worst.max((fd - z).norm() / z.norm().max(1e-12));
    }
    Ok(worst)
}

fn gradient_check(base: &ScenarioConfig, scale: Scale) -> Result<Outcome> {
    base.gains.validate(base.features.pair_count())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let states = scale.pick(C7_STATES, 20);
    let mut errors = Vec::new();
    for phi in [PotentialShaping::Linear, PotentialShaping::Quadratic { epsilon: 0.5 }] {
        let gains = EstimatorGains { phi, ..base.gains.clone() };
        errors.push(worst_gradient_error(&gains, &base.features, states, &mut rng)?);
    }
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    Ok(Outcome {
        measured: worst,
        threshold: C7_RELATIVE_ERROR,
        passed: worst < C7_RELATIVE_ERROR,
        detail: format!(
            "{states} states each: Phi(x) = x -> {:.3e}, Phi(x) = x + x^2/2 -> {:.3e}",
            errors[0], errors[1]
        ),
    })
}

fn state_distance(a: &EstimatorState, b: &EstimatorState) -> f64 {
    let rel = a.pose.inverse() * b.pose;
    (log_so3(&rel.rotation).norm_squared()
        + rel.translation.norm_squared()
        + (a.phi.to_vector() - b.phi.to_vector()).norm_squared())
    .sqrt()
}

fn terminal_state(config: &ScenarioConfig) -> Result<EstimatorState> {
    let mut sim = Simulation::new(config)?;
    while !sim.is_finished() {
        sim.advance()?;
    }
    Ok(*sim.state())
}

fn integrator_consistency(base: &ScenarioConfig) -> Result<Outcome> {
    // exact measured twist, so both integrators see identical inputs at
    // every step size
    let mut c = noise_free(base);
    c.velocity_source = VelocitySource::Truth;
    let gap = |dt: f64| -> Result<f64> {
        let mut lgvi = c.clone();
        lgvi.dt = dt;
        lgvi.mode = IntegratorMode::Lgvi;
        let mut rk4 = lgvi.clone();
        rk4.mode = IntegratorMode::Rk4;
        Ok(state_distance(&terminal_state(&lgvi)?, &terminal_state(&rk4)?))
    };
    let (coarse, fine) = (gap(c.dt)?, gap(0.5 * c.dt)?);
    let ratio = coarse / fine;
    Ok(Outcome {
        measured: ratio,
        threshold: C8_RATIO.0,
        passed: (C8_RATIO.0..=C8_RATIO.1).contains(&ratio),
        detail: format!(
            "terminal gap {coarse:.3e} at dt = {}, {fine:.3e} at dt = {} (ratio must lie in [{}, {}])",
            c.dt,
            0.5 * c.dt,
            C8_RATIO.0,
            C8_RATIO.1
        ),
    })
}

/// Mean over the last window of `‖log Q‖ + ‖b − b̂‖`.
fn steady_state_radius(config: &ScenarioConfig, window: f64) -> Result<f64> {
    let mut sim = Simulation::new(config)?;
    let from = config.duration - window;
    let (mut sum, mut count) = (0.0, 0usize);
    loop {
        let r = sim.record();
        if r.time >= from - 1e-9 {
            sum += r.errors.attitude + r.errors.position_raw.norm();
            count += 1;
        }
        if sim.is_finished() {
            break;
        }
        sim.advance()?;
    }
    Ok(sum / count as f64)
}

fn noise_monotonicity(base: &ScenarioConfig, scale: Scale) -> Result<Outcome> {
    let duration = scale.pick(C9_DURATION, 20.0);
    let seeds = scale.pick(C9_SEEDS, 2);
    let jobs: Vec<(usize, u64)> = (0..C9_WIDTHS_MM.len())
        .flat_map(|w| (0..seeds).map(move |s| (w, s)))
        .collect();
    let radii: Vec<Result<(usize, f64)>> = jobs
        .par_iter()
        .map(|&(w, s)| {
            let mut c = with_duration(base, duration);
            let width = C9_WIDTHS_MM[w] * 1e-3;
            c.noise = NoiseSpec {
                support_width: width,
                velocity_support_width: width,
                seed: base.noise.seed.wrapping_add(1000 * s),
            };
            Ok((w, steady_state_radius(&c, C9_WINDOW)?))
        })
        .collect();
    let mut means = [0.0; C9_WIDTHS_MM.len()];
    for r in radii {
        let (w, radius) = r?;
        means[w] += radius / seeds as f64;
    }
    let min_step = means.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        measured: min_step,
        threshold: 0.0,
        passed: min_step > 0.0,
        detail: format!(
            "mean radius over last {C9_WINDOW} s of {duration} s, {seeds} seeds: {}",
            C9_WIDTHS_MM
                .iter()
                .zip(means)
                .map(|(w, m)| format!("{w} mm -> {m:.3e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    })
}

fn basin_sampling(base: &ScenarioConfig, scale: Scale) -> Result<Outcome> {
    let samples = scale.pick(C10_SAMPLES, 8);
    let duration = scale.pick(C10_DURATION, 30.0);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let truth_rotation = base.truth.initial_pose.rotation;
    // Q = R R̂ᵀ with a random axis and angle in (0, 3]
    let configs: Vec<(f64, ScenarioConfig)> = (0..samples)
        .map(|_| {
            let angle = rng.random_range(0.0..C10_MAX_ANGLE) + f64::EPSILON;
            let axis = random_unit(&mut rng);
            let q = exp_so3(&(axis * angle));
            let r_hat = Rotation::from_matrix_unchecked(q.matrix().transpose() * truth_rotation.matrix());
            let mut c = with_duration(&noise_free(base), duration);
            c.initial_estimate = match base.initial_estimate {
                InitialEstimate::Twist { pose, xi_hat } => InitialEstimate::Twist {
                    pose: Pose::new(r_hat, pose.translation),
                    xi_hat,
                },
                InitialEstimate::VelocityError { pose, phi } => InitialEstimate::VelocityError {
                    pose: Pose::new(r_hat, pose.translation),
                    phi,
                },
            };
            (angle, c)
        })
        .collect();
    let results: Vec<Result<(f64, f64, f64)>> = configs
        .par_iter()
        .map(|(angle, c)| {
            let (theta, x) = terminal_errors(c)?;
            Ok((*angle, theta, x))
        })
        .collect();
    let mut converged = 0usize;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for r in results {
        let (angle, theta, x) = r?;
        if theta < C2_ATTITUDE && x < C2_POSITION {
            converged += 1;
        }
        if theta.max(x) >= worst.1.max(worst.2) {
            worst = (angle, theta, x);
        }
    }
    let fraction = converged as f64 / samples as f64;
    Ok(Outcome {
        measured: fraction,
        threshold: 1.0,
        passed: converged == samples,
        detail: format!(
            "{converged}/{samples} converged at T = {duration} s; worst start {:.3} rad ended at \
             attitude {:.3e} rad, position {:.3e} m",
            worst.0, worst.1, worst.2
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_name_their_criterion() {
        let r = run_criterion(6, &ScenarioConfig::paper(), Scale::Desk);
        assert_eq!(r.name, "twist-recovery");
        assert!(r.passed, "{r}");
        assert!(r.to_string().starts_with("[PASS] criterion  6"));
    }

    #[test]
    fn unknown_criterion_fails_cleanly() {
        let r = run_criterion(42, &ScenarioConfig::paper(), Scale::Desk);
        assert!(!r.passed);
        assert!(r.measured.is_nan());
    }

    #[test]
    fn invalid_gains_fail_instead_of_panicking() {
        let mut c = ScenarioConfig::paper();
        c.gains.d_r = -c.gains.d_r;
        let r = run_criterion(2, &c, Scale::Desk);
        assert!(!r.passed);
        assert!(r.detail.contains("Dr"), "{}", r.detail);
    }

    #[test]
    fn gradient_check_reduced() {
        let r = run_criterion(7, &ScenarioConfig::paper(), Scale::Desk);
        assert!(r.passed, "{r}");
    }
}
