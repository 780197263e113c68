//! Scenario files (TOML).
//!
//! Keys mirror the fields of [`ScenarioConfig`]; matrices are row-major lists
//! of rows. Every key is optional and falls back to the two-UAV preset, so a
//! file only needs what it changes. Unknown keys are an error.

use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use varpose::estimator::PotentialShaping;
use varpose::scenario::{InitialEstimate, TwistProfile, VelocitySource};
use varpose::{FeatureSet, Rotation, ScenarioConfig, Twist, VelocityError};

use crate::error::CliError;

type Row = [f64; 3];
type Mat = [Row; 3];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// `"lgvi"` or `"rk4"`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<FeaturesSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<GainsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_estimate: Option<InitialEstimateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub velocity: Option<VelocitySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub newton: Option<NewtonSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesSection {
    /// Feature points in the observed vehicle's body frame (m).
    pub points: Vec<Row>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Mat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<Row>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twist: Option<ProfileSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSection {
    Constant {
        omega: Row,
        nu: Row,
    },
    Sinusoidal {
        omega: Row,
        nu: Row,
        amplitude_omega: Row,
        amplitude_nu: Row,
        frequency_hz: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub velocity_support_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<Mat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Mat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_r: Option<Mat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_t: Option<Mat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// β×β, β = number of feature pairs. Identity when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<ShapingSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapingSection {
    Linear,
    Quadratic { epsilon: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialEstimateSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Mat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<Row>,
    /// Initial twist estimate. Mutually exclusive with `phi`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_hat: Option<TwistSection>,
    /// Initial velocity error. Mutually exclusive with `xi_hat`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<VelocityErrorSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistSection {
    pub omega: Row,
    pub nu: Row,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityErrorSection {
    pub omega: Row,
    pub upsilon: Row,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocitySection {
    Filtered { cutoff_hz: f64 },
    Truth,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

fn field_error(field: &str, message: impl Into<String>) -> CliError {
    CliError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

fn matrix(m: &Mat) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

fn rows(m: &Matrix3<f64>) -> Mat {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn vector(v: &Row) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

fn row(v: &Vector3<f64>) -> Row {
    [v.x, v.y, v.z]
}

fn rotation(field: &str, m: &Mat) -> Result<Rotation, CliError> {
    Rotation::new(matrix(m)).map_err(|e| field_error(field, e.to_string()))
}

fn twist(omega: &Row, nu: &Row) -> Twist {
    Twist::new(vector(omega), vector(nu))
}

impl FileConfig {
    /// Applies the file on top of the two-UAV preset. Checks structure only;
    /// gain definiteness and the like are left to [`validate`].
    pub fn into_scenario(self) -> Result<ScenarioConfig, CliError> {
        let mut c = ScenarioConfig::paper();
        if let Some(d) = self.duration {
            c.duration = d;
        }
        if let Some(dt) = self.dt {
            c.dt = dt;
        }
        if let Some(mode) = &self.mode {
            c.mode = mode.parse().map_err(|e: varpose::Error| field_error("mode", e.to_string()))?;
        }
        if let Some(f) = &self.features {
            c.features = FeatureSet::new(f.points.iter().map(vector).collect())
                .map_err(|e| field_error("features.points", e.to_string()))?;
            c.gains.w = DMatrix::identity(c.features.pair_count(), c.features.pair_count());
        }
        if let Some(t) = &self.truth {
            if let Some(r) = &t.rotation {
                c.truth.initial_pose.rotation = rotation("truth.rotation", r)?;
            }
            if let Some(p) = &t.position {
                c.truth.initial_pose.translation = vector(p);
            }
            if let Some(profile) = &t.twist {
                c.truth.profile = match profile {
                    ProfileSection::Constant { omega, nu } => TwistProfile::Constant(twist(omega, nu)),
                    ProfileSection::Sinusoidal {
                        omega,
                        nu,
                        amplitude_omega,
                        amplitude_nu,
                        frequency_hz,
                    } => TwistProfile::Sinusoidal {
                        base: twist(omega, nu),
                        amplitude: twist(amplitude_omega, amplitude_nu),
                        frequency_hz: *frequency_hz,
                    },
                };
            }
        }
        if let Some(n) = &self.noise {
            if let Some(w) = n.support_width {
                c.noise.support_width = w;
            }
            if let Some(w) = n.velocity_support_width {
                c.noise.velocity_support_width = w;
            }
            if let Some(s) = n.seed {
                c.noise.seed = s;
            }
        }
        if let Some(g) = &self.gains {
            for (value, target) in [
                (&g.j, &mut c.gains.j),
                (&g.m, &mut c.gains.m),
                (&g.d_r, &mut c.gains.d_r),
                (&g.d_t, &mut c.gains.d_t),
            ] {
                if let Some(m) = value {
                    *target = matrix(m);
                }
            }
            if let Some(k) = g.kappa {
                c.gains.kappa = k;
            }
            if let Some(w) = &g.w {
                let n = w.len();
                if w.iter().any(|r| r.len() != n) {
                    return Err(field_error("gains.w", "must be a square list of rows"));
                }
                c.gains.w = DMatrix::from_fn(n, n, |i, j| w[i][j]);
            }
            if let Some(phi) = &g.phi {
                c.gains.phi = match phi {
                    ShapingSection::Linear => PotentialShaping::Linear,
                    ShapingSection::Quadratic { epsilon } => PotentialShaping::Quadratic { epsilon: *epsilon },
                };
            }
        }
        if let Some(e) = &self.initial_estimate {
            let mut pose = *c.initial_estimate.pose();
            if let Some(r) = &e.rotation {
                pose.rotation = rotation("initial_estimate.rotation", r)?;
            }
            if let Some(p) = &e.position {
                pose.translation = vector(p);
            }
            c.initial_estimate = match (&e.xi_hat, &e.phi, c.initial_estimate) {
                (Some(_), Some(_), _) => {
                    return Err(field_error(
                        "initial_estimate",
                        "give either `xi_hat` or `phi`, not both",
                    ))
                }
                (Some(x), None, _) => InitialEstimate::Twist {
                    pose,
                    xi_hat: twist(&x.omega, &x.nu),
                },
                (None, Some(p), _) => InitialEstimate::VelocityError {
                    pose,
                    phi: VelocityError::new(vector(&p.omega), vector(&p.upsilon)),
                },
                (None, None, InitialEstimate::Twist { xi_hat, .. }) => InitialEstimate::Twist { pose, xi_hat },
                (None, None, InitialEstimate::VelocityError { phi, .. }) => {
                    InitialEstimate::VelocityError { pose, phi }
                }
            };
        }
        if let Some(v) = &self.velocity {
            c.velocity_source = match v {
                VelocitySection::Filtered { cutoff_hz } => VelocitySource::Filtered { cutoff_hz: *cutoff_hz },
                VelocitySection::Truth => VelocitySource::Truth,
            };
        }
        if let Some(n) = &self.newton {
            if let Some(t) = n.tolerance {
                c.newton.tolerance = t;
            }
            if let Some(m) = n.max_iterations {
                c.newton.max_iterations = m;
            }
        }
        Ok(c)
    }

    /// Fully explicit file for `config`.
    pub fn from_scenario(c: &ScenarioConfig) -> Self {
        let profile = match c.truth.profile {
            TwistProfile::Constant(xi) => ProfileSection::Constant {
                omega: row(&xi.omega),
                nu: row(&xi.nu),
            },
            TwistProfile::Sinusoidal {
                base,
                amplitude,
                frequency_hz,
            } => ProfileSection::Sinusoidal {
                omega: row(&base.omega),
                nu: row(&base.nu),
                amplitude_omega: row(&amplitude.omega),
                amplitude_nu: row(&amplitude.nu),
                frequency_hz,
            },
        };
        let pose = c.initial_estimate.pose();
        let (xi_hat, phi) = match c.initial_estimate {
            InitialEstimate::Twist { xi_hat, .. } => (
                Some(TwistSection {
                    omega: row(&xi_hat.omega),
                    nu: row(&xi_hat.nu),
                }),
                None,
            ),
            InitialEstimate::VelocityError { phi, .. } => (
                None,
                Some(VelocityErrorSection {
                    omega: row(&phi.omega),
                    upsilon: row(&phi.upsilon),
                }),
            ),
        };
        let w = &c.gains.w;
        FileConfig {
            duration: Some(c.duration),
            dt: Some(c.dt),
            mode: Some(c.mode.to_string()),
            features: Some(FeaturesSection {
                points: c.features.points().iter().map(row).collect(),
            }),
            truth: Some(TruthSection {
                rotation: Some(rows(c.truth.initial_pose.rotation.matrix())),
                position: Some(row(&c.truth.initial_pose.translation)),
                twist: Some(profile),
            }),
            noise: Some(NoiseSection {
                support_width: Some(c.noise.support_width),
                velocity_support_width: Some(c.noise.velocity_support_width),
                seed: Some(c.noise.seed),
            }),
            gains: Some(GainsSection {
                j: Some(rows(&c.gains.j)),
                m: Some(rows(&c.gains.m)),
                d_r: Some(rows(&c.gains.d_r)),
                d_t: Some(rows(&c.gains.d_t)),
                kappa: Some(c.gains.kappa),
                w: Some((0..w.nrows()).map(|i| w.row(i).iter().copied().collect()).collect()),
                phi: Some(match c.gains.phi {
                    PotentialShaping::Linear => ShapingSection::Linear,
                    PotentialShaping::Quadratic { epsilon } => ShapingSection::Quadratic { epsilon },
                }),
            }),
            initial_estimate: Some(InitialEstimateSection {
                rotation: Some(rows(pose.rotation.matrix())),
                position: Some(row(&pose.translation)),
                xi_hat,
                phi,
            }),
            velocity: Some(match c.velocity_source {
                VelocitySource::Filtered { cutoff_hz } => VelocitySection::Filtered { cutoff_hz },
                VelocitySource::Truth => VelocitySection::Truth,
            }),
            newton: Some(NewtonSection {
                tolerance: Some(c.newton.tolerance),
                max_iterations: Some(c.newton.max_iterations),
            }),
        }
    }
}

/// Parses TOML text; structure only, see [`FileConfig::into_scenario`].
pub fn parse_config(text: &str, origin: &str) -> Result<ScenarioConfig, CliError> {
    let file: FileConfig = toml::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    file.into_scenario()
}

/// Full validation, with gain problems reported against their config key.
pub fn validate(c: &ScenarioConfig) -> Result<(), CliError> {
    c.validate().map_err(|e| match e {
        varpose::Error::InvalidGain { field, reason } => {
            let key = match field {
                "J" => "gains.j",
                "M" => "gains.m",
                "Dr" => "gains.d_r",
                "Dt" => "gains.d_t",
                "W" => "gains.w",
                "kappa" => "gains.kappa",
                "phi" => "gains.phi",
                other => other,
            };
            field_error(key, reason)
        }
        varpose::Error::InvalidTimeStep(dt) => field_error("dt", format!("must be positive, got {dt}")),
        other => CliError::Core(other),
    })
}

/// Reads, parses and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let c = read_config(path)?;
    validate(&c)?;
    Ok(c)
}

/// Reads and parses without the validation step.
pub fn read_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}

pub fn to_toml(c: &ScenarioConfig) -> String {
    toml::to_string(&FileConfig::from_scenario(c)).expect("scenario config serializes")
}

/// Applies command-line overrides in the order dt, steps, seed.
pub fn apply_overrides(c: &mut ScenarioConfig, dt: Option<f64>, steps: Option<usize>, seed: Option<u64>) {
    if let Some(dt) = dt {
        c.dt = dt;
    }
    if let Some(n) = steps {
        c.duration = n as f64 * c.dt;
    }
    if let Some(s) = seed {
        c.noise.seed = s;
    }
}

/// The preset as a scenario with everything explicit; handy for editing.
pub fn paper_toml() -> String {
    to_toml(&ScenarioConfig::paper())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_preset() {
        let c = parse_config("", "inline").unwrap();
        assert_eq!(c, ScenarioConfig::paper());
        assert_eq!(c.gains.j, Matrix3::from_diagonal(&Vector3::new(0.9, 0.6, 0.3)));
        assert_eq!(c.gains.m, Matrix3::from_diagonal(&Vector3::new(0.0608, 0.0486, 0.0365)));
        assert_eq!(c.gains.d_r, Matrix3::from_diagonal(&Vector3::new(2.7, 2.2, 1.5)));
        assert_eq!(c.gains.d_t, Matrix3::from_diagonal(&Vector3::new(0.1, 0.12, 0.14)));
    }

    #[test]
    fn roundtrip_is_exact() {
        let mut c = ScenarioConfig::paper();
        c.truth.profile = TwistProfile::Sinusoidal {
            base: Twist::new(Vector3::new(0.0, 0.0, 0.1), Vector3::new(0.08, -0.003, -0.0007)),
            amplitude: Twist::new(Vector3::new(0.01, 0.0, 0.0), Vector3::new(0.0, 0.02, 0.0)),
            frequency_hz: 0.3,
        };
        c.gains.phi = PotentialShaping::Quadratic { epsilon: 0.5 };
        c.gains.w[(0, 1)] = 0.1;
        c.gains.w[(1, 0)] = 0.1;
        for cfg in [ScenarioConfig::paper(), c] {
            let text = to_toml(&cfg);
            assert_eq!(parse_config(&text, "inline").unwrap(), cfg, "{text}");
        }
    }

    #[test]
    fn matrices_are_row_major() {
        let c = parse_config(
            "[gains]\nj = [[1.0, 0.2, 0.0], [0.3, 1.0, 0.0], [0.0, 0.0, 1.0]]\n",
            "inline",
        )
        .unwrap();
        assert_eq!(c.gains.j[(0, 1)], 0.2);
        assert_eq!(c.gains.j[(1, 0)], 0.3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["durration = 3.0", "[gains]\nkapa = 1.0", "[velocity]\nsource = \"filtered\"\ncutoff = 3.0"] {
            let err = parse_config(text, "inline").unwrap_err();
            assert!(matches!(err, CliError::Parse { .. }), "{text}: {err}");
        }
    }

    #[test]
    fn singular_gain_is_a_field_error() {
        let c = parse_config("[gains]\nj = [[0.9, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.3]]\n", "inline").unwrap();
        let err = validate(&c).unwrap_err();
        assert!(err.to_string().contains("gains.j"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn bad_rotation_is_a_field_error() {
        let err = parse_config("[truth]\nrotation = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]\n", "inline")
            .unwrap_err();
        assert!(err.to_string().contains("truth.rotation"), "{err}");
    }

    #[test]
    fn overrides() {
        let mut c = ScenarioConfig::paper();
        apply_overrides(&mut c, Some(0.02), Some(50), Some(9));
        assert_eq!(c.dt, 0.02);
        assert_eq!(c.steps(), 50);
        assert_eq!(c.noise.seed, 9);
    }

    #[test]
    fn both_initial_forms_is_an_error() {
        let text = "[initial_estimate]\nxi_hat = { omega = [0.0, 0.0, 0.0], nu = [0.0, 0.0, 0.0] }\nphi = { omega = [0.0, 0.0, 0.0], upsilon = [0.0, 0.0, 0.0] }\n";
        assert!(parse_config(text, "inline").is_err());
    }
}
