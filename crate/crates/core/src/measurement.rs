//! Optical measurement model.
//!
//! Feature points `p_j` are fixed on the observed vehicle and known in its
//! frame. The observer measures their positions `a_j` in its own frame, from
//! which it forms the pairwise matrix `L^m`, the centroid `ā^m`, and (through
//! a finite-difference filter and a pseudo-inverse) the relative twist.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x6, Matrix3xX, Matrix6, Vector3, Vector6};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::liegroup::{hat3, Pose, Twist};

/// Known feature points on the observed vehicle, in its body frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    points: Vec<Vector3<f64>>,
}

impl FeatureSet {
    /// Requires at least three points that are not all collinear.
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::TooFewVectors {
                required: 3,
                got: points.len(),
            });
        }
        let d = pairwise_matrix(&points)?;
        let scale = d.norm().max(f64::MIN_POSITIVE);
        let sv = d.singular_values();
        let rank = sv.iter().filter(|&&s| s > 1e-9 * scale).count();
        if rank < 2 {
            return Err(Error::DegenerateGeometry(
                "feature points are collinear".into(),
            ));
        }
        Ok(FeatureSet { points })
    }

    /// The three-point pattern used in the two-UAV simulation.
    pub fn paper() -> Self {
        FeatureSet {
            points: vec![
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
                Vector3::new(0.0, -1.0, 0.0),
            ],
        }
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of pairwise vectors, `C(n, 2)`.
    pub fn pair_count(&self) -> usize {
        pair_count(self.points.len())
    }
}

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Pairwise vectors `D` and centroid `p̄` of the known feature set.
#[derive(Clone, Debug, PartialEq)]
pub struct KnownReference {
    pub d: Matrix3xX<f64>,
    pub p_bar: Vector3<f64>,
}

impl KnownReference {
    pub fn from_features(features: &FeatureSet) -> Self {
        let d = pairwise_matrix(features.points()).expect("feature set has ≥ 3 points");
        KnownReference {
            d,
            p_bar: centroid(features.points()),
        }
    }

    pub fn pair_count(&self) -> usize {
        self.d.ncols()
    }
}

/// One time-sample of (possibly noisy) optical measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementFrame {
    pub timestamp: f64,
    pub a_meas: Vec<Vector3<f64>>,
    pub l_meas: Matrix3xX<f64>,
    pub a_bar: Vector3<f64>,
    pub v_meas: Vec<Vector3<f64>>,
}

impl MeasurementFrame {
    /// Builds `L^m` and `ā^m` from measured positions.
    pub fn new(timestamp: f64, a_meas: Vec<Vector3<f64>>, v_meas: Vec<Vector3<f64>>) -> Result<Self> {
        if a_meas.len() != v_meas.len() {
            return Err(Error::LengthMismatch {
                positions: a_meas.len(),
                velocities: v_meas.len(),
            });
        }
        let l_meas = pairwise_matrix(&a_meas)?;
        let a_bar = centroid(&a_meas);
        Ok(MeasurementFrame {
            timestamp,
            a_meas,
            l_meas,
            a_bar,
            v_meas,
        })
    }

    /// Noise-free frame of a pose, with point velocities from a twist.
    pub fn exact(timestamp: f64, g: &Pose, xi: &Twist, features: &FeatureSet) -> Self {
        let a = project_features(g, features);
        let v = a.iter().map(|aj| point_velocity_matrix(aj) * xi.to_vector()).collect();
        MeasurementFrame::new(timestamp, a, v).expect("feature set has ≥ 3 points")
    }

    /// Componentwise linear interpolation, `s ∈ [0, 1]`.
    pub fn lerp(&self, other: &MeasurementFrame, s: f64) -> MeasurementFrame {
        let mix = |a: &Vector3<f64>, b: &Vector3<f64>| a + (b - a) * s;
        MeasurementFrame {
            timestamp: self.timestamp + (other.timestamp - self.timestamp) * s,
            a_meas: self.a_meas.iter().zip(&other.a_meas).map(|(a, b)| mix(a, b)).collect(),
            l_meas: &self.l_meas + (&other.l_meas - &self.l_meas) * s,
            a_bar: mix(&self.a_bar, &other.a_bar),
            v_meas: self.v_meas.iter().zip(&other.v_meas).map(|(a, b)| mix(a, b)).collect(),
        }
    }
}

/// Support widths of the bump-function noise and the RNG seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Total support width of position noise per coordinate (m).
    pub support_width: f64,
    /// Total support width of point-velocity noise per coordinate (m/s).
    pub velocity_support_width: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec {
            support_width: 0.0,
            velocity_support_width: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("support_width", self.support_width),
            ("velocity_support_width", self.velocity_support_width),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "noise.{name} must be a finite non-negative width, got {w}"
                )));
            }
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Zero-mean noise with density `∝ exp(−1/(1 − (2x/w)²))` on `(−w/2, w/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpNoise {
    width: f64,
}

impl BumpNoise {
    pub fn new(width: f64) -> Self {
        BumpNoise { width }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Rejection sampling against a uniform envelope on the support.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.width == 0.0 {
            return 0.0;
        }
        loop {
            // open interval (−1, 1)
            let u: f64 = rng.random_range(-1.0..1.0);
            if u == -1.0 {
                continue;
            }
            // density relative to its peak e⁻¹
            let accept = (1.0 - 1.0 / (1.0 - u * u)).exp();
            if rng.random::<f64>() < accept {
                return 0.5 * self.width * u;
            }
        }
    }

    pub fn sample_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector3<f64> {
        Vector3::new(self.sample(rng), self.sample(rng), self.sample(rng))
    }
}

/// `n` noise vectors drawn with the position width of `spec`, seeded by
/// `spec.seed`.
pub fn sample_bump_noise(spec: &NoiseSpec, n: usize) -> Vec<Vector3<f64>> {
    let mut rng = spec.rng();
    let bump = BumpNoise::new(spec.support_width);
    (0..n).map(|_| bump.sample_vector(&mut rng)).collect()
}

/// Noise-free feature positions in the observer frame, `a_j = Rᵀ(p_j − b)`.
pub fn project_features(g_true: &Pose, features: &FeatureSet) -> Vec<Vector3<f64>> {
    let rt = g_true.rotation.transpose();
    features
        .points()
        .iter()
        .map(|p| rt * (p - g_true.translation))
        .collect()
}

/// Columns `v_λ − v_ℓ` for all pairs `λ < ℓ` in lexicographic order.
pub fn pairwise_matrix(vectors: &[Vector3<f64>]) -> Result<Matrix3xX<f64>> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::TooFewVectors {
            required: 2,
            got: n,
        });
    }
    let mut d = Matrix3xX::zeros(pair_count(n));
    let mut col = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            d.set_column(col, &(vectors[i] - vectors[j]));
            col += 1;
        }
    }
    Ok(d)
}

fn centroid(vectors: &[Vector3<f64>]) -> Vector3<f64> {
    vectors.iter().sum::<Vector3<f64>>() / vectors.len() as f64
}

/// `G(a) = [a^×  −I]`, so that `ȧ = G(a) ξ`.
pub fn point_velocity_matrix(a: &Vector3<f64>) -> Matrix3x6<f64> {
    let mut g = Matrix3x6::zeros();
    g.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(a));
    g.fixed_view_mut::<3, 3>(0, 3).copy_from(&-Matrix3::identity());
    g
}

/// Row-stacks `G(a_j)` and `v_j` in input order.
pub fn stack_velocity_system(
    a_list: &[Vector3<f64>],
    v_list: &[Vector3<f64>],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if a_list.len() != v_list.len() {
        return Err(Error::LengthMismatch {
            positions: a_list.len(),
            velocities: v_list.len(),
        });
    }
    if a_list.is_empty() {
        return Err(Error::TooFewVectors {
            required: 1,
            got: 0,
        });
    }
    let n = a_list.len();
    let mut g = DMatrix::zeros(3 * n, 6);
    let mut v = DVector::zeros(3 * n);
    for (j, (a, vj)) in a_list.iter().zip(v_list).enumerate() {
        g.fixed_view_mut::<3, 6>(3 * j, 0)
            .copy_from(&point_velocity_matrix(a));
        v.fixed_rows_mut::<3>(3 * j).copy_from(vj);
    }
    Ok((g, v))
}

/// Relative twist from point positions and velocities, `ξ = 𝔾‡ 𝕍`.
///
/// Three or more points use the left pseudo-inverse `(𝔾ᵀ𝔾)⁻¹𝔾ᵀ`. A single
/// point uses the right pseudo-inverse `𝔾ᵀ(𝔾𝔾ᵀ)⁻¹`. Two points leave the
/// rotation about the line through them unobservable (𝔾 is 6×6 of rank 5), so
/// that case falls back to the SVD Moore-Penrose inverse, which gives the same
/// minimum-norm solution.
pub fn extract_twist(a_list: &[Vector3<f64>], v_list: &[Vector3<f64>]) -> Result<Twist> {
    let (g, v) = stack_velocity_system(a_list, v_list)?;
    match a_list.len() {
        1 => {
            let ggt = &g * g.transpose();
            let chol = ggt.cholesky().ok_or_else(|| {
                Error::DegenerateGeometry("singular 𝔾𝔾ᵀ for a single point".into())
            })?;
            let xi = g.transpose() * chol.solve(&v);
            Ok(Twist::from_vector(&Vector6::from_iterator(xi.iter().copied())))
        }
        2 => {
            let pinv = g
                .pseudo_inverse(1e-12)
                .map_err(|e| Error::DegenerateGeometry(e.to_string()))?;
            let xi = pinv * v;
            Ok(Twist::from_vector(&Vector6::from_iterator(xi.iter().copied())))
        }
        _ => {
            let gtg: Matrix6<f64> = (g.transpose() * &g).fixed_view::<6, 6>(0, 0).into_owned();
            let gtv: Vector6<f64> = (g.transpose() * v).fixed_rows::<6>(0).into_owned();
            let eig = gtg.symmetric_eigenvalues();
            let (lo, hi) = eig
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
            if !(lo > 1e-12 * hi) {
                return Err(Error::DegenerateGeometry(format!(
                    "normal matrix 𝔾ᵀ𝔾 is singular (eigenvalue ratio {:.3e}); points are collinear",
                    lo / hi
                )));
            }
            let chol = gtg.cholesky().ok_or_else(|| {
                Error::DegenerateGeometry("normal matrix 𝔾ᵀ𝔾 is not positive definite".into())
            })?;
            Ok(Twist::from_vector(&chol.solve(&gtv)))
        }
    }
}

/// Point-velocity estimator: a backward difference passed through a
/// first-order low-pass filter. The first sample yields zero velocity.
#[derive(Clone, Debug)]
pub struct VelocityFilter {
    dt: f64,
    alpha: f64,
    previous: Option<Vec<Vector3<f64>>>,
    output: Vec<Vector3<f64>>,
}

impl VelocityFilter {
    /// `cutoff_hz = ∞` disables smoothing.
    pub fn new(dt: f64, cutoff_hz: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidTimeStep(dt));
        }
        if !(cutoff_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "velocity filter cutoff must be positive, got {cutoff_hz}"
            )));
        }
        let tau = 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz);
        Ok(VelocityFilter {
            dt,
            alpha: dt / (tau + dt),
            previous: None,
            output: Vec::new(),
        })
    }

    pub fn time_constant(&self) -> f64 {
        self.dt * (1.0 - self.alpha) / self.alpha
    }

    pub fn update(&mut self, a: &[Vector3<f64>]) -> &[Vector3<f64>] {
        match self.previous.as_mut() {
            None => {
                self.output = vec![Vector3::zeros(); a.len()];
                self.previous = Some(a.to_vec());
            }
            Some(prev) => {
                for ((out, now), before) in self.output.iter_mut().zip(a).zip(prev.iter_mut()) {
                    let raw = (now - *before) / self.dt;
                    *out += (raw - *out) * self.alpha;
                    *before = *now;
                }
            }
        }
        &self.output
    }
}

/// Runs [`VelocityFilter`] over a history of positions and returns the
/// filtered velocities at every sample.
pub fn filter_point_velocities(
    history: &[Vec<Vector3<f64>>],
    dt: f64,
    cutoff_hz: f64,
) -> Result<Vec<Vec<Vector3<f64>>>> {
    if history.len() < 2 {
        return Err(Error::TooFewVectors {
            required: 2,
            got: history.len(),
        });
    }
    let mut filter = VelocityFilter::new(dt, cutoff_hz)?;
    Ok(history.iter().map(|a| filter.update(a).to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::exp_so3;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    fn noncollinear_triple() -> impl Strategy<Value = Vec<Vector3<f64>>> {
        (vec3(), vec3(), vec3())
            .prop_filter("non-collinear", |(a, b, c)| (b - a).cross(&(c - a)).norm() > 0.5)
            .prop_map(|(a, b, c)| vec![a, b, c])
    }

    #[test]
    fn projection_examples() {
        let f = FeatureSet::paper();
        assert_eq!(project_features(&Pose::identity(), &f), f.points().to_vec());
        let g = Pose::new(crate::Rotation::identity(), Vector3::new(1.5, 5.0, 6.0));
        assert_eq!(project_features(&g, &f)[0], Vector3::new(-0.5, -5.0, -6.0));
    }

    #[test]
    fn paper_pairwise_matrix() {
        let d = pairwise_matrix(FeatureSet::paper().points()).unwrap();
        assert_eq!(d.ncols(), 3);
        assert_eq!(d.column(0).into_owned(), Vector3::new(1.0, -1.0, 0.0));
        assert_eq!(d.column(1).into_owned(), Vector3::new(1.0, 1.0, 0.0));
        assert_eq!(d.column(2).into_owned(), Vector3::new(0.0, 2.0, 0.0));

        let same = pairwise_matrix(&[Vector3::x(), Vector3::x()]).unwrap();
        assert_eq!(same.column(0).into_owned(), Vector3::zeros());
        assert!(matches!(
            pairwise_matrix(&[Vector3::x()]),
            Err(Error::TooFewVectors { .. })
        ));
    }

    #[test]
    fn feature_set_rejects_collinear_points() {
        let line = vec![Vector3::x(), Vector3::x() * 2.0, Vector3::x() * -1.0];
        assert!(matches!(FeatureSet::new(line), Err(Error::DegenerateGeometry(_))));
        assert!(FeatureSet::new(vec![Vector3::x(), Vector3::y()]).is_err());
        assert_eq!(
            FeatureSet::new(FeatureSet::paper().points().to_vec()).unwrap(),
            FeatureSet::paper()
        );
    }

    #[test]
    fn bump_noise_zero_width() {
        let spec = NoiseSpec::none();
        assert!(sample_bump_noise(&spec, 100).iter().all(|v| *v == Vector3::zeros()));
    }

    #[test]
    fn bump_noise_statistics() {
        let width = 1e-3;
        let spec = NoiseSpec {
            support_width: width,
            velocity_support_width: 0.0,
            seed: 7,
        };
        let n = 100_000;
        let samples = sample_bump_noise(&spec, n);
        let xs: Vec<f64> = samples.iter().flat_map(|v| v.iter().copied()).collect();
        assert!(xs.iter().all(|x| x.abs() < 0.5 * width));
        let count = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / count;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / count;
        assert!(mean.abs() < 3.0 * var.sqrt() / count.sqrt(), "mean {mean}");
        // deterministic under the seed
        assert_eq!(samples, sample_bump_noise(&spec, n));
    }

    #[test]
    fn bump_noise_acceptance_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 200_000;
        let accepted = (0..trials)
            .filter(|_| {
                let u: f64 = rng.random_range(-1.0..1.0);
                rng.random::<f64>() < (1.0 - 1.0 / (1.0 - u * u)).exp()
            })
            .count();
        let rate = accepted as f64 / trials as f64;
        // e/2 · ∫ exp(−1/(1−u²)) du ≈ 0.6034 against the peak-height envelope
        assert!((rate - 0.6034).abs() < 0.01, "acceptance rate {rate}");
    }

    #[test]
    fn point_velocity_examples() {
        let g = point_velocity_matrix(&Vector3::zeros());
        assert_eq!(g.fixed_view::<3, 3>(0, 0).into_owned(), Matrix3::zeros());
        assert_eq!(g.fixed_view::<3, 3>(0, 3).into_owned(), -Matrix3::identity());

        let xi = Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0);
        let v = point_velocity_matrix(&Vector3::x()) * xi;
        assert_eq!(v, Vector3::new(0.0, -1.0, 0.0));
    }

    #[test]
    fn stacking_examples() {
        let (g, v) = stack_velocity_system(&[Vector3::x()], &[Vector3::y()]).unwrap();
        assert_eq!((g.nrows(), g.ncols(), v.len()), (3, 6, 3));

        let a = FeatureSet::paper().points().to_vec();
        let vs = vec![Vector3::new(1.0, 2.0, 3.0), Vector3::y(), Vector3::z()];
        let (g, v) = stack_velocity_system(&a, &vs).unwrap();
        assert_eq!((g.nrows(), g.ncols()), (9, 6));
        assert_eq!(g.rank(1e-12), 6);
        for j in 0..3 {
            assert_eq!(
                g.fixed_view::<3, 6>(3 * j, 0).into_owned(),
                point_velocity_matrix(&a[j])
            );
            assert_eq!(v.fixed_rows::<3>(3 * j).into_owned(), vs[j]);
        }
        assert!(matches!(
            stack_velocity_system(&a, &vs[..2]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn extract_twist_zero_and_degenerate() {
        let a = FeatureSet::paper().points().to_vec();
        assert_eq!(extract_twist(&a, &[Vector3::zeros(); 3]).unwrap(), Twist::zero());

        let line = vec![Vector3::x(), Vector3::x() * 2.0, Vector3::x() * 3.0];
        assert!(matches!(
            extract_twist(&line, &[Vector3::zeros(); 3]),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn extract_twist_few_points_is_minimum_norm() {
        let xi = Twist::new(Vector3::new(0.2, -0.1, 0.4), Vector3::new(1.0, 0.5, -0.3));
        for a in [vec![Vector3::new(1.0, 2.0, 0.5)], vec![Vector3::x(), Vector3::y()]] {
            let v: Vec<_> = a.iter().map(|aj| point_velocity_matrix(aj) * xi.to_vector()).collect();
            let est = extract_twist(&a, &v).unwrap();
            let (g, vv) = stack_velocity_system(&a, &v).unwrap();
            let residual = &g * nalgebra::DVector::from_column_slice(est.to_vector().as_slice()) - vv;
            assert!(residual.norm() < 1e-12);
            assert!(est.to_vector().norm() <= xi.to_vector().norm() + 1e-12);
        }
    }

    #[test]
    fn velocity_filter_constant_and_ramp() {
        let dt = 0.01;
        let constant = vec![vec![Vector3::new(1.0, 2.0, 3.0)]; 20];
        let out = filter_point_velocities(&constant, dt, 10.0).unwrap();
        assert!(out.iter().all(|v| v[0] == Vector3::zeros()));

        // fine step so the discrete pole matches the continuous time constant
        let dt = 1e-3;
        let c = Vector3::new(0.3, -1.2, 0.05);
        let ramp: Vec<_> = (0..400).map(|k| vec![Vector3::new(1.0, 0.0, 2.0) + c * (k as f64 * dt)]).collect();
        let filter = VelocityFilter::new(dt, 10.0).unwrap();
        let settle = (5.0 * filter.time_constant() / dt).ceil() as usize + 1;
        let out = filter_point_velocities(&ramp, dt, 10.0).unwrap();
        assert_eq!(out[0][0], Vector3::zeros());
        for v in &out[settle..] {
            assert!((v[0] - c).norm() < 0.01 * c.norm());
        }
        let raw = filter_point_velocities(&ramp, dt, f64::INFINITY).unwrap();
        assert_relative_eq!(raw[1][0], c, epsilon = 1e-12);

        assert!(matches!(
            filter_point_velocities(&ramp, 0.0, 10.0),
            Err(Error::InvalidTimeStep(_))
        ));
        assert!(filter_point_velocities(&ramp[..1], dt, 10.0).is_err());
    }

    #[test]
    fn velocity_filter_frequency_response() {
        let dt = 1e-4;
        let cutoff = 1.0;
        let amp = 0.01;
        for f in [20.0, 40.0] {
            let w = 2.0 * std::f64::consts::PI * f;
            let n = (6.0 / dt) as usize;
            let hist: Vec<_> = (0..n)
                .map(|k| vec![Vector3::new(amp * (w * k as f64 * dt).sin(), 0.0, 0.0)])
                .collect();
            let out = filter_point_velocities(&hist, dt, cutoff).unwrap();
            // after the transient, take the peak over the last whole periods
            let tail = &out[n - (1.0 / dt) as usize..];
            let peak = tail.iter().map(|v| v[0].x.abs()).fold(0.0, f64::max);
            let expected = amp * w / (1.0 + (f / cutoff).powi(2)).sqrt();
            assert!((peak / expected - 1.0).abs() < 0.05, "f = {f}: {peak} vs {expected}");
        }
    }

    proptest! {
        #[test]
        fn projection_inverts_forward_model(w in vec3(), b in vec3()) {
            let g = Pose::new(exp_so3(&w), b);
            let f = FeatureSet::paper();
            let a = project_features(&g, &f);
            for (aj, pj) in a.iter().zip(f.points()) {
                prop_assert!((g.transform_point(aj) - pj).norm() < 1e-12);
            }
            // D = R L column by column
            let d = pairwise_matrix(f.points()).unwrap();
            let l = pairwise_matrix(&a).unwrap();
            prop_assert!((g.rotation.matrix() * &l - &d).norm() < 1e-12);
            prop_assert!((g.rotation.matrix().transpose() * &d - &l).norm() < 1e-12);
        }

        #[test]
        fn point_velocity_matrix_has_rank_three(a in vec3(), xi in (vec3(), vec3())) {
            let g = point_velocity_matrix(&a);
            prop_assert_eq!(g.rank(1e-12), 3);
            let twist = Twist::new(xi.0, xi.1);
            let v = g * twist.to_vector();
            prop_assert!((v - (a.cross(&xi.0) - xi.1)).norm() < 1e-12);
        }

        #[test]
        fn extract_twist_recovers_synthesized_twist(a in noncollinear_triple(), w in vec3(), nu in vec3()) {
            let xi = Twist::new(w, nu);
            let v: Vec<_> = a.iter().map(|aj| point_velocity_matrix(aj) * xi.to_vector()).collect();
            let est = extract_twist(&a, &v).unwrap();
            prop_assert!((est.to_vector() - xi.to_vector()).norm() < 1e-10);
        }

        #[test]
        fn extract_twist_is_least_squares_optimal(a in noncollinear_triple(), w in vec3(), nu in vec3(), seed in 0u64..1000) {
            let xi = Twist::new(w, nu);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bump = BumpNoise::new(1e-3);
            let v: Vec<_> = a
                .iter()
                .map(|aj| point_velocity_matrix(aj) * xi.to_vector() + bump.sample_vector(&mut rng))
                .collect();
            let est = extract_twist(&a, &v).unwrap();
            let (g, vv) = stack_velocity_system(&a, &v).unwrap();
            let res = |t: &Twist| (&g * DVector::from_column_slice(t.to_vector().as_slice()) - &vv).norm();
            prop_assert!(res(&est) <= res(&xi) + 1e-15);
        }
    }
}
