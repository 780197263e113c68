//! SO(3) and SE(3) primitives.
//!
//! Rotations are stored as full direction-cosine matrices and twists are
//! ordered angular-first, `ξ = [Ω; ν]`. Nothing here re-orthonormalizes a
//! rotation: [`Rotation::orthonormality_error`] reports drift instead, so the
//! structure-preservation of the integrators stays observable.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};

/// Below this rotation angle exp/log switch to Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Tolerance used by [`Rotation::new`] for `RᵀR = I` and `det R = 1`.
pub const ROTATION_TOLERANCE: f64 = 1e-10;

/// Absolute tolerance (scaled by `max(1, ‖S‖)`) on the symmetric part
/// accepted by [`vee3`].
pub const SKEW_TOLERANCE: f64 = 1e-9;

/// Skew-symmetric cross-product matrix: `hat3(v) * w == v × w`.
#[inline]
pub fn hat3(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat3`]. Rejects matrices whose symmetric part exceeds
/// [`SKEW_TOLERANCE`].
pub fn vee3(s: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let sym = (s + s.transpose()).norm();
    if sym > SKEW_TOLERANCE * s.norm().max(1.0) {
        return Err(Error::NotSkewSymmetric(sym));
    }
    Ok(vex(s))
}

/// `vee3` of the skew-symmetric part of `s`, without validation.
#[inline]
pub(crate) fn vex(s: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (s[(2, 1)] - s[(1, 2)]),
        0.5 * (s[(0, 2)] - s[(2, 0)]),
        0.5 * (s[(1, 0)] - s[(0, 1)]),
    )
}

/// An element of SO(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates orthonormality and orientation within [`ROTATION_TOLERANCE`].
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let r = Rotation(m);
        let ortho = r.orthonormality_error();
        if !m.iter().all(|x| x.is_finite()) || ortho > ROTATION_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "rotation matrix is not orthonormal (‖RᵀR − I‖ = {ortho:.3e})"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "rotation matrix has determinant {det}"
            )));
        }
        Ok(r)
    }

    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// Frobenius norm of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Rodrigues' formula.
pub fn exp_so3(w: &Vector3<f64>) -> Rotation {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let half = (0.5 * theta).sin() / theta;
        (theta.sin() / theta, 2.0 * half * half)
    };
    let k = hat3(w);
    Rotation(Matrix3::identity() + k * a + k * k * b)
}

/// Principal logarithm, `‖log R‖ ≤ π`.
///
/// At an angle of exactly π the axis sign is fixed by taking the column of
/// the symmetric part with the largest diagonal entry as positive.
pub fn log_so3(r: &Rotation) -> Vector3<f64> {
    let m = r.matrix();
    let axis_sin = vex(m); // sin(θ)·n
    let s = axis_sin.norm();
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = s.atan2(c);

    if theta < SMALL_ANGLE {
        // θ / sin θ ≈ 1 + θ²/6
        return axis_sin * (1.0 + theta * theta / 6.0);
    }
    if c > -0.9 {
        return axis_sin * (theta / s);
    }

    // Near π the antisymmetric part vanishes; recover the axis from
    // (R + Rᵀ)/2 = cos θ·I + (1 − cos θ)·n nᵀ.
    let sym = (m + m.transpose()) * 0.5;
    let nnt = (sym - Matrix3::identity() * c) / (1.0 - c);
    let k = (0..3)
        .max_by(|&i, &j| nnt[(i, i)].total_cmp(&nnt[(j, j)]))
        .unwrap_or(0);
    let mut n: Vector3<f64> = nnt.column(k).into();
    n /= nnt[(k, k)].max(0.0).sqrt().max(f64::MIN_POSITIVE);
    n.normalize_mut();
    if n.dot(&axis_sin) < 0.0 {
        n = -n;
    }
    n * theta
}

/// Rotation angle of `q`, in `[0, π]`.
///
/// Evaluated as `atan2(‖vex(Q − Qᵀ)‖, (tr Q − 1)/2)`, which equals
/// `arccos((tr Q − 1)/2)` on SO(3) but keeps full precision near zero.
pub fn principal_angle(q: &Rotation) -> f64 {
    let m = q.matrix();
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    vex(m).norm().atan2(c)
}

/// Rigid-body velocity `ξ = [Ω; ν]` expressed in the body frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Twist {
    pub omega: Vector3<f64>,
    pub nu: Vector3<f64>,
}

impl Twist {
    pub fn new(omega: Vector3<f64>, nu: Vector3<f64>) -> Self {
        Twist { omega, nu }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Twist {
            omega: v.fixed_rows::<3>(0).into(),
            nu: v.fixed_rows::<3>(3).into(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.omega);
        v.fixed_rows_mut::<3>(3).copy_from(&self.nu);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.omega.iter().chain(self.nu.iter()).all(|x| x.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Twist::new(self.omega * s, self.nu * s)
    }
}

impl fmt::Display for Twist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Twist(Ω: [{:.4}, {:.4}, {:.4}], ν: [{:.4}, {:.4}, {:.4}])",
            self.omega.x, self.omega.y, self.omega.z, self.nu.x, self.nu.y, self.nu.z
        )
    }
}

/// Velocity-estimation error `φ = [ω; υ]`, the kinetic variable of the
/// estimator's artificial dynamics.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VelocityError {
    pub omega: Vector3<f64>,
    pub upsilon: Vector3<f64>,
}

impl VelocityError {
    pub fn new(omega: Vector3<f64>, upsilon: Vector3<f64>) -> Self {
        VelocityError { omega, upsilon }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        VelocityError {
            omega: v.fixed_rows::<3>(0).into(),
            upsilon: v.fixed_rows::<3>(3).into(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.omega);
        v.fixed_rows_mut::<3>(3).copy_from(&self.upsilon);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.omega.iter().chain(self.upsilon.iter()).all(|x| x.is_finite())
    }
}

/// The 4×4 embedding of a twist into se(3).
pub fn wedge6(xi: &Twist) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&xi.omega));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&xi.nu);
    m
}

/// Inverse of [`wedge6`]; the rotational block must be skew-symmetric.
pub fn unwedge6(m: &Matrix4<f64>) -> Result<Twist> {
    let omega = vee3(&m.fixed_view::<3, 3>(0, 0).into_owned())?;
    Ok(Twist::new(omega, m.fixed_view::<3, 1>(0, 3).into_owned()))
}

/// An element of SE(3): `x ↦ R x + b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Pose::new(Rotation::identity(), Vector3::zeros())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Pose::new(rt, -(rt * self.translation))
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * *p + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

/// `compose(g1, g2) = g1 g2`.
pub fn compose(g1: &Pose, g2: &Pose) -> Pose {
    g1.compose(g2)
}

pub fn inverse(g: &Pose) -> Pose {
    g.inverse()
}

/// Closed-form exponential of `dt · ξ^∨`.
pub fn exp_se3(xi: &Twist, dt: f64) -> Pose {
    let w = xi.omega * dt;
    let v = xi.nu * dt;
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let rotation = exp_so3(&w);
    // left Jacobian V = I + B W + C W²
    // 1 − cos θ via sin²(θ/2); θ − sin θ cancels badly, so a series below 1e-2
    let half = if theta < SMALL_ANGLE { 0.5 } else { (0.5 * theta).sin() / theta };
    let b = if theta < SMALL_ANGLE { 0.5 - theta2 / 24.0 } else { 2.0 * half * half };
    let c = if theta < 1e-2 {
        1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0
    } else {
        (theta - theta.sin()) / (theta2 * theta)
    };
    let k = hat3(&w);
    let jac = Matrix3::identity() + k * b + k * k * c;
    Pose::new(rotation, jac * v)
}

/// `Ad_g = [[R, 0], [b^× R, R]]`.
pub fn adjoint_matrix(g: &Pose) -> Matrix6<f64> {
    let r = g.rotation.matrix();
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(hat3(&g.translation) * r));
    m
}

/// `ad_ζ = [[w^×, 0], [v^×, w^×]]`, the matrix of the Lie bracket `[ζ, ·]`.
pub fn ad_matrix(zeta: &Twist) -> Matrix6<f64> {
    let w = hat3(&zeta.omega);
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&hat3(&zeta.nu));
    m
}

/// `ad*_ζ = (ad_ζ)ᵀ`.
pub fn ad_star(zeta: &Twist) -> Matrix6<f64> {
    ad_matrix(zeta).transpose()
}

/// Lie bracket `[a, b] = ad_a b`.
pub fn bracket(a: &Twist, b: &Twist) -> Twist {
    Twist::new(
        a.omega.cross(&b.omega),
        a.omega.cross(&b.nu) + a.nu.cross(&b.omega),
    )
}
