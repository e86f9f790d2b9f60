//! Quaternion and dual quaternion algebra for 6D rigid poses.
//!
//! Orientations live on the unit sphere `S3` with the double cover
//! convention: `q` and `-q` denote the same rotation. Rigid poses are unit
//! dual quaternions `q_re + eps * q_du` built from a rotation quaternion and
//! a translation vector. Two distance measures are provided:
//!
//! * [`d_arc`] — great-circle arc length between orientations, sign
//!   invariant, with range `[0, pi/2]`.
//! * [`d_mag`] — magnitude of the relative rigid transform between two
//!   poses: rotation arc plus translation norm.
//!
//! Velocities are expressed in the 3D tangent space of `S3` at the current
//! rotation; [`central_project`] maps a tangent vector back onto the sphere
//! and [`tangent_log`] inverts that map for nearby orientations.
//!
//! All values are immutable after construction and all operations are pure.

use nalgebra::{Matrix4, Matrix4x3, Vector3, Vector4};
use thiserror::Error;

/// Unit-norm drift tolerated before renormalization kicks in.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Norm below which a quaternion cannot be meaningfully normalized.
pub const DEGENERATE_NORM: f64 = 1e-6;

/// Alignment threshold under which two orientations count as antipodal
/// (a 90 degree arc on `S3`, where the central projection is undefined).
pub const ANTIPODAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    /// Quaternion norm too small to normalize.
    #[error("quaternion norm {norm:.3e} is below {DEGENERATE_NORM:.0e}")]
    DegenerateQuaternion { norm: f64 },
    /// Real part of a dual quaternion too small to normalize.
    #[error("dual quaternion real part norm {norm:.3e} is below {DEGENERATE_NORM:.0e}")]
    DegenerateDualQuaternion { norm: f64 },
    /// Orientations 90 degrees apart on `S3`; the tangent-space log is undefined.
    #[error("orientations are antipodal on S3 (|<q, q_next>| = {dot:.3e})")]
    AntipodalPair { dot: f64 },
}

/// Plain quaternion `w + x*i + y*j + z*k` without a norm constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    /// Pure imaginary quaternion `v_x*i + v_y*j + v_z*k`.
    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(0.0, v.x, v.y, v.z)
    }

    /// Imaginary part as a 3-vector.
    pub fn vector_part(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    /// R^4 inner product; equals the real part of `a * conj(b)`.
    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.w * factor, self.x * factor, self.y * factor, self.z * factor)
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_vector4(self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    pub fn from_vector4(v: &Vector4<f64>) -> Self {
        Self::new(v.x, v.y, v.z, v.w)
    }
}

impl std::ops::Add for Quat {
    type Output = Quat;
    fn add(self, rhs: Quat) -> Quat {
        Quat::new(self.w + rhs.w, self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Quat {
    type Output = Quat;
    fn sub(self, rhs: Quat) -> Quat {
        Quat::new(self.w - rhs.w, self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Neg for Quat {
    type Output = Quat;
    fn neg(self) -> Quat {
        Quat::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Hamilton product.
impl std::ops::Mul for Quat {
    type Output = Quat;
    fn mul(self, rhs: Quat) -> Quat {
        quat_mul(&self, &rhs)
    }
}

/// Hamilton product of two quaternions; the norm is multiplicative.
pub fn quat_mul(a: &Quat, b: &Quat) -> Quat {
    Quat::new(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )
}

/// Point on `S3` representing a 3D orientation (double cover: `q` and `-q`
/// compare equal under [`UnitQuaternion::orientation_eq`]).
///
/// Renormalized on construction; the stored norm is always 1 within
/// [`UNIT_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion(Quat);

impl UnitQuaternion {
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        Self::from_quat(Quat::new(w, x, y, z))
    }

    pub fn from_quat(q: Quat) -> Result<Self, GeometryError> {
        let norm = q.norm();
        if !norm.is_finite() || norm < DEGENERATE_NORM {
            return Err(GeometryError::DegenerateQuaternion { norm });
        }
        Ok(Self(q.scaled(1.0 / norm)))
    }

    pub const fn identity() -> Self {
        Self(Quat::identity())
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Result<Self, GeometryError> {
        let norm = axis.norm();
        if !norm.is_finite() || norm < DEGENERATE_NORM {
            return Err(GeometryError::DegenerateQuaternion { norm });
        }
        let half = 0.5 * angle;
        let s = half.sin() / norm;
        Self::new(half.cos(), axis.x * s, axis.y * s, axis.z * s)
    }

    pub fn as_quat(&self) -> &Quat {
        &self.0
    }

    pub fn into_quat(self) -> Quat {
        self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn conjugate(&self) -> Self {
        Self(self.0.conjugate())
    }

    /// Canonical hemisphere representative: `w >= 0`, ties broken by the
    /// first nonzero component being nonnegative.
    pub fn canonicalized(&self) -> Self {
        let q = &self.0;
        for c in [q.w, q.x, q.y, q.z] {
            if c != 0.0 {
                return if c < 0.0 { Self(-*q) } else { *self };
            }
        }
        *self
    }

    pub fn negated(&self) -> Self {
        Self(-self.0)
    }

    /// Equality on the quotient `S3 / {+1, -1}`: true when `q` matches
    /// either `other` or `-other` componentwise within `tol`.
    pub fn orientation_eq(&self, other: &Self, tol: f64) -> bool {
        let direct = (self.0 - other.0).norm();
        let flipped = (self.0 + other.0).norm();
        direct.min(flipped) <= tol
    }

    /// Renormalizes if composition chains drifted past [`UNIT_TOLERANCE`].
    fn renormalized(q: Quat) -> Self {
        let norm_sq = q.norm_squared();
        if (norm_sq - 1.0).abs() > 2.0 * UNIT_TOLERANCE {
            Self(q.scaled(1.0 / norm_sq.sqrt()))
        } else {
            Self(q)
        }
    }
}

impl std::ops::Deref for UnitQuaternion {
    type Target = Quat;
    fn deref(&self) -> &Quat {
        &self.0
    }
}

/// Product of unit quaternions stays on `S3` (renormalized on drift).
impl std::ops::Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion::renormalized(self.0 * rhs.0)
    }
}

/// Orthonormal basis of the 3D tangent space of `S3` at a unit quaternion.
///
/// Columns are `q*i`, `q*j`, `q*k` (right Hamilton multiplication), which are
/// exactly orthonormal and orthogonal to `q` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    basis: Matrix4x3<f64>,
}

impl TangentFrame {
    /// Lifts a tangent coordinate vector into R^4: `B * v`.
    pub fn lift(&self, v: &Vector3<f64>) -> Vector4<f64> {
        self.basis * v
    }

    /// Projects an R^4 vector onto tangent coordinates: `B^T * v`.
    pub fn project(&self, v: &Vector4<f64>) -> Vector3<f64> {
        self.basis.transpose() * v
    }

    pub fn matrix(&self) -> &Matrix4x3<f64> {
        &self.basis
    }

    /// Orthogonal projector `B * B^T` onto the tangent subspace.
    pub fn projector(&self) -> Matrix4<f64> {
        self.basis * self.basis.transpose()
    }
}

/// Canonical tangent-space basis at `q`.
pub fn tangent_frame(q: &UnitQuaternion) -> TangentFrame {
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    // Columns q*i, q*j, q*k in (w, x, y, z) row order.
    let basis = Matrix4x3::new(
        -x, -y, -z, //
        w, -z, y, //
        z, w, -x, //
        -y, x, w,
    );
    TangentFrame { basis }
}

/// Central projection of a tangent vector back onto `S3`.
///
/// Computes `v = q + B * v_ts` and returns the normalized representative on
/// the same hemisphere as `q` (`<result, q> > 0`; `v` is never zero because
/// `|v|^2 = 1 + |v_ts|^2`).
pub fn central_project(q: &UnitQuaternion, v_ts: &Vector3<f64>) -> UnitQuaternion {
    let frame = tangent_frame(q);
    let v = q.to_vector4() + frame.lift(v_ts);
    let v = v / v.norm();
    // <v, q> = 1 / |q + B v_ts| > 0 already; no sign flip needed.
    UnitQuaternion(Quat::from_vector4(&v))
}

/// Tangent-space coordinates of `q_next` seen from `q`; inverse of
/// [`central_project`].
///
/// The sign of `q_next` is aligned so that `<q, q_next> > 0` first. Errors
/// with [`GeometryError::AntipodalPair`] when the orientations are 90
/// degrees apart and the projection ray is parallel to the tangent plane.
pub fn tangent_log(q: &UnitQuaternion, q_next: &UnitQuaternion) -> Result<Vector3<f64>, GeometryError> {
    let mut dot = q.dot(q_next);
    let mut next = q_next.0;
    if dot.abs() < ANTIPODAL_TOLERANCE {
        return Err(GeometryError::AntipodalPair { dot });
    }
    if dot < 0.0 {
        next = -next;
        dot = -dot;
    }
    let frame = tangent_frame(q);
    let residual = next.scaled(1.0 / dot) - q.0;
    Ok(frame.project(&residual.to_vector4()))
}

/// Arc length between two orientations on `S3`, minimized over the double
/// cover sign choices; range `[0, pi/2]`.
///
/// Equals `arccos(|<q, q2>|)` but is computed from the chordal distance,
/// which is exact at zero separation where `acos` loses half the mantissa.
pub fn d_arc(q: &UnitQuaternion, q2: &UnitQuaternion) -> f64 {
    let direct = (q.0 - q2.0).norm();
    let flipped = (q.0 + q2.0).norm();
    let chord = direct.min(flipped);
    2.0 * (0.5 * chord).clamp(-1.0, 1.0).asin()
}

/// Unit dual quaternion `q_re + eps * q_du` encoding a 6D rigid pose.
///
/// Built from a rotation `q_r` and translation `p` as
/// `q_r + (eps/2) * q_t * q_r` with `q_t = p_x*i + p_y*j + p_z*k`, which
/// keeps the real part unit and the dual part orthogonal to it. Both
/// invariants are restored on every construction path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualQuaternionPose {
    real: UnitQuaternion,
    dual: Quat,
}

impl DualQuaternionPose {
    pub fn identity() -> Self {
        Self { real: UnitQuaternion::identity(), dual: Quat::zero() }
    }

    /// Pose from a rotation and a translation in meters.
    pub fn from_pose(rotation: UnitQuaternion, translation: &Vector3<f64>) -> Self {
        let q_t = Quat::from_vector(translation);
        let dual = (q_t * *rotation.as_quat()).scaled(0.5);
        Self { real: rotation, dual }
    }

    /// Pose from raw real and dual parts, restoring the unit dual
    /// quaternion invariants (`|q_re| = 1`, `<q_re, q_du> = 0`) whenever
    /// they have drifted past [`UNIT_TOLERANCE`].
    pub fn from_parts(real: Quat, dual: Quat) -> Result<Self, GeometryError> {
        let norm = real.norm();
        if !norm.is_finite() || norm < DEGENERATE_NORM || !dual.is_finite() {
            return Err(GeometryError::DegenerateDualQuaternion { norm });
        }
        let (mut real, mut dual) = (real, dual);
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            real = real.scaled(1.0 / norm);
            dual = dual.scaled(1.0 / norm);
        }
        let drift = real.dot(&dual);
        if drift.abs() > UNIT_TOLERANCE {
            dual = dual - real.scaled(drift);
        }
        Ok(Self { real: UnitQuaternion(real), dual })
    }

    /// Product of unit dual quaternions; skips the degeneracy check that
    /// cannot trip for unit inputs.
    fn normalized(real: Quat, dual: Quat) -> Self {
        Self::from_parts(real, dual).expect("product of unit dual quaternions stays unit")
    }

    pub fn real(&self) -> &UnitQuaternion {
        &self.real
    }

    pub fn dual(&self) -> &Quat {
        &self.dual
    }

    /// Decomposes back into rotation and translation:
    /// `q_t = 2 * q_du * conj(q_re)`, translation is its imaginary part.
    pub fn to_pose(&self) -> (UnitQuaternion, Vector3<f64>) {
        let q_t = (self.dual * self.real.conjugate().into_quat()).scaled(2.0);
        (self.real, q_t.vector_part())
    }

    pub fn rotation(&self) -> UnitQuaternion {
        self.real
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.to_pose().1
    }

    /// Quaternion-conjugates both parts; inverse of a unit dual quaternion.
    pub fn conjugate(&self) -> Self {
        Self { real: self.real.conjugate(), dual: self.dual.conjugate() }
    }

    /// Canonical double-cover representative (sign of the whole dual
    /// quaternion follows the hemisphere rule on the real part).
    pub fn canonicalized(&self) -> Self {
        let flipped = self.real.canonicalized();
        if flipped.as_quat() == self.real.as_quat() {
            *self
        } else {
            Self { real: flipped, dual: -self.dual }
        }
    }

    /// Flips the overall sign so that `<self.real, reference.real> >= 0`.
    pub fn sign_aligned(&self, reference: &Self) -> Self {
        if self.real.dot(&reference.real) < 0.0 {
            Self { real: self.real.negated(), dual: -self.dual }
        } else {
            *self
        }
    }

    pub fn is_finite(&self) -> bool {
        self.real.as_quat().is_finite() && self.dual.is_finite()
    }

    /// Flat encoding `[re.w, re.x, re.y, re.z, du.w, du.x, du.y, du.z]`.
    pub fn to_array(&self) -> [f64; 8] {
        let r = self.real.as_quat();
        let d = &self.dual;
        [r.w, r.x, r.y, r.z, d.w, d.x, d.y, d.z]
    }

    pub fn from_array(a: &[f64; 8]) -> Result<Self, GeometryError> {
        Self::from_parts(Quat::new(a[0], a[1], a[2], a[3]), Quat::new(a[4], a[5], a[6], a[7]))
    }
}

/// Dual quaternion multiplication with `eps^2 = 0`:
/// `(a_re * b_re) + eps * (a_re * b_du + a_du * b_re)`.
pub fn dq_mul(a: &DualQuaternionPose, b: &DualQuaternionPose) -> DualQuaternionPose {
    let real = *a.real.as_quat() * *b.real.as_quat();
    let dual = *a.real.as_quat() * b.dual + a.dual * *b.real.as_quat();
    DualQuaternionPose::normalized(real, dual)
}

impl std::ops::Mul for DualQuaternionPose {
    type Output = DualQuaternionPose;
    fn mul(self, rhs: DualQuaternionPose) -> DualQuaternionPose {
        dq_mul(&self, &rhs)
    }
}

/// Transformation magnitude between two poses: the rotation arc of the
/// relative transform `conj(a) * b` plus the norm of its translation.
/// Mixes radians and meters with weight 1:1; symmetric and invariant under
/// left composition by any rigid transform.
pub fn d_mag(a: &DualQuaternionPose, b: &DualQuaternionPose) -> f64 {
    let relative = dq_mul(&a.conjugate(), b);
    let (rotation, translation) = relative.to_pose();
    d_arc(&UnitQuaternion::identity(), &rotation) + translation.norm()
}

/// Per-step velocity of a rigid pose: a tangent-space rotational rate at the
/// current orientation plus a translational rate in meters per step.
///
/// Entries must be finite; ingestion rejects magnitudes beyond a configured
/// bound to filter corrupt data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVelocity {
    pub v_ts: Vector3<f64>,
    pub p_dot: Vector3<f64>,
}

impl TangentVelocity {
    pub fn new(v_ts: Vector3<f64>, p_dot: Vector3<f64>) -> Self {
        Self { v_ts, p_dot }
    }

    pub fn zero() -> Self {
        Self { v_ts: Vector3::zeros(), p_dot: Vector3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.v_ts.iter().chain(self.p_dot.iter()).all(|c| c.is_finite())
    }

    /// Euclidean magnitude of the stacked 6-vector.
    pub fn norm(&self) -> f64 {
        (self.v_ts.norm_squared() + self.p_dot.norm_squared()).sqrt()
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.v_ts.x, self.v_ts.y, self.v_ts.z, self.p_dot.x, self.p_dot.y, self.p_dot.z]
    }

    pub fn from_array(a: &[f64; 6]) -> Self {
        Self { v_ts: Vector3::new(a[0], a[1], a[2]), p_dot: Vector3::new(a[3], a[4], a[5]) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_quat(rng: &mut impl Rng) -> Quat {
        Quat::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    }

    pub(crate) fn random_unit_quat(rng: &mut impl Rng) -> UnitQuaternion {
        loop {
            let q = random_quat(rng);
            if q.norm() > 0.1 {
                return UnitQuaternion::from_quat(q).unwrap();
            }
        }
    }

    pub(crate) fn random_pose(rng: &mut impl Rng) -> DualQuaternionPose {
        let q = random_unit_quat(rng);
        let p = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        DualQuaternionPose::from_pose(q, &p)
    }

    /// Left-multiplication matrix form of the Hamilton product; independent
    /// expansion used as the oracle for `quat_mul`.
    fn quat_mul_matrix_oracle(a: &Quat, b: &Quat) -> Quat {
        let l = Matrix4::new(
            a.w, -a.x, -a.y, -a.z, //
            a.x, a.w, -a.z, a.y, //
            a.y, a.z, a.w, -a.x, //
            a.z, -a.y, a.x, a.w,
        );
        Quat::from_vector4(&(l * b.to_vector4()))
    }

    fn rotation_matrix(q: &UnitQuaternion) -> Matrix3<f64> {
        let (w, x, y, z) = (q.w, q.x, q.y, q.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    #[test]
    fn quat_mul_identity_element() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_quat(&mut rng);
        assert_eq!(quat_mul(&Quat::identity(), &q), q);
        assert_eq!(quat_mul(&q, &Quat::identity()), q);
    }

    #[test]
    fn quat_mul_basis_relation() {
        let i = Quat::new(0.0, 1.0, 0.0, 0.0);
        let j = Quat::new(0.0, 0.0, 1.0, 0.0);
        let k = Quat::new(0.0, 0.0, 0.0, 1.0);
        assert_eq!(quat_mul(&i, &j), k);
    }

    #[test]
    fn quat_mul_matches_matrix_oracle_and_norm_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let a = random_quat(&mut rng);
            let b = random_quat(&mut rng);
            let prod = quat_mul(&a, &b);
            let oracle = quat_mul_matrix_oracle(&a, &b);
            assert_relative_eq!(prod.w, oracle.w, max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(prod.x, oracle.x, max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(prod.y, oracle.y, max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(prod.z, oracle.z, max_relative = 1e-12, epsilon = 1e-12);
            assert!((prod.norm() - a.norm() * b.norm()).abs() <= 1e-12 * a.norm() * b.norm());
        }
    }

    #[test]
    fn unit_quaternion_rejects_zero_norm() {
        let err = UnitQuaternion::new(0.0, 0.0, 0.0, 0.0).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateQuaternion { .. }));
    }

    #[test]
    fn canonicalization_hemisphere_rule() {
        let q = UnitQuaternion::new(-0.5, 0.5, 0.5, 0.5).unwrap();
        let c = q.canonicalized();
        assert!(c.w > 0.0);
        // Equator tie: w == 0 resolves by the first nonzero component.
        let e = UnitQuaternion::new(0.0, -1.0, 0.0, 0.0).unwrap().canonicalized();
        assert!(e.x > 0.0);
    }

    #[test]
    fn dq_mul_identity_and_translation_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dq = random_pose(&mut rng);
        let id = DualQuaternionPose::identity();
        let composed = dq_mul(&id, &dq);
        assert!(composed.real().orientation_eq(dq.real(), 1e-12));

        let t1 = DualQuaternionPose::from_pose(UnitQuaternion::identity(), &Vector3::new(0.1, -0.2, 0.3));
        let t2 = DualQuaternionPose::from_pose(UnitQuaternion::identity(), &Vector3::new(0.5, 0.4, -0.1));
        let (rot, p) = dq_mul(&t1, &t2).to_pose();
        assert_relative_eq!(rot.w, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p, Vector3::new(0.6, 0.2, 0.2), epsilon = 1e-12);
    }

    #[test]
    fn dq_mul_matches_homogeneous_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let a = random_pose(&mut rng);
            let b = random_pose(&mut rng);
            let ab = dq_mul(&a, &b);
            let (q_ab, p_ab) = ab.to_pose();

            let (q_a, p_a) = a.to_pose();
            let (q_b, p_b) = b.to_pose();
            let r_expected = rotation_matrix(&q_a) * rotation_matrix(&q_b);
            let p_expected = rotation_matrix(&q_a) * p_b + p_a;

            assert_relative_eq!(rotation_matrix(&q_ab), r_expected, epsilon = 1e-11);
            assert_relative_eq!(p_ab, p_expected, epsilon = 1e-11);
        }
    }

    #[test]
    fn conjugate_is_involution_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dq = random_pose(&mut rng);
        assert_eq!(dq.conjugate().conjugate(), dq);

        let id = dq_mul(&dq.conjugate(), &dq);
        let (rot, p) = id.to_pose();
        assert!(rot.orientation_eq(&UnitQuaternion::identity(), 1e-9));
        assert!(p.norm() < 1e-9);

        let conj_id = DualQuaternionPose::identity().conjugate();
        assert_eq!(conj_id, DualQuaternionPose::identity());
    }

    #[test]
    fn from_pose_fixed_examples() {
        let origin = DualQuaternionPose::from_pose(UnitQuaternion::identity(), &Vector3::zeros());
        assert_eq!(origin.to_array(), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

        // eps/2 scaling puts translation/2 in the dual part.
        let shifted = DualQuaternionPose::from_pose(UnitQuaternion::identity(), &Vector3::new(2.0, 0.0, 0.0));
        assert_eq!(shifted.to_array(), [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn pose_round_trip() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::z(), std::f64::consts::FRAC_PI_2).unwrap();
        let p = Vector3::new(1.0, 2.0, 3.0);
        let (q2, p2) = DualQuaternionPose::from_pose(q, &p).to_pose();
        assert!(q2.orientation_eq(&q, 1e-12));
        assert_relative_eq!(p2, p, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let q = random_unit_quat(&mut rng);
            let p = Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let dq = DualQuaternionPose::from_pose(q, &p);
            let (q2, p2) = dq.to_pose();
            assert!(q2.orientation_eq(&q, 1e-12));
            assert_relative_eq!(p2, p, epsilon = 1e-12);
            // Decomposition round trip through raw parts.
            let rebuilt = DualQuaternionPose::from_array(&dq.to_array()).unwrap();
            assert!(rebuilt.real().orientation_eq(dq.real(), 1e-9));
            assert!((*rebuilt.dual() - *dq.dual()).norm() < 1e-9);
        }
    }

    #[test]
    fn recovered_translation_quaternion_is_imaginary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let dq = random_pose(&mut rng);
            let q_t = (*dq.dual() * dq.real().conjugate().into_quat()).scaled(2.0);
            assert!(q_t.w.abs() < 1e-9);
        }
    }

    #[test]
    fn from_parts_rejects_degenerate_real() {
        let err = DualQuaternionPose::from_parts(Quat::zero(), Quat::identity()).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateDualQuaternion { .. }));
    }

    #[test]
    fn from_parts_restores_orthogonality() {
        let real = Quat::new(2.0, 0.0, 0.0, 0.0);
        let dual = Quat::new(0.3, 1.0, 0.0, 0.0); // has a component along real
        let dq = DualQuaternionPose::from_parts(real, dual).unwrap();
        assert_relative_eq!(dq.real().as_quat().norm(), 1.0, epsilon = 1e-12);
        assert!(dq.real().as_quat().dot(dq.dual()).abs() < 1e-12);
    }

    #[test]
    fn tangent_frame_identity_columns() {
        let frame = tangent_frame(&UnitQuaternion::identity());
        let m = frame.matrix();
        assert_eq!(m.column(0).clone_owned(), Vector4::new(0.0, 1.0, 0.0, 0.0));
        assert_eq!(m.column(1).clone_owned(), Vector4::new(0.0, 0.0, 1.0, 0.0));
        assert_eq!(m.column(2).clone_owned(), Vector4::new(0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn tangent_frame_orthonormality_thousand_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let q = random_unit_quat(&mut rng);
            let frame = tangent_frame(&q);
            let btb = frame.matrix().transpose() * frame.matrix();
            assert_relative_eq!(btb, Matrix3::identity(), epsilon = 1e-12);
            let btq = frame.project(&q.to_vector4());
            assert!(btq.norm() < 1e-12);
        }
    }

    #[test]
    fn tangent_frame_sign_flip_spans_same_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let q = random_unit_quat(&mut rng);
            let p1 = tangent_frame(&q).projector();
            let p2 = tangent_frame(&q.negated()).projector();
            assert_relative_eq!(p1, p2, epsilon = 1e-12);
        }
    }

    #[test]
    fn central_project_zero_velocity_is_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let q = random_unit_quat(&mut rng);
        let out = central_project(&q, &Vector3::zeros());
        assert!(out.orientation_eq(&q, 1e-15));
        assert!(out.dot(&q) > 0.0);
    }

    #[test]
    fn central_project_tan_alpha_example() {
        // At the identity, a tangent step of tan(alpha) along i lands on
        // (cos(alpha), sin(alpha), 0, 0).
        let alpha: f64 = 0.3;
        let out = central_project(&UnitQuaternion::identity(), &Vector3::new(alpha.tan(), 0.0, 0.0));
        assert_relative_eq!(out.w, alpha.cos(), epsilon = 1e-12);
        assert_relative_eq!(out.x, alpha.sin(), epsilon = 1e-12);
        assert_relative_eq!(out.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(out.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn central_project_stays_on_hemisphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let q = random_unit_quat(&mut rng);
            let v = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            assert!(central_project(&q, &v).dot(&q) > 0.0);
        }
    }

    #[test]
    fn tangent_log_zero_and_inverse_example() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let q = random_unit_quat(&mut rng);
        assert!(tangent_log(&q, &q).unwrap().norm() < 1e-15);

        let alpha: f64 = 0.3;
        let q_next = UnitQuaternion::new(alpha.cos(), alpha.sin(), 0.0, 0.0).unwrap();
        let v = tangent_log(&UnitQuaternion::identity(), &q_next).unwrap();
        assert_relative_eq!(v, Vector3::new(alpha.tan(), 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn tangent_log_round_trip_random_nearby_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let q = random_unit_quat(&mut rng);
            let v = Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let q_next = central_project(&q, &v);
            let v_back = tangent_log(&q, &q_next).unwrap();
            assert_relative_eq!(v_back, v, epsilon = 1e-10);
            // Projection of the log lands back on the same orientation.
            let q_back = central_project(&q, &v_back);
            assert!(q_back.orientation_eq(&q_next, 1e-10));
        }
    }

    #[test]
    fn tangent_log_projection_inverse_on_hemisphere() {
        // Holds for any pair with alignment above 0.1, not just nearby ones.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut checked = 0;
        while checked < 500 {
            let q = random_unit_quat(&mut rng);
            let q_next = random_unit_quat(&mut rng);
            if q.dot(&q_next) <= 0.1 {
                continue;
            }
            let v = tangent_log(&q, &q_next).unwrap();
            assert!(central_project(&q, &v).orientation_eq(&q_next, 1e-9));
            checked += 1;
        }
    }

    #[test]
    fn tangent_log_antipodal_error() {
        let q = UnitQuaternion::identity();
        let orthogonal = UnitQuaternion::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let err = tangent_log(&q, &orthogonal).unwrap_err();
        assert!(matches!(err, GeometryError::AntipodalPair { .. }));
    }

    #[test]
    fn d_arc_double_cover_and_quarter_turn() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let q = random_unit_quat(&mut rng);
        assert_eq!(d_arc(&q, &q), 0.0);
        assert_eq!(d_arc(&q, &q.negated()), 0.0);

        let eighth = UnitQuaternion::new(
            std::f64::consts::FRAC_PI_4.cos(),
            std::f64::consts::FRAC_PI_4.sin(),
            0.0,
            0.0,
        )
        .unwrap();
        assert_relative_eq!(d_arc(&UnitQuaternion::identity(), &eighth), std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn d_arc_metric_axioms_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..1000 {
            let a = random_unit_quat(&mut rng);
            let b = random_unit_quat(&mut rng);
            let c = random_unit_quat(&mut rng);
            let dab = d_arc(&a, &b);
            let dba = d_arc(&b, &a);
            let dac = d_arc(&a, &c);
            let dbc = d_arc(&b, &c);
            assert!((0.0..=std::f64::consts::FRAC_PI_2 + 1e-15).contains(&dab));
            assert_eq!(dab, dba);
            assert!(dac <= dab + dbc + 1e-12);
            // Identity of indiscernibles on the quotient.
            if dab < 1e-12 {
                assert!(a.orientation_eq(&b, 1e-9));
            }
            assert!(d_arc(&a, &a) == 0.0);
        }
    }

    #[test]
    fn d_mag_fixed_examples() {
        let id = DualQuaternionPose::identity();
        assert_eq!(d_mag(&id, &id), 0.0);

        let t = Vector3::new(0.3, -0.4, 1.2);
        let shifted = DualQuaternionPose::from_pose(UnitQuaternion::identity(), &t);
        assert_relative_eq!(d_mag(&id, &shifted), t.norm(), epsilon = 1e-12);

        // Half turn about z at the origin: arc of the half angle.
        let half_turn = DualQuaternionPose::from_pose(
            UnitQuaternion::from_axis_angle(&Vector3::z(), std::f64::consts::PI).unwrap(),
            &Vector3::zeros(),
        );
        assert_relative_eq!(d_mag(&id, &half_turn), std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn d_mag_symmetry_and_left_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let a = random_pose(&mut rng);
            let b = random_pose(&mut rng);
            let g = random_pose(&mut rng);
            let d = d_mag(&a, &b);
            assert!((d - d_mag(&b, &a)).abs() < 1e-9);
            assert!((d_mag(&dq_mul(&g, &a), &dq_mul(&g, &b)) - d).abs() < 1e-9);
            assert!(d >= 0.0);
        }
    }

    #[test]
    fn d_mag_sign_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let a = random_pose(&mut rng);
        let b = random_pose(&mut rng);
        let b_flipped = DualQuaternionPose::from_parts(-*b.real().as_quat(), -*b.dual()).unwrap();
        assert!((d_mag(&a, &b) - d_mag(&a, &b_flipped)).abs() < 1e-12);
    }

    #[test]
    fn tangent_velocity_array_round_trip() {
        let v = TangentVelocity::new(Vector3::new(0.1, 0.2, 0.3), Vector3::new(-0.4, 0.5, -0.6));
        assert_eq!(TangentVelocity::from_array(&v.to_array()), v);
        assert!(v.is_finite());
        assert_relative_eq!(v.norm(), (0.01_f64 + 0.04 + 0.09 + 0.16 + 0.25 + 0.36).sqrt(), epsilon = 1e-15);
    }
}
