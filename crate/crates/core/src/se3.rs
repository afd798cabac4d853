//! Rigid-body poses.
//!
//! [`PoseSE3`] is the rotation-matrix/translation form used for composing
//! transforms and moving points. [`Pose6`] is the `(x, y, z, roll, pitch, yaw)`
//! vector form the filter perturbs and averages; angles follow the intrinsic
//! X-Y-Z convention, `R = Rx(roll) · Ry(pitch) · Rz(yaw)`.

use core::ops::Mul;

use thiserror::Error;

use crate::math::{self, wrap_angle};
use crate::rng::NoiseSource;
use crate::{Mat3, Vec3};

/// Tolerance for orthonormality and determinant checks.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Tolerance on the weight sum accepted by the weighted statistics.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Se3Error {
    #[error("rotation matrix is not orthonormal with determinant +1")]
    NotARotation,
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("empty particle list")]
    Empty,
    #[error("pose and weight counts differ ({poses} vs {weights})")]
    LengthMismatch { poses: usize, weights: usize },
    #[error("weights must be non-negative and sum to 1 (sum = {0})")]
    Unnormalized(f64),
}

/// Pose as a 6-vector: translation in meters, intrinsic X-Y-Z Euler angles in radians.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(from = "[f64; 6]", into = "[f64; 6]")
)]
pub struct Pose6 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Pose6 {
    /// Builds a pose, wrapping all angles to (−π, π].
    pub fn new(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { x, y, z, roll: wrap_angle(roll), pitch: wrap_angle(pitch), yaw: wrap_angle(yaw) }
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.x, self.y, self.z, self.roll, self.pitch, self.yaw]
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn to_se3(&self) -> PoseSE3 {
        PoseSE3 { rotation: euler_xyz_to_matrix(self.roll, self.pitch, self.yaw), translation: self.translation() }
    }

    /// Component-wise difference `self − other` with wrapped angle differences.
    pub fn difference(&self, other: &Pose6) -> [f64; 6] {
        let a = self.to_array();
        let b = other.to_array();
        let mut d = [0.0; 6];
        for i in 0..6 {
            d[i] = if i < 3 { a[i] - b[i] } else { wrap_angle(a[i] - b[i]) };
        }
        d
    }
}

impl From<[f64; 6]> for Pose6 {
    fn from(a: [f64; 6]) -> Self {
        Self::from_array(a)
    }
}

impl From<Pose6> for [f64; 6] {
    fn from(p: Pose6) -> Self {
        p.to_array()
    }
}

/// Rigid transform with an orthonormal rotation (det +1) and a translation in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseSE3 {
    rotation: Mat3,
    translation: Vec3,
}

impl Default for PoseSE3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl PoseSE3 {
    /// Validating constructor.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, Se3Error> {
        if !is_rotation(&rotation) {
            return Err(Se3Error::NotARotation);
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::new(x, y, z) }
    }

    pub fn rot_x(angle: f64) -> Self {
        Self { rotation: euler_xyz_to_matrix(angle, 0.0, 0.0), translation: Vec3::zeros() }
    }

    pub fn rot_y(angle: f64) -> Self {
        Self { rotation: euler_xyz_to_matrix(0.0, angle, 0.0), translation: Vec3::zeros() }
    }

    pub fn rot_z(angle: f64) -> Self {
        Self { rotation: euler_xyz_to_matrix(0.0, 0.0, angle), translation: Vec3::zeros() }
    }

    /// Rotation by `angle` about a unit `axis` (Rodrigues).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        Self { rotation: axis_angle_matrix(axis, angle), translation: Vec3::zeros() }
    }

    /// Same rotation, new translation.
    pub fn with_translation(mut self, t: Vec3) -> Self {
        self.translation = t;
        self
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// `self · other`.
    #[inline]
    pub fn compose(&self, other: &PoseSE3) -> PoseSE3 {
        PoseSE3 {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    #[inline]
    pub fn inverse(&self) -> PoseSE3 {
        let rt = self.rotation.transpose();
        PoseSE3 { rotation: rt, translation: -(rt * self.translation) }
    }

    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn to_pose6(&self) -> Pose6 {
        let (roll, pitch, yaw) = matrix_to_euler_xyz(&self.rotation);
        Pose6::new(self.translation.x, self.translation.y, self.translation.z, roll, pitch, yaw)
    }

    /// Geodesic angle of the rotation part, in [0, π].
    pub fn rotation_angle(&self) -> f64 {
        rotation_log(&self.rotation).norm()
    }

    /// Re-orthonormalizes the rotation (Gram-Schmidt on the columns).
    pub fn orthonormalized(&self) -> PoseSE3 {
        let c0 = self.rotation.column(0).normalize();
        let c1 = (self.rotation.column(1) - c0 * c0.dot(&self.rotation.column(1))).normalize();
        let c2 = c0.cross(&c1);
        PoseSE3 { rotation: Mat3::from_columns(&[c0, c1, c2]), translation: self.translation }
    }
}

impl Mul for PoseSE3 {
    type Output = PoseSE3;
    fn mul(self, rhs: PoseSE3) -> PoseSE3 {
        self.compose(&rhs)
    }
}

impl<'a> Mul<&'a PoseSE3> for &'a PoseSE3 {
    type Output = PoseSE3;
    fn mul(self, rhs: &PoseSE3) -> PoseSE3 {
        self.compose(rhs)
    }
}

fn is_rotation(r: &Mat3) -> bool {
    if !r.iter().all(|v| v.is_finite()) {
        return false;
    }
    let err = r.transpose() * r - Mat3::identity();
    err.iter().all(|e| e.abs() <= ORTHONORMAL_TOL) && (r.determinant() - 1.0).abs() <= ORTHONORMAL_TOL
}

pub(crate) fn euler_xyz_to_matrix(roll: f64, pitch: f64, yaw: f64) -> Mat3 {
    let (sr, cr) = (math::sin(roll), math::cos(roll));
    let (sp, cp) = (math::sin(pitch), math::cos(pitch));
    let (sy, cy) = (math::sin(yaw), math::cos(yaw));
    Mat3::new(
        cp * cy,
        -cp * sy,
        sp,
        cr * sy + sr * sp * cy,
        cr * cy - sr * sp * sy,
        -sr * cp,
        sr * sy - cr * sp * cy,
        sr * cy + cr * sp * sy,
        cr * cp,
    )
}

fn matrix_to_euler_xyz(r: &Mat3) -> (f64, f64, f64) {
    let sp = r[(0, 2)].clamp(-1.0, 1.0);
    let pitch = math::asin(sp);
    if sp.abs() < 1.0 - 1e-12 {
        let roll = math::atan2(-r[(1, 2)], r[(2, 2)]);
        let yaw = math::atan2(-r[(0, 1)], r[(0, 0)]);
        (roll, pitch, yaw)
    } else {
        // Gimbal lock: only roll ± yaw is defined; put it all in roll.
        let roll = math::atan2(r[(2, 1)], r[(1, 1)]);
        (roll, pitch, 0.0)
    }
}

pub(crate) fn axis_angle_matrix(axis: &Vec3, angle: f64) -> Mat3 {
    let k = axis.normalize();
    let (s, c) = (math::sin(angle), math::cos(angle));
    let kx = Mat3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Mat3::identity() + kx * s + kx * kx * (1.0 - c)
}

/// Rotation vector (axis · angle) of a rotation matrix.
pub(crate) fn rotation_log(r: &Mat3) -> Vec3 {
    let v = Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let s = 0.5 * v.norm();
    let c = 0.5 * (r.trace() - 1.0);
    let angle = math::atan2(s, c);
    if s > 1e-7 {
        return v * (angle / (2.0 * s));
    }
    if c > 0.0 {
        // Near identity: first-order expansion.
        return v * 0.5;
    }
    // Near π: axis from the symmetric part.
    let b = (r + Mat3::identity()) * 0.5;
    let mut best = 0;
    for i in 1..3 {
        if b[(i, i)] > b[(best, best)] {
            best = i;
        }
    }
    let mut axis = b.column(best).into_owned();
    axis /= math::sqrt(b[(best, best)].max(1e-300));
    let axis = axis.normalize();
    axis * angle
}

/// Draws `p + σ·N(0, I)` per component (translation in meters, angles in radians), angles re-wrapped.
pub fn perturb<N: NoiseSource + ?Sized>(p: &Pose6, sigma: f64, noise: &mut N) -> Result<Pose6, Se3Error> {
    perturb_scaled(p, sigma, &[1.0; 6], noise)
}

/// As [`perturb`] with a per-dimension multiplier on `sigma`.
pub fn perturb_scaled<N: NoiseSource + ?Sized>(
    p: &Pose6,
    sigma: f64,
    scale: &[f64; 6],
    noise: &mut N,
) -> Result<Pose6, Se3Error> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Se3Error::NonPositiveSigma(sigma));
    }
    let mut a = p.to_array();
    for (v, s) in a.iter_mut().zip(scale) {
        *v += sigma * s * noise.standard_normal();
    }
    Ok(Pose6::from_array(a))
}

fn check_weights(poses: &[Pose6], weights: &[f64]) -> Result<(), Se3Error> {
    if poses.is_empty() {
        return Err(Se3Error::Empty);
    }
    if poses.len() != weights.len() {
        return Err(Se3Error::LengthMismatch { poses: poses.len(), weights: weights.len() });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Se3Error::Unnormalized(sum));
    }
    Ok(())
}

fn circular_mean(values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for (a, w) in values {
        s += w * math::sin(a);
        c += w * math::cos(a);
    }
    wrap_angle(math::atan2(s, c))
}

/// Weighted mean in the 6-vector space; angles use the weighted circular mean.
pub fn weighted_mean(poses: &[Pose6], weights: &[f64]) -> Result<Pose6, Se3Error> {
    check_weights(poses, weights)?;
    Ok(weighted_mean_unchecked(poses, weights))
}

fn weighted_mean_unchecked(poses: &[Pose6], weights: &[f64]) -> Pose6 {
    let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
    for (p, w) in poses.iter().zip(weights) {
        x += w * p.x;
        y += w * p.y;
        z += w * p.z;
    }
    let pairs = || poses.iter().zip(weights.iter().copied());
    let roll = circular_mean(pairs().map(|(p, w)| (p.roll, w)));
    let pitch = circular_mean(pairs().map(|(p, w)| (p.pitch, w)));
    let yaw = circular_mean(pairs().map(|(p, w)| (p.yaw, w)));
    Pose6 { x, y, z, roll, pitch, yaw }
}

/// Weighted per-dimension variance.
///
/// Translations use the ordinary weighted variance (m²). Angles use the
/// weighted mean squared wrapped deviation from the circular mean (rad²),
/// which matches the linear variance for concentrated sets and respects
/// the ±π seam.
pub fn dimwise_variance(poses: &[Pose6], weights: &[f64]) -> Result<[f64; 6], Se3Error> {
    check_weights(poses, weights)?;
    let mean = weighted_mean_unchecked(poses, weights).to_array();
    let mut var = [0.0; 6];
    for (p, w) in poses.iter().zip(weights) {
        let a = p.to_array();
        for i in 0..6 {
            let d = if i < 3 { a[i] - mean[i] } else { wrap_angle(a[i] - mean[i]) };
            var[i] += w * d * d;
        }
    }
    Ok(var)
}

/// Translation distance (m) and geodesic rotation angle (rad) between two poses.
pub fn pose_error(a: &PoseSE3, b: &PoseSE3) -> (f64, f64) {
    let dt = (a.translation() - b.translation()).norm();
    let rel = a.rotation().transpose() * b.rotation();
    (dt, rotation_log(&rel).norm())
}

/// Smallest angle (rad) between two unit vectors, dot product clamped to [−1, 1].
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    math::acos(a.dot(b).clamp(-1.0, 1.0))
}
