//! Rigid-body algebra and the geometric primitives the tracker is built on.
//!
//! Everything here is a pure function over small value types. Rotations are
//! stored as plain 3×3 matrices so that composition, alignment and error
//! metrics share one representation.

mod align;
mod iou;
mod symmetry;

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub use align::{
    alignment_residual, cross_covariance, least_squares_align, rotation_from_covariance,
    rotation_jacobian,
};
pub use iou::{box_iou, box_iou_seeded, OrientedBox3, IOU_DEFAULT_SEED};
pub use symmetry::{clockwise_neighbors, sym_transform, SymTriplet, SymmetryAxis, ON_AXIS_TOL};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance used when validating orthonormality and unit length.
pub const VALIDITY_TOL: f64 = 1e-9;

/// A proper rotation in SO(3).
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Wraps `m` after checking `mᵀm = I` and `det m = +1` to within [`VALIDITY_TOL`].
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let r = Self(m);
        if r.is_valid(VALIDITY_TOL) {
            Ok(r)
        } else {
            Err(Error::DegenerateInput("matrix is not a proper rotation".into()))
        }
    }

    /// Wraps `m` without validation. The caller guarantees it is a rotation.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    pub fn from_row_major(rows: &[f64; 9]) -> Result<Self> {
        Self::from_matrix(Mat3::from_row_slice(rows))
    }

    /// Right-handed rotation by `angle` radians about `axis`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let axis = Unit::new_normalize(*axis);
        Self(*nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix())
    }

    pub fn rx(angle: f64) -> Self {
        Self::from_axis_angle(&Vec3::x(), angle)
    }

    pub fn ry(angle: f64) -> Self {
        Self::from_axis_angle(&Vec3::y(), angle)
    }

    pub fn rz(angle: f64) -> Self {
        Self::from_axis_angle(&Vec3::z(), angle)
    }

    /// Uniformly distributed rotation (normalized Gaussian quaternion).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q = nalgebra::Quaternion::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            if q.norm() > 1e-6 {
                let uq = UnitQuaternion::from_quaternion(q);
                return Self(*uq.to_rotation_matrix().matrix());
            }
        }
    }

    /// Random rotation about a uniformly random axis by an angle drawn
    /// uniformly from `[0, max_angle]`.
    pub fn random_small<R: Rng + ?Sized>(rng: &mut R, max_angle: f64) -> Self {
        let axis = random_unit_vector(rng);
        let angle = rng.random::<f64>() * max_angle;
        Self::from_axis_angle(&axis, angle)
    }

    /// Nearest rotation to an arbitrary matrix in the Frobenius sense.
    pub fn project(m: &Mat3) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            // flip the direction paired with the smallest singular value
            let (imin, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
            let mut d = Mat3::identity();
            d[(imin, imin)] = -1.0;
            r = u * d * v_t;
        }
        Self(r)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)], m[(0, 1)], m[(0, 2)],
            m[(1, 0)], m[(1, 1)], m[(1, 2)],
            m[(2, 0)], m[(2, 1)], m[(2, 2)],
        ]
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let m = &self.0;
        if !m.iter().all(|v| v.is_finite()) {
            return false;
        }
        let gram = m.transpose() * m - Mat3::identity();
        gram.iter().all(|v| v.abs() <= tol) && (m.determinant() - 1.0).abs() <= tol
    }

    /// Geodesic angle between two rotations, computed from the trace of `Aᵀ B`.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        let c = ((self.0.transpose() * other.0).trace() - 1.0) / 2.0;
        c.clamp(-1.0, 1.0).acos()
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Rotation").field(&self.to_row_major()).finish()
    }
}

/// Rigid transform `x ↦ R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vec3::zeros())
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(Rotation::identity(), t)
    }

    pub fn from_rotation(r: Rotation) -> Self {
        Self::new(r, Vec3::zeros())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt.matrix() * self.translation))
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.matrix() * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.matrix() * v
    }

    /// Re-projects the rotation onto SO(3) to remove accumulated round-off.
    pub fn orthonormalized(&self) -> Self {
        Self::new(Rotation::project(self.rotation.matrix()), self.translation)
    }

    /// Largest absolute entry-wise difference of the 3×4 matrices.
    pub fn max_abs_diff(&self, other: &Pose) -> f64 {
        let dr = (self.rotation.matrix() - other.rotation.matrix()).amax();
        let dt = (self.translation - other.translation).amax();
        dr.max(dt)
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.matrix().iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite())
    }
}

/// `delta · base`: rotation `ΔR·R`, translation `ΔR·t + Δt`.
pub fn compose(delta: &Pose, base: &Pose) -> Pose {
    Pose::new(
        delta.rotation * base.rotation,
        delta.rotation.matrix() * base.translation + delta.translation,
    )
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        compose(&self, &rhs)
    }
}

/// Orientation error `2·asin(‖R̂ − R‖_F / (2√2))`, equal to the geodesic angle.
pub fn rotation_error(estimated: &Rotation, truth: &Rotation) -> f64 {
    let frob = (estimated.matrix() - truth.matrix()).norm();
    let arg = (frob / (2.0 * std::f64::consts::SQRT_2)).clamp(0.0, 1.0);
    2.0 * arg.asin()
}

/// Angle between two (not necessarily unit) direction vectors.
pub fn axis_rotation_error(estimated_axis: &Vec3, truth_axis: &Vec3) -> Result<f64> {
    let na = estimated_axis.norm();
    let nb = truth_axis.norm();
    if na < 1e-12 || nb < 1e-12 {
        return Err(Error::ZeroVector);
    }
    let c = estimated_axis.dot(truth_axis) / (na * nb);
    Ok(c.clamp(-1.0, 1.0).acos())
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    sum / points.len() as f64
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6, PI};

    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        let t = Vec3::new(rng.random(), rng.random(), rng.random()) * 2.0 - Vec3::repeat(1.0);
        Pose::new(Rotation::random(rng), t)
    }

    #[test]
    fn compose_identity_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_pose(&mut rng);
        assert_eq!(compose(&Pose::identity(), &p).max_abs_diff(&p), 0.0);
        assert_eq!(compose(&p, &Pose::identity()).max_abs_diff(&p), 0.0);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let p = random_pose(&mut rng);
            assert!(compose(&p.inverse(), &p).max_abs_diff(&Pose::identity()) < 1e-9);
        }
    }

    #[test]
    fn compose_hand_computed() {
        // Rz(30°)|(1,0,0) · Rz(60°)|0 = Rz(90°)|(1,0,0)
        let delta = Pose::new(Rotation::rz(FRAC_PI_6), Vec3::new(1.0, 0.0, 0.0));
        let base = Pose::from_rotation(Rotation::rz(FRAC_PI_3));
        let out = compose(&delta, &base);
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(*out.rotation.matrix(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(out.translation, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn compose_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b, c) = (random_pose(&mut rng), random_pose(&mut rng), random_pose(&mut rng));
        let left = compose(&compose(&a, &b), &c);
        let right = compose(&a, &compose(&b, &c));
        assert!(left.max_abs_diff(&right) < 1e-12);
    }

    #[test]
    fn rotation_error_known_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = Rotation::random(&mut rng);
        assert_eq!(rotation_error(&r, &r), 0.0);
        assert_abs_diff_eq!(rotation_error(&(r * Rotation::rz(FRAC_PI_2)), &r), FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(rotation_error(&(r * Rotation::rz(PI)), &r), PI, epsilon = 1e-7);
    }

    #[test]
    fn axis_error_cases() {
        let y = Vec3::y();
        assert_eq!(axis_rotation_error(&y, &y).unwrap(), 0.0);
        assert_abs_diff_eq!(axis_rotation_error(&y, &Vec3::x()).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(axis_rotation_error(&y, &-y).unwrap(), PI, epsilon = 1e-15);
        assert!(matches!(axis_rotation_error(&Vec3::zeros(), &y), Err(Error::ZeroVector)));
    }

    #[test]
    fn from_matrix_rejects_reflection() {
        let m = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(Rotation::from_matrix(m).is_err());
        assert!(Rotation::from_matrix(Mat3::identity() * 1.01).is_err());
    }

    #[test]
    fn project_recovers_rotation_from_noisy_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = Rotation::random(&mut rng);
        let noisy = r.matrix() + Mat3::from_fn(|_, _| 1e-4 * rng.random::<f64>());
        let p = Rotation::project(&noisy);
        assert!(p.is_valid(1e-12));
        assert!(p.angle_to(&r) < 1e-3);
    }

    proptest! {
        #[test]
        fn rotation_error_matches_geodesic(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = Rotation::random(&mut rng);
            let b = Rotation::random(&mut rng);
            prop_assert!((rotation_error(&a, &b) - a.angle_to(&b)).abs() < 1e-6);
        }

        #[test]
        fn random_rotations_are_valid(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            prop_assert!(Rotation::random(&mut rng).is_valid(1e-12));
        }
    }
}
