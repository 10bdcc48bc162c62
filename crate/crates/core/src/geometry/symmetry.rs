//! Coordinates that do not change when points rotate about a symmetry axis.

use std::f64::consts::TAU;

use super::Vec3;
use crate::error::{Error, Result};

/// Points closer than this to the axis have no defined radial direction.
pub const ON_AXIS_TOL: f64 = 1e-9;

/// Symmetry axis through the origin of the object frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetryAxis {
    direction: Vec3,
}

impl SymmetryAxis {
    pub fn new(direction: Vec3) -> Result<Self> {
        let n = direction.norm();
        if !(n >= 1e-12) || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(Self { direction: direction / n })
    }

    pub fn y() -> Self {
        Self { direction: Vec3::y() }
    }

    pub fn direction(&self) -> &Vec3 {
        &self.direction
    }

    /// Orthonormal `(u, v)` spanning the plane normal to the axis, with `u × v = axis`.
    pub fn basis(&self) -> (Vec3, Vec3) {
        let s = self.direction;
        let helper = if s.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let u = (helper - s * s.dot(&helper)).normalize();
        let v = s.cross(&u);
        (u, v)
    }
}

/// Distance `d` to the axis, height `h` along it, and the angle `θ` to the
/// next point met when sweeping clockwise as seen looking along `+axis`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymTriplet {
    pub d: f64,
    pub h: f64,
    pub theta: f64,
}

impl SymTriplet {
    pub fn as_array(&self) -> [f64; 3] {
        [self.d, self.h, self.theta]
    }
}

/// For each point, the index of its clockwise angular neighbour about `axis`.
///
/// Clockwise when looking along `+axis` is the right-handed sense about the
/// axis. On-axis points get no neighbour and are never chosen as one; ties go
/// to the lowest index.
pub fn clockwise_neighbors(points: &[Vec3], axis: &SymmetryAxis) -> Vec<Option<usize>> {
    let s = axis.direction();
    let (u, v) = axis.basis();
    let polar: Vec<Option<f64>> = points
        .iter()
        .map(|p| {
            let radial = p - s * s.dot(p);
            (radial.norm() >= ON_AXIS_TOL).then(|| radial.dot(&v).atan2(radial.dot(&u)))
        })
        .collect();
    polar
        .iter()
        .enumerate()
        .map(|(i, phi_i)| {
            let phi_i = (*phi_i)?;
            let mut best: Option<(usize, f64)> = None;
            for (j, phi_j) in polar.iter().enumerate() {
                let Some(phi_j) = *phi_j else { continue };
                if j == i {
                    continue;
                }
                let gap = (phi_j - phi_i).rem_euclid(TAU);
                if best.is_none_or(|(_, g)| gap < g) {
                    best = Some((j, gap));
                }
            }
            best.map(|(j, _)| j)
        })
        .collect()
}

/// Unsigned angle between the radial parts of `a` and `b` about `axis`.
fn separating_angle(a: &Vec3, b: &Vec3, axis: &Vec3) -> f64 {
    let ra = a - axis * axis.dot(a);
    let rb = b - axis * axis.dot(b);
    axis.dot(&ra.cross(&rb)).abs().atan2(ra.dot(&rb))
}

pub fn sym_transform(points: &[Vec3], axis: &SymmetryAxis) -> Vec<SymTriplet> {
    let s = axis.direction();
    let neighbors = clockwise_neighbors(points, axis);
    points
        .iter()
        .zip(&neighbors)
        .map(|(p, nb)| {
            let h = s.dot(p);
            let d = (p - s * h).norm();
            let theta = match nb {
                Some(j) if d >= ON_AXIS_TOL => separating_angle(p, &points[*j], s),
                _ => 0.0,
            };
            SymTriplet { d, h, theta }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::super::{random_unit_vector, Rotation};
    use super::*;

    #[test]
    fn on_axis_point() {
        let t = sym_transform(&[Vec3::new(0.0, 2.0, 0.0)], &SymmetryAxis::y());
        assert_eq!(t[0], SymTriplet { d: 0.0, h: 2.0, theta: 0.0 });
    }

    #[test]
    fn two_points_quarter_turn_apart() {
        let pts = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
        let t = sym_transform(&pts, &SymmetryAxis::y());
        for tri in &t {
            assert!((tri.d - 1.0).abs() < 1e-15);
            assert!(tri.h.abs() < 1e-15);
            assert!((tri.theta - FRAC_PI_2).abs() < 1e-15);
        }
    }

    #[test]
    fn neighbours_follow_right_hand_sense() {
        // about +z, right-handed sweep from +x reaches +y first
        let axis = SymmetryAxis::new(Vec3::z()).unwrap();
        let pts = [Vec3::x(), Vec3::y(), -Vec3::x()];
        assert_eq!(clockwise_neighbors(&pts, &axis), vec![Some(1), Some(2), Some(0)]);
    }

    #[test]
    fn on_axis_points_are_not_neighbours() {
        let pts = [Vec3::x(), Vec3::zeros(), Vec3::y()];
        let axis = SymmetryAxis::new(Vec3::z()).unwrap();
        assert_eq!(clockwise_neighbors(&pts, &axis), vec![Some(2), None, Some(0)]);
    }

    #[test]
    fn zero_axis_rejected() {
        assert!(SymmetryAxis::new(Vec3::zeros()).is_err());
        let a = SymmetryAxis::new(Vec3::new(0.0, 3.0, 4.0)).unwrap();
        assert!((a.direction().norm() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn invariant_under_rotation_about_axis(seed in any::<u64>(), n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let axis = SymmetryAxis::new(random_unit_vector(&mut rng)).unwrap();
            let pts: Vec<Vec3> = (0..n)
                .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()) - Vec3::repeat(0.5))
                .collect();
            let alpha = rng.random::<f64>() * TAU;
            let rot = Rotation::from_axis_angle(axis.direction(), alpha);
            let moved: Vec<Vec3> = pts.iter().map(|p| rot.apply(p)).collect();
            let a = sym_transform(&pts, &axis);
            let b = sym_transform(&moved, &axis);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.d - y.d).abs() < 1e-9);
                prop_assert!((x.h - y.h).abs() < 1e-9);
                prop_assert!((x.theta - y.theta).abs() < 1e-9);
                prop_assert!(x.d >= 0.0 && x.theta >= 0.0 && x.theta < TAU);
            }
        }
    }
}
