//! Training losses, generic over [`Real`] so the same code yields values and
//! gradients. Keypoints are `[S; 3]` in meters unless stated otherwise.

use std::f64::consts::{PI, SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{least_squares_align, rotation_jacobian, Mat3, Pose, SymmetryAxis, Vec3, ON_AXIS_TOL};
use crate::nn::real::{add3c, cross3, dot3, dot3c, matvec3, mean3, norm3, sub3, sum, values3, V3};
use crate::nn::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub w_mvc: f64,
    pub w_tra: f64,
    pub w_rot: f64,
    pub w_sep: f64,
    pub w_sil: f64,
    pub w_cen: f64,
    pub w_anc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { w_mvc: 10.0, w_tra: 1.0, w_rot: 1.0, w_sep: 0.1, w_sil: 0.1, w_cen: 1.0, w_anc: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_mvc, self.w_tra, self.w_rot, self.w_sep, self.w_sil, self.w_cen, self.w_anc];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::DegenerateInput("loss weights must be finite and nonnegative".into()));
        }
        if self.w_mvc <= 0.0 || self.w_tra <= 0.0 || self.w_rot <= 0.0 {
            return Err(Error::DegenerateInput("w_mvc, w_tra and w_rot must be positive".into()));
        }
        Ok(())
    }
}

fn rows(m: &Mat3) -> [[f64; 3]; 3] {
    std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
}

fn vals(points: &[V3<impl Real>]) -> Vec<Vec3> {
    points.iter().map(|p| Vec3::from(values3(p))).collect()
}

fn transform<S: Real>(pose: &Pose, p: &V3<S>) -> V3<S> {
    add3c(&matvec3(&rows(pose.rotation.matrix()), p), &pose.translation.into())
}

/// `(1/N) Σ c_i (‖a_i − o‖ − β)`, `β` the smallest anchor distance.
pub fn anchor_loss<S: Real>(confidences: &[S], anchors: &[Vec3], centroid_gt: &Vec3) -> S {
    assert_eq!(confidences.len(), anchors.len());
    let dist: Vec<f64> = anchors.iter().map(|a| (a - centroid_gt).norm()).collect();
    let beta = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let terms: Vec<S> = confidences.iter().zip(&dist).map(|(c, d)| *c * (d - beta)).collect();
    sum(&terms) / anchors.len() as f64
}

/// Mean distance between `curr` and the ground-truth-moved `prev`.
pub fn mvc_loss<S: Real>(curr: &[V3<S>], prev: &[V3<S>], delta_gt: &Pose) -> S {
    assert_eq!(curr.len(), prev.len());
    let terms: Vec<S> = curr
        .iter()
        .zip(prev)
        .map(|(c, p)| norm3(&sub3(c, &transform(delta_gt, p))))
        .collect();
    sum(&terms) / curr.len() as f64
}

/// `(d, h, θ)` coordinates of canonical-frame points about `axis`. The
/// neighbor choice is piecewise constant, so it is made on values.
pub fn sym_coords<S: Real>(points: &[V3<S>], axis: &SymmetryAxis) -> Vec<V3<S>> {
    let s: [f64; 3] = (*axis.direction()).into();
    let neighbors = crate::geometry::clockwise_neighbors(&vals(points), axis);
    let radial: Vec<V3<S>> = points
        .iter()
        .map(|p| {
            let h = dot3c(p, &s);
            [p[0] - h * s[0], p[1] - h * s[1], p[2] - h * s[2]]
        })
        .collect();
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let h = dot3c(p, &s);
            let d = norm3(&radial[i]);
            let theta = match neighbors[i] {
                Some(j) if d.value() >= ON_AXIS_TOL => {
                    let c = cross3(&radial[i], &radial[j]);
                    dot3c(&c, &s).abs().atan2(dot3(&radial[i], &radial[j]))
                }
                _ => h.lift(0.0),
            };
            [d, h, theta]
        })
        .collect()
}

/// Symmetric multi-view consistency: distances between `(d, h, θ)`
/// coordinates, with both sets mapped into the object frame `frame`.
pub fn sym_mvc_loss<S: Real>(
    curr: &[V3<S>],
    prev: &[V3<S>],
    delta_gt: &Pose,
    axis: &SymmetryAxis,
    frame: &Pose,
) -> S {
    assert_eq!(curr.len(), prev.len());
    let to_object = frame.inverse();
    let a: Vec<V3<S>> = curr.iter().map(|p| transform(&to_object, p)).collect();
    let b: Vec<V3<S>> = prev.iter().map(|p| transform(&to_object, &transform(delta_gt, p))).collect();
    let ra = sym_coords(&a, axis);
    let rb = sym_coords(&b, axis);
    let terms: Vec<S> = ra
        .iter()
        .zip(&rb)
        .map(|(x, y)| {
            let mut dtheta = x[2] - y[2];
            let v = dtheta.value();
            if v > PI {
                dtheta = dtheta - TAU;
            } else if v < -PI {
                dtheta = dtheta + TAU;
            }
            let diff = [x[0] - y[0], x[1] - y[1], dtheta];
            norm3(&diff)
        })
        .collect();
    sum(&terms) / curr.len() as f64
}

/// Least-squares rotation taking centered `src` onto centered `dst`, with the
/// exact derivative of the polar factor attached.
pub fn aligned_rotation<S: Real>(src: &[V3<S>], dst: &[V3<S>]) -> Result<[[S; 3]; 3]> {
    least_squares_align(&vals(src), &vals(dst))?;
    let cs = mean3(src);
    let cd = mean3(dst);
    let mut h: Vec<S> = Vec::with_capacity(9);
    for a in 0..3 {
        for b in 0..3 {
            let terms: Vec<S> = src
                .iter()
                .zip(dst)
                .map(|(s, d)| (s[a] - cs[a]) * (d[b] - cd[b]))
                .collect();
            h.push(sum(&terms));
        }
    }
    let hv = Mat3::from_row_iterator(h.iter().map(|x| x.value()));
    let (r, jac) = rotation_jacobian(&hv);
    Ok(std::array::from_fn(|row| {
        std::array::from_fn(|col| S::custom(&h, r[(row, col)], &jac[3 * row + col]))
    }))
}

/// `2·asin(‖R − R_gt‖_F / (2√2))`.
pub fn rotation_distance<S: Real>(r: &[[S; 3]; 3], truth: &Mat3) -> S {
    let mut terms = Vec::with_capacity(9);
    for row in 0..3 {
        for col in 0..3 {
            let d = r[row][col] - truth[(row, col)];
            terms.push(d * d);
        }
    }
    (sum(&terms).sqrt() / (2.0 * SQRT_2)).clamp(0.0, 1.0).asin() * 2.0
}

/// Centroid displacement error against the ground-truth-moved centroid.
pub fn translation_loss<S: Real>(curr: &[V3<S>], prev: &[V3<S>], delta_gt: &Pose) -> S {
    let moved = transform(delta_gt, &mean3(prev));
    norm3(&sub3(&mean3(curr), &moved))
}

pub fn rotation_loss<S: Real>(curr: &[V3<S>], prev: &[V3<S>], delta_gt: &Pose) -> Result<S> {
    let r = aligned_rotation(prev, curr)?;
    Ok(rotation_distance(&r, delta_gt.rotation.matrix()))
}

/// `(translation part, rotation part)`.
pub fn pose_loss<S: Real>(curr: &[V3<S>], prev: &[V3<S>], delta_gt: &Pose) -> Result<(S, S)> {
    Ok((translation_loss(curr, prev, delta_gt), rotation_loss(curr, prev, delta_gt)?))
}

/// Angle between the estimated and true change of the symmetry axis.
pub fn sym_rot_loss<S: Real>(curr: &[V3<S>], prev: &[V3<S>], axis_prev: &Vec3, delta_gt: &Pose) -> Result<S> {
    let r = aligned_rotation(prev, curr)?;
    let truth = delta_gt.rotation.apply(axis_prev);
    if truth.norm() < 1e-12 {
        return Err(Error::ZeroVector);
    }
    let a: [f64; 3] = (*axis_prev).into();
    let est: V3<S> = std::array::from_fn(|k| r[k][0] * a[0] + r[k][1] * a[1] + r[k][2] * a[2]);
    let cos = dot3c(&est, &truth.into()) / (norm3(&est) * truth.norm());
    Ok(cos.clamp(-1.0, 1.0).acos())
}

/// Pairwise hinge `(2/(K(K−1))) Σ_{i<j} max(0, margin − ‖k_i − k_j‖)²`.
pub fn sep_loss<S: Real>(kps: &[V3<S>], margin: f64) -> S {
    let k = kps.len();
    assert!(k >= 2, "separation needs at least two keypoints");
    let mut terms = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let gap = (-norm3(&sub3(&kps[i], &kps[j])) + margin).relu();
            terms.push(gap * gap);
        }
    }
    sum(&terms) * (2.0 / (k * (k - 1)) as f64)
}

/// Mean squared distance from each keypoint to its nearest observed point.
pub fn sil_loss<S: Real>(kps: &[V3<S>], observed: &[Vec3]) -> S {
    assert!(!observed.is_empty(), "silhouette needs observed points");
    let terms: Vec<S> = kps
        .iter()
        .map(|k| {
            let kv = Vec3::from(values3(k));
            let nearest = observed
                .iter()
                .min_by(|a, b| (*a - kv).norm_squared().total_cmp(&(*b - kv).norm_squared()))
                .expect("nonempty");
            let d = sub3(k, &[nearest.x, nearest.y, nearest.z].map(|v| k[0].lift(v)));
            dot3(&d, &d)
        })
        .collect();
    sum(&terms) / kps.len() as f64
}

pub fn cen_loss<S: Real>(kps: &[V3<S>], centroid_gt: &Vec3) -> S {
    let m = mean3(kps);
    let c: [f64; 3] = (*centroid_gt).into();
    norm3(&[m[0] - c[0], m[1] - c[1], m[2] - c[2]])
}

/// Every loss term for one training sample. The symmetric variants are
/// present only for categories with a symmetry axis.
#[derive(Clone, Copy, Debug)]
pub struct LossParts<S> {
    pub mvc: S,
    pub sym_mvc: Option<S>,
    pub tra: S,
    pub rot: S,
    pub sym_rot: Option<S>,
    pub sep: S,
    pub sil: S,
    pub cen: S,
    pub anc: S,
}

impl<S: Real> LossParts<S> {
    pub fn values(&self, symmetric: bool) -> LossParts<f64> {
        LossParts {
            mvc: self.mvc_term(symmetric).value(),
            sym_mvc: self.sym_mvc.map(Real::value),
            tra: self.tra.value(),
            rot: self.rot_term(symmetric).value(),
            sym_rot: self.sym_rot.map(Real::value),
            sep: self.sep.value(),
            sil: self.sil.value(),
            cen: self.cen.value(),
            anc: self.anc.value(),
        }
    }

    /// Consistency term used by `total_loss`.
    pub fn mvc_term(&self, symmetric: bool) -> S {
        match (symmetric, self.sym_mvc) {
            (true, Some(s)) => s,
            _ => self.mvc,
        }
    }

    pub fn rot_term(&self, symmetric: bool) -> S {
        match (symmetric, self.sym_rot) {
            (true, Some(s)) => s,
            _ => self.rot,
        }
    }
}

pub fn total_loss<S: Real>(parts: &LossParts<S>, w: &LossWeights, symmetric: bool) -> S {
    let terms = [
        parts.mvc_term(symmetric) * w.w_mvc,
        parts.tra * w.w_tra,
        parts.rot_term(symmetric) * w.w_rot,
        parts.sep * w.w_sep,
        parts.sil * w.w_sil,
        parts.cen * w.w_cen,
        parts.anc * w.w_anc,
    ];
    sum(&terms)
}
