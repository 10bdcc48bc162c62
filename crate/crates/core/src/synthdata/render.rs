//! Trajectories and frame rendering: back-face culling from a camera at the
//! origin looking along +z, a contiguous angular occlusion sector, depth
//! noise along the viewing ray and clutter in a shell around the object.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{gen_instance, CategorySpec, InstanceModel};
use crate::encode::ObservedPoint;
use crate::geometry::{random_unit_vector, Pose, Rotation, Vec3};
use crate::seed::derive_labeled;

/// Largest per-frame rotation produced by [`gen_trajectory`], radians.
pub const MAX_STEP_ANGLE: f64 = 0.1745; // 10°
/// Largest per-frame displacement of the object origin, meters.
pub const MAX_STEP_TRANSLATION: f64 = 0.04;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderParams {
    pub occlusion: f64,
    pub noise_sigma: f64,
    pub clutter_points: usize,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self { occlusion: 0.0, noise_sigma: 0.0, clutter_points: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub points: Vec<ObservedPoint>,
    pub gt_pose: Pose,
    /// Model point index behind each observed point; `None` for clutter.
    pub sources: Vec<Option<u32>>,
}

impl Frame {
    pub fn positions(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| p.position).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub category: String,
    pub instance_id: u64,
    pub seed: u64,
    pub frames: Vec<Frame>,
}

impl Sequence {
    pub fn gt_poses(&self) -> Vec<Pose> {
        self.frames.iter().map(|f| f.gt_pose).collect()
    }
}

/// Upright object 0.6–0.8 m in front of the camera, tilted to show its top.
pub fn start_pose<R: Rng + ?Sized>(rng: &mut R) -> Pose {
    let yaw = rng.random_range(0.0..TAU);
    let elevation = rng.random_range(20f64..40.0).to_radians();
    let rotation = Rotation::rx(elevation) * Rotation::rx(std::f64::consts::PI) * Rotation::ry(yaw);
    let translation = Vec3::new(rng.random_range(-0.08..0.08), rng.random_range(-0.08..0.08), rng.random_range(0.6..0.8));
    Pose::new(rotation, translation)
}

fn clamp_norm(v: Vec3, max: f64) -> Vec3 {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Smooth random motion: damped random walks on angular and linear
/// velocity, the translation pulled gently back toward the start.
pub fn gen_trajectory(seed: u64, length: usize, motion_scale: f64) -> Vec<Pose> {
    assert!(length >= 1, "trajectory needs at least one pose");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = start_pose(&mut rng);
    let mut poses = vec![start];
    let (mut omega, mut vel) = (Vec3::zeros(), Vec3::zeros());
    let rot_step = 4f64.to_radians() * motion_scale;
    let trans_step = 0.012 * motion_scale;
    for _ in 1..length {
        let prev = *poses.last().expect("nonempty");
        let gauss = |rng: &mut ChaCha8Rng| Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        omega = clamp_norm(omega * 0.85 + gauss(&mut rng) * (0.15 * rot_step), MAX_STEP_ANGLE);
        let pull = (start.translation - prev.translation) * 0.05;
        vel = clamp_norm(vel * 0.85 + gauss(&mut rng) * (0.15 * trans_step) + pull, MAX_STEP_TRANSLATION);
        let angle = omega.norm();
        let step = if angle > 0.0 { Rotation::from_axis_angle(&(omega / angle), angle) } else { Rotation::identity() };
        poses.push(Pose::new(step * prev.rotation, prev.translation + vel));
    }
    poses
}

/// `p_t = Δ^t · p_0`.
pub fn constant_velocity_trajectory(start: &Pose, delta: &Pose, length: usize) -> Vec<Pose> {
    let mut poses = vec![*start];
    for _ in 1..length {
        let last = *poses.last().expect("nonempty");
        poses.push(*delta * last);
    }
    poses
}

/// Occluder direction drift per frame, radians (standard deviation).
pub const OCCLUDER_DRIFT: f64 = 0.05;

/// Renders one frame with the occlusion sector starting at a random angle.
pub fn render_frame(model: &InstanceModel, pose: &Pose, params: &RenderParams, seed: u64) -> Frame {
    let occluder = ChaCha8Rng::seed_from_u64(derive_labeled(seed, "occluder")).random_range(0.0..TAU);
    render_frame_occluded(model, pose, params, occluder, seed)
}

/// Renders one frame with the occlusion sector starting at `occluder`
/// radians, measured around the object center in the image plane.
pub fn render_frame_occluded(model: &InstanceModel, pose: &Pose, params: &RenderParams, occluder: f64, seed: u64) -> Frame {
    assert!((0.0..=0.6).contains(&params.occlusion), "occlusion fraction must be in [0, 0.6]");
    assert!(params.noise_sigma >= 0.0, "noise sigma must be nonnegative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut front: Vec<(usize, Vec3)> = Vec::new();
    for (i, (p, n)) in model.points.iter().zip(&model.normals).enumerate() {
        let x = pose.transform_point(p);
        if pose.transform_vector(n).dot(&x) < 0.0 {
            front.push((i, x));
        }
    }
    let start = occluder;
    if params.occlusion > 0.0 && !front.is_empty() {
        let c = pose.translation;
        let mut order: Vec<(f64, usize)> = front
            .iter()
            .enumerate()
            .map(|(k, (_, x))| (((x.y - c.y).atan2(x.x - c.x) - start).rem_euclid(TAU), k))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let drop = (params.occlusion * front.len() as f64).round() as usize;
        let mut keep = vec![true; front.len()];
        for (_, k) in order.iter().take(drop) {
            keep[*k] = false;
        }
        front = front.into_iter().zip(keep).filter_map(|(f, k)| k.then_some(f)).collect();
    }
    let noise = Normal::new(0.0, params.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let mut points = Vec::with_capacity(front.len() + params.clutter_points);
    let mut sources = Vec::with_capacity(points.capacity());
    for (i, x) in front {
        let x = if params.noise_sigma > 0.0 { x + x.normalize() * noise.sample(&mut rng) } else { x };
        points.push(ObservedPoint::new(x, model.colors[i]));
        sources.push(Some(i as u32));
    }
    let radius = model.radius();
    for _ in 0..params.clutter_points {
        let r = radius * rng.random_range(1.1..1.8);
        let x = pose.translation + random_unit_vector(&mut rng) * r;
        let color = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        points.push(ObservedPoint::new(x, color));
        sources.push(None);
    }
    Frame { index: 0, points, gt_pose: *pose, sources }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceParams {
    pub length: usize,
    pub motion_scale: f64,
    pub render: RenderParams,
}

impl Default for SequenceParams {
    fn default() -> Self {
        Self { length: 100, motion_scale: 1.0, render: RenderParams::default() }
    }
}

/// Renders one instance along a fresh trajectory; all randomness derives
/// from `seed`.
pub fn gen_sequence(spec: &CategorySpec, instance_seed: u64, params: &SequenceParams, seed: u64) -> Sequence {
    let model = gen_instance(spec, instance_seed);
    let poses = gen_trajectory(derive_labeled(seed, "trajectory"), params.length, params.motion_scale);
    sequence_from_poses(&model, &poses, &params.render, seed)
}

/// The occluder stays put in the image up to a slow random drift, so the
/// hidden part of the object changes gradually over a sequence.
pub(crate) fn sequence_from_poses(model: &InstanceModel, poses: &[Pose], render: &RenderParams, seed: u64) -> Sequence {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_labeled(seed, "occluder"));
    let mut occluder = rng.random_range(0.0..TAU);
    let frames = poses
        .iter()
        .enumerate()
        .map(|(t, pose)| {
            if t > 0 {
                occluder += OCCLUDER_DRIFT * rng.sample::<f64, _>(StandardNormal);
            }
            let seed_t = crate::seed::derive(derive_labeled(seed, "render"), t as u64);
            let mut f = render_frame_occluded(model, pose, render, occluder, seed_t);
            f.index = t;
            f
        })
        .collect();
    Sequence { category: model.category.clone(), instance_id: model.id, seed, frames }
}

/// Renders an instance along given poses.
pub fn render_sequence(model: &InstanceModel, poses: &[Pose], render: &RenderParams, seed: u64) -> Sequence {
    sequence_from_poses(model, poses, render, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{least_squares_align, rotation_error};

    fn bowl() -> InstanceModel {
        gen_instance(&CategorySpec::builtin("bowl").unwrap(), 1)
    }

    #[test]
    fn still_trajectory() {
        let poses = gen_trajectory(3, 20, 0.0);
        assert!(poses.iter().all(|p| *p == poses[0]));
    }

    #[test]
    fn trajectory_steps_are_bounded() {
        for seed in 0..20 {
            let poses = gen_trajectory(seed, 100, 1.0);
            assert_eq!(poses.len(), 100);
            for w in poses.windows(2) {
                assert!(rotation_error(&w[1].rotation, &w[0].rotation) <= 15f64.to_radians());
                assert!((w[1].translation - w[0].translation).norm() <= 0.05);
                assert!(w[1].rotation.is_valid(1e-9));
            }
        }
        assert_eq!(gen_trajectory(1, 2, 1.0).len(), 2);
    }

    #[test]
    fn clean_frame_lies_on_model() {
        let m = bowl();
        let pose = gen_trajectory(2, 1, 1.0)[0];
        let f = render_frame(&m, &pose, &RenderParams::default(), 9);
        assert!(!f.points.is_empty() && f.points.len() < m.len());
        for (p, s) in f.points.iter().zip(&f.sources) {
            let i = s.unwrap() as usize;
            assert!((p.position - pose.transform_point(&m.points[i])).norm() < 1e-12);
        }
    }

    #[test]
    fn occlusion_bounds() {
        for name in super::super::CATEGORY_NAMES {
            let m = gen_instance(&CategorySpec::builtin(name).unwrap(), 4);
            for seed in 0..5 {
                let pose = gen_trajectory(seed, 1, 1.0)[0];
                let params = RenderParams { occlusion: 0.5, ..RenderParams::default() };
                let f = render_frame(&m, &pose, &params, seed);
                let frac = f.points.len() as f64 / m.len() as f64;
                assert!((0.2..=0.5).contains(&frac), "{name} seed {seed}: {frac}");
            }
        }
    }

    #[test]
    fn frames_are_deterministic() {
        let m = bowl();
        let pose = gen_trajectory(2, 1, 1.0)[0];
        let params = RenderParams { occlusion: 0.3, noise_sigma: 0.002, clutter_points: 50 };
        assert_eq!(render_frame(&m, &pose, &params, 5), render_frame(&m, &pose, &params, 5));
        assert_ne!(render_frame(&m, &pose, &params, 5), render_frame(&m, &pose, &params, 6));
    }

    #[test]
    fn clutter_stays_off_the_object() {
        let m = bowl();
        let pose = gen_trajectory(2, 1, 1.0)[0];
        let params = RenderParams { clutter_points: 100, ..RenderParams::default() };
        let f = render_frame(&m, &pose, &params, 5);
        let r = m.radius();
        for (p, s) in f.points.iter().zip(&f.sources) {
            if s.is_none() {
                let d = (p.position - pose.translation).norm();
                assert!(d >= 1.1 * r - 1e-12 && d <= 1.8 * r + 1e-12);
            }
        }
    }

    #[test]
    fn ground_truth_is_consistent() {
        let spec = CategorySpec::builtin("camera").unwrap();
        let seq = gen_sequence(&spec, 3, &SequenceParams { length: 10, ..SequenceParams::default() }, 8);
        for w in seq.frames.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let mut src = Vec::new();
            let mut dst = Vec::new();
            for (pa, sa) in a.points.iter().zip(&a.sources) {
                if let Some(k) = b.sources.iter().position(|sb| sb == sa) {
                    src.push(pa.position);
                    dst.push(b.points[k].position);
                }
            }
            assert!(src.len() > 100);
            let est = least_squares_align(&src, &dst).unwrap();
            let truth = b.gt_pose * a.gt_pose.inverse();
            assert!(est.max_abs_diff(&truth) < 1e-9);
        }
    }
}
