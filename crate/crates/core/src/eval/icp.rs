//! Point-to-point ICP and a frame-to-frame ICP tracker used as the baseline.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::encode::{crop_volume, CropParams};
use crate::error::{Error, Result};
use crate::geometry::{compose, least_squares_align, Pose, Vec3};
use crate::seed::derive;
use crate::synthdata::Frame;
use crate::tracker::TrackedPose;

/// Uniform voxel hash for exact nearest-neighbor queries.
#[derive(Clone, Debug)]
pub struct PointGrid {
    points: Vec<Vec3>,
    cell: f64,
    cells: HashMap<[i64; 3], Vec<u32>>,
    lo: [i64; 3],
    hi: [i64; 3],
}

impl PointGrid {
    pub fn new(points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut min = points[0];
        let mut max = points[0];
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        let span = (max - min).map(|s| s.max(1e-3));
        let cell = (1.5 * span.x * span.y * span.z / points.len() as f64).cbrt().max(1e-6);
        let mut grid = Self { points: points.to_vec(), cell, cells: HashMap::new(), lo: [i64::MAX; 3], hi: [i64::MIN; 3] };
        for (i, p) in points.iter().enumerate() {
            let k = grid.key(p);
            for a in 0..3 {
                grid.lo[a] = grid.lo[a].min(k[a]);
                grid.hi[a] = grid.hi[a].max(k[a]);
            }
            grid.cells.entry(k).or_default().push(i as u32);
        }
        Ok(grid)
    }

    fn key(&self, p: &Vec3) -> [i64; 3] {
        [0, 1, 2].map(|a| (p[a] / self.cell).floor() as i64)
    }

    fn scan(&self, q: &Vec3, best: &mut Option<(usize, f64)>, ids: &[u32]) {
        for &i in ids {
            let d = (self.points[i as usize] - q).norm_squared();
            if best.is_none_or(|(bi, bd)| d < bd || (d == bd && (i as usize) < bi)) {
                *best = Some((i as usize, d));
            }
        }
    }

    /// Nearest point within `max_dist` as `(index, distance)`; ties go to
    /// the lower index.
    pub fn nearest(&self, q: &Vec3, max_dist: f64) -> Option<(usize, f64)> {
        let k = self.key(q);
        // Chebyshev ring radius that covers the whole occupied box.
        let cover = (0..3).map(|a| (k[a] - self.lo[a]).abs().max((self.hi[a] - k[a]).abs())).max().unwrap_or(0);
        let needed = if max_dist.is_finite() { ((max_dist / self.cell).ceil() as i64 + 1).min(cover) } else { cover };
        let mut best = None;
        if (2 * needed + 1).pow(3) as usize > 4 * self.points.len() {
            let all: Vec<u32> = (0..self.points.len() as u32).collect();
            self.scan(q, &mut best, &all);
        } else {
            for r in 0..=needed {
                for dx in -r..=r {
                    for dy in -r..=r {
                        for dz in -r..=r {
                            if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                                continue;
                            }
                            if let Some(ids) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                                self.scan(q, &mut best, ids);
                            }
                        }
                    }
                }
                // Points in ring r + 1 are at least r cells away.
                if best.is_some_and(|(_, d)| d.sqrt() <= r as f64 * self.cell) {
                    break;
                }
            }
        }
        best.map(|(i, d)| (i, d.sqrt())).filter(|&(_, d)| d <= max_dist)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcpConfig {
    pub max_iters: usize,
    /// Correspondences farther than this (meters) are ignored.
    pub cutoff: f64,
    /// Stop when no pose entry changes by more than this.
    pub tolerance: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self { max_iters: 30, cutoff: 0.05, tolerance: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcpResult {
    pub delta: Pose,
    /// RMS distance of the inlier correspondences at `delta`, infinite when
    /// there are none.
    pub residual: f64,
    pub inliers: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Residual at the start of every iteration.
    pub history: Vec<f64>,
}

fn correspondences(grid: &PointGrid, src: &[Vec3], delta: &Pose, cutoff: f64) -> (Vec<Vec3>, Vec<Vec3>, f64) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut sq = 0.0;
    for p in src {
        if let Some((j, d)) = grid.nearest(&delta.transform_point(p), cutoff) {
            a.push(*p);
            b.push(grid.points[j]);
            sq += d * d;
        }
    }
    let rms = if a.is_empty() { f64::INFINITY } else { (sq / a.len() as f64).sqrt() };
    (a, b, rms)
}

/// Rigid motion taking `prev` onto `curr`, starting from `init`.
pub fn icp_baseline(prev: &[Vec3], curr: &[Vec3], init: &Pose, config: &IcpConfig) -> Result<IcpResult> {
    if prev.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let grid = PointGrid::new(curr)?;
    let mut delta = *init;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        let (a, b, rms) = correspondences(&grid, prev, &delta, config.cutoff);
        history.push(rms);
        iterations += 1;
        let Ok(next) = least_squares_align(&a, &b) else { break };
        let change = next.max_abs_diff(&delta);
        delta = next;
        if change < config.tolerance {
            converged = true;
            break;
        }
    }
    let (a, _, residual) = correspondences(&grid, prev, &delta, config.cutoff);
    Ok(IcpResult { delta, residual, inliers: a.len(), iterations, converged, history })
}

struct IcpState {
    pose: Pose,
    last_delta: Pose,
    points: Vec<Vec3>,
    point_pose: Pose,
}

/// Frame-to-frame ICP tracking on crops around the constant-velocity
/// prediction. Failed frames keep extrapolating, as in the keypoint tracker.
pub fn icp_track_sequence(
    frames: &[Option<&Frame>],
    p0: &Pose,
    extent: &Vec3,
    crop: &CropParams,
    config: &IcpConfig,
    seed: u64,
) -> Result<Vec<TrackedPose>> {
    let crop_at = |f: &Frame, around: &Pose| -> Option<Vec<Vec3>> {
        crop_volume(&f.points, around, extent, crop, derive(seed, f.index as u64)).ok().map(|c| c.points.iter().map(|p| p.position).collect())
    };
    let mut state: Option<IcpState> = None;
    let mut out = Vec::with_capacity(frames.len());
    for frame in frames {
        let Some(s) = state.as_mut() else {
            let init = frame.and_then(|f| crop_at(f, p0));
            match init {
                Some(points) => {
                    state = Some(IcpState { pose: *p0, last_delta: Pose::identity(), points, point_pose: *p0 });
                    out.push(TrackedPose { pose: *p0, valid: true });
                }
                None => out.push(TrackedPose { pose: *p0, valid: false }),
            }
            continue;
        };
        let predicted = compose(&s.last_delta, &s.pose);
        let result = frame.and_then(|f| crop_at(f, &predicted)).and_then(|curr| {
            let guess = predicted * s.point_pose.inverse();
            let r = icp_baseline(&s.points, &curr, &guess, config).ok()?;
            (r.inliers >= 3).then_some((r.delta, curr))
        });
        match result {
            Some((delta, curr)) => {
                let pose = compose(&delta, &s.point_pose).orthonormalized();
                s.last_delta = (pose * s.pose.inverse()).orthonormalized();
                s.pose = pose;
                s.points = curr;
                s.point_pose = pose;
                out.push(TrackedPose { pose, valid: true });
            }
            None => {
                s.pose = predicted.orthonormalized();
                out.push(TrackedPose { pose: s.pose, valid: false });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::{rotation_error, Rotation};
    use crate::synthdata::{gen_instance, gen_sequence, CategorySpec, SequenceParams};

    fn cloud(seed: u64) -> Vec<Vec3> {
        let spec = CategorySpec::builtin("camera").unwrap();
        gen_instance(&spec, seed).points.into_iter().step_by(3).collect()
    }

    #[test]
    fn grid_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec3> = (0..300).map(|_| Vec3::from_fn(|_, _| rng.random_range(-0.2..0.2))).collect();
        let grid = PointGrid::new(&pts).unwrap();
        for _ in 0..200 {
            let q = Vec3::from_fn(|_, _| rng.random_range(-0.5..0.5));
            let brute = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p - q).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert_eq!(grid.nearest(&q, f64::INFINITY).unwrap(), brute);
            let near = grid.nearest(&q, 0.03);
            assert_eq!(near, (brute.1 <= 0.03).then_some(brute));
        }
        assert!(matches!(PointGrid::new(&[]), Err(Error::EmptyCloud)));
    }

    #[test]
    fn identical_clouds_give_identity() {
        let pts = cloud(1);
        let r = icp_baseline(&pts, &pts, &Pose::identity(), &IcpConfig::default()).unwrap();
        assert!(r.delta.max_abs_diff(&Pose::identity()) < 1e-12);
        assert!(r.converged && r.residual < 1e-12);
    }

    #[test]
    fn recovers_motion_inside_basin() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..5 {
            let pts = cloud(seed);
            let motion = Pose::new(Rotation::random_small(&mut rng, 10f64.to_radians()), Vec3::from_fn(|_, _| rng.random_range(-0.01..0.01)));
            let moved: Vec<Vec3> = pts.iter().map(|p| motion.transform_point(p)).collect();
            let cfg = IcpConfig { max_iters: 100, cutoff: f64::INFINITY, ..IcpConfig::default() };
            let r = icp_baseline(&pts, &moved, &Pose::identity(), &cfg).unwrap();
            assert!(rotation_error(&r.delta.rotation, &motion.rotation) < 1e-3, "seed {seed}");
            assert!((r.delta.translation - motion.translation).norm() < 1e-3);
        }
    }

    #[test]
    fn unrelated_clouds_terminate() {
        let a = cloud(1);
        let b: Vec<Vec3> = cloud(2).iter().map(|p| p + Vec3::new(5.0, 0.0, 0.0)).collect();
        let r = icp_baseline(&a, &b, &Pose::identity(), &IcpConfig::default()).unwrap();
        assert_eq!(r.inliers, 0);
        assert!(r.residual.is_infinite());
        let r = icp_baseline(&a, &b, &Pose::identity(), &IcpConfig { cutoff: f64::INFINITY, ..IcpConfig::default() }).unwrap();
        assert!(r.residual.is_finite() && r.iterations <= 30);
        assert!(matches!(icp_baseline(&[], &b, &Pose::identity(), &IcpConfig::default()), Err(Error::EmptyCloud)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn residual_never_increases(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = cloud(seed % 7);
            let motion = Pose::new(Rotation::random_small(&mut rng, 0.3), Vec3::from_fn(|_, _| rng.random_range(-0.03..0.03)));
            let moved: Vec<Vec3> = pts.iter().map(|p| motion.transform_point(p)).collect();
            let cfg = IcpConfig { cutoff: f64::INFINITY, ..IcpConfig::default() };
            let r = icp_baseline(&pts, &moved, &Pose::identity(), &cfg).unwrap();
            for w in r.history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", r.history);
            }
        }
    }

    #[test]
    fn tracks_clean_sequence_closely() {
        let spec = CategorySpec::builtin("laptop").unwrap();
        let seq = gen_sequence(&spec, 1, &SequenceParams { length: 20, ..SequenceParams::default() }, 4);
        let frames: Vec<Option<&Frame>> = seq.frames.iter().map(Some).collect();
        let out = icp_track_sequence(&frames, &seq.frames[0].gt_pose, &spec.extent, &CropParams::default(), &IcpConfig::default(), 0).unwrap();
        assert_eq!(out.len(), 20);
        let last = out.last().unwrap().pose;
        assert!((last.translation - seq.frames[19].gt_pose.translation).norm() < 0.03);
    }
}
