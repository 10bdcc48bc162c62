//! The online tracking loop: initialization refinement, constant-velocity
//! prediction, keypoint generation and pose accumulation `p_t = Δp_t · p_{t−1}`.

use serde::{Deserialize, Serialize};

use crate::encode::{crop_volume, CropParams};
use crate::error::{Error, Result};
use crate::geometry::{centroid, compose, least_squares_align, Pose, Vec3};
use crate::keypoint::KeypointSet;
use crate::model::Model;
use crate::seed::derive;
use crate::synthdata::Frame;

/// Produces ordered keypoints for a frame from a crop around a pose.
pub trait KeypointSource {
    fn keypoints(&self, frame: &Frame, around: &Pose, seed: u64) -> Result<KeypointSet>;
}

/// Keypoints from a trained model.
pub struct LearnedKeypoints<'m> {
    pub model: &'m Model,
}

impl KeypointSource for LearnedKeypoints<'_> {
    fn keypoints(&self, frame: &Frame, around: &Pose, seed: u64) -> Result<KeypointSet> {
        Ok(self.model.infer(&frame.points, around, seed)?.keypoints)
    }
}

/// Keypoints rigidly attached to the ground-truth object frame. The crop is
/// still checked, so an empty view fails exactly as with a learned model.
pub struct OracleKeypoints {
    pub canonical: Vec<Vec3>,
    pub extent: Vec3,
    pub crop: CropParams,
}

impl OracleKeypoints {
    /// Eight box corners scaled into the extent; their centroid is the origin.
    pub fn new(extent: Vec3, crop: CropParams) -> Self {
        let h = extent.component_mul(&Vec3::new(0.3, 0.25, 0.2));
        let mut canonical = Vec::with_capacity(8);
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for sz in [1.0, -1.0] {
                    canonical.push(Vec3::new(sx * h.x, sy * h.y, sz * h.z));
                }
            }
        }
        Self { canonical, extent, crop }
    }
}

impl KeypointSource for OracleKeypoints {
    fn keypoints(&self, frame: &Frame, around: &Pose, seed: u64) -> Result<KeypointSet> {
        crop_volume(&frame.points, around, &self.extent, &self.crop, seed)?;
        Ok(KeypointSet::new(self.canonical.iter().map(|k| frame.gt_pose.transform_point(k)).collect()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackConfig {
    /// Refinement iterations at initialization.
    pub refine_iters: usize,
    /// Extrapolate with the last inter-frame change; off reproduces the
    /// variant without temporal prediction.
    pub temporal: bool,
    /// Regenerate the previous frame's keypoints at the new prediction
    /// instead of reusing the cached set.
    pub regenerate_prev: bool,
    /// Abort after this many consecutive frames without a valid estimate.
    pub max_lost_frames: Option<usize>,
    pub seed: u64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self { refine_iters: 10, temporal: true, regenerate_prev: false, max_lost_frames: None, seed: 0 }
    }
}

impl TrackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.refine_iters == 0 {
            return Err(Error::DegenerateInput("refine_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerState {
    pub pose: Pose,
    pub last_delta: Pose,
    pub prev_keypoints: KeypointSet,
    /// Pose estimate of the frame `prev_keypoints` came from.
    pub keypoint_pose: Pose,
    pub frames_since_valid: usize,
}

/// Pose and validity for one frame of a tracked sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackedPose {
    pub pose: Pose,
    pub valid: bool,
}

pub fn predict_pose(state: &TrackerState) -> Pose {
    compose(&state.last_delta, &state.pose)
}

/// Refines the translation of `p0` by repeatedly moving it to the centroid of
/// keypoints generated around it, then keeps the refined candidate closest
/// to its own keypoint centroid (lowest iteration on ties).
pub fn init_refine<S: KeypointSource + ?Sized>(
    source: &S,
    frame: &Frame,
    p0: &Pose,
    config: &TrackConfig,
) -> Result<(Pose, KeypointSet)> {
    config.validate()?;
    let mut pose = *p0;
    let mut best: Option<(f64, Pose, KeypointSet)> = None;
    for i in 0..=config.refine_iters {
        let kps = match source.keypoints(frame, &pose, derive(config.seed, (frame.index as u64) << 8 | i as u64)) {
            Ok(k) => k,
            Err(Error::EmptyCrop { .. }) | Err(Error::DegenerateInput(_)) => continue,
            Err(e) => return Err(e),
        };
        let c = centroid(&kps.points);
        if i > 0 {
            let score = (pose.translation - c).norm();
            if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
                best = Some((score, pose, kps));
            }
        }
        pose = Pose::new(p0.rotation, c);
    }
    best.map(|(_, p, k)| (p, k)).ok_or_else(|| Error::LostTrack("no crop around the initial pose".into()))
}

pub struct Tracker<'s, S: KeypointSource + ?Sized> {
    pub source: &'s S,
    pub config: TrackConfig,
    pub state: Option<TrackerState>,
    last_frame: Option<Frame>,
}

impl<'s, S: KeypointSource + ?Sized> Tracker<'s, S> {
    pub fn new(source: &'s S, config: TrackConfig) -> Self {
        Self { source, config, state: None, last_frame: None }
    }

    pub fn initialize(&mut self, frame: &Frame, p0: &Pose) -> Result<Pose> {
        let (pose, kps) = init_refine(self.source, frame, p0, &self.config)?;
        self.state = Some(TrackerState {
            pose,
            last_delta: Pose::identity(),
            prev_keypoints: kps,
            keypoint_pose: pose,
            frames_since_valid: 0,
        });
        if self.config.regenerate_prev {
            self.last_frame = Some(frame.clone());
        }
        Ok(pose)
    }

    /// Advances one frame; `None` is a dropped frame. Failures leave the
    /// state extrapolating at constant velocity.
    pub fn step(&mut self, frame: Option<&Frame>) -> Result<TrackedPose> {
        let state = self.state.as_mut().ok_or_else(|| Error::LostTrack("tracker not initialized".into()))?;
        let predicted = if self.config.temporal { predict_pose(state) } else { state.pose };
        let outcome = match frame {
            None => None,
            Some(f) => {
                let seed = derive(self.config.seed, f.index as u64);
                let prev = match (&self.last_frame, self.config.regenerate_prev) {
                    (Some(last), true) => self.source.keypoints(last, &predicted, seed ^ 1),
                    _ => Ok(state.prev_keypoints.clone()),
                };
                let res = prev.and_then(|prev| {
                    let curr = self.source.keypoints(f, &predicted, seed)?;
                    let delta = least_squares_align(&prev.points, &curr.points)?;
                    Ok((delta, curr))
                });
                match res {
                    Ok(ok) => Some(ok),
                    Err(Error::EmptyCrop { .. }) | Err(Error::DegenerateInput(_)) => None,
                    Err(e) => return Err(e),
                }
            }
        };
        match outcome {
            Some((delta, curr)) => {
                let pose = compose(&delta, &state.keypoint_pose).orthonormalized();
                state.last_delta = (pose * state.pose.inverse()).orthonormalized();
                state.pose = pose;
                state.prev_keypoints = curr;
                state.keypoint_pose = pose;
                state.frames_since_valid = 0;
                if self.config.regenerate_prev {
                    self.last_frame = frame.cloned();
                }
                Ok(TrackedPose { pose, valid: true })
            }
            None => {
                state.pose = predicted.orthonormalized();
                state.frames_since_valid += 1;
                if let Some(limit) = self.config.max_lost_frames {
                    if state.frames_since_valid > limit {
                        return Err(Error::LostTrack(format!("{} frames without an estimate", state.frames_since_valid)));
                    }
                }
                Ok(TrackedPose { pose: state.pose, valid: false })
            }
        }
    }
}

/// Tracks a whole sequence; `None` entries are dropped frames. The output
/// has one pose per input frame.
pub fn track_sequence<S: KeypointSource + ?Sized>(
    source: &S,
    frames: &[Option<&Frame>],
    p0: &Pose,
    config: &TrackConfig,
) -> Result<Vec<TrackedPose>> {
    config.validate()?;
    let mut tracker = Tracker::new(source, config.clone());
    let mut out = Vec::with_capacity(frames.len());
    let mut lost = 0;
    for frame in frames {
        if tracker.state.is_some() {
            out.push(tracker.step(*frame)?);
            continue;
        }
        let init = match frame {
            Some(f) => match tracker.initialize(f, p0) {
                Ok(pose) => Some(pose),
                Err(Error::LostTrack(_)) => None,
                Err(e) => return Err(e),
            },
            None => None,
        };
        match init {
            Some(pose) => out.push(TrackedPose { pose, valid: true }),
            None => {
                lost += 1;
                if config.max_lost_frames.is_some_and(|limit| lost > limit) {
                    return Err(Error::LostTrack("initialization never succeeded".into()));
                }
                out.push(TrackedPose { pose: *p0, valid: false });
            }
        }
    }
    Ok(out)
}
