//! Runs tracking methods over sequences under initialization noise and
//! frame dropout, and the keypoint-count ablation.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::icp::{icp_track_sequence, IcpConfig};
use super::{FrameScore, Metrics};
use crate::encode::CropParams;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::model::{Model, ModelConfig};
use crate::seed::{derive, derive_labeled};
use crate::synthdata::{CategorySpec, Frame, Sequence};
use crate::tracker::{track_sequence, LearnedKeypoints, OracleKeypoints, TrackConfig, TrackedPose};
use crate::train::{TrainConfig, Trainer};

/// Uniform translation noise in `[-max, max]` per axis.
pub fn init_noise<R: Rng + ?Sized>(rng: &mut R, max: f64) -> Vec3 {
    if max == 0.0 {
        return Vec3::zeros();
    }
    Vec3::from_fn(|_, _| rng.random_range(-max..=max))
}

/// Ground-truth start pose with translation noise, drawn per sequence.
pub fn initial_pose(seq: &Sequence, max_noise: f64, seed: u64) -> Result<Pose> {
    let first = seq.frames.first().ok_or_else(|| Error::DegenerateInput("empty sequence".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_labeled(seed, "init-noise"));
    Ok(Pose::new(first.gt_pose.rotation, first.gt_pose.translation + init_noise(&mut rng, max_noise)))
}

/// Presence mask dropping `round(fraction · (len − 2))` frames uniformly
/// from index 2 on; the first two frames are always kept.
pub fn drop_mask(len: usize, fraction: f64, seed: u64) -> Vec<bool> {
    let mut keep = vec![true; len];
    if len <= 2 || fraction <= 0.0 {
        return keep;
    }
    let pool = len - 2;
    let n = ((fraction.min(1.0) * pool as f64).round() as usize).min(pool);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_labeled(seed, "drop"));
    for i in sample(&mut rng, pool, n) {
        keep[i + 2] = false;
    }
    keep
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    /// Per-axis bound of the initial translation noise, meters.
    pub init_noise: f64,
    pub drop_fraction: f64,
    pub track: TrackConfig,
    pub icp: IcpConfig,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { init_noise: 0.02, drop_fraction: 0.0, track: TrackConfig::default(), icp: IcpConfig::default(), seed: 0 }
    }
}

pub enum Method<'a> {
    Learned(&'a Model),
    Oracle(CropParams),
    Icp(CropParams),
}

impl Method<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Learned(_) => "6pack",
            Method::Oracle(_) => "oracle",
            Method::Icp(_) => "icp",
        }
    }
}

/// Tracks every sequence; sequence `i` uses seed `derive(seed, i)` for its
/// start noise, dropout and crops.
pub fn run_method(
    method: &Method,
    spec: &CategorySpec,
    sequences: &[Sequence],
    config: &BenchConfig,
) -> Result<Vec<Vec<TrackedPose>>> {
    sequences
        .par_iter()
        .enumerate()
        .map(|(i, seq)| {
            let seed = derive(config.seed, i as u64);
            let p0 = initial_pose(seq, config.init_noise, seed)?;
            let mask = drop_mask(seq.frames.len(), config.drop_fraction, seed);
            let frames: Vec<Option<&Frame>> = seq.frames.iter().zip(&mask).map(|(f, &k)| k.then_some(f)).collect();
            let track = TrackConfig { seed: derive_labeled(seed, "track"), ..config.track.clone() };
            match method {
                Method::Learned(model) => track_sequence(&LearnedKeypoints { model }, &frames, &p0, &track),
                Method::Oracle(crop) => track_sequence(&OracleKeypoints::new(spec.extent, crop.clone()), &frames, &p0, &track),
                Method::Icp(crop) => icp_track_sequence(&frames, &p0, &spec.extent, crop, &config.icp, track.seed),
            }
        })
        .collect()
}

pub fn score_sequence(estimates: &[TrackedPose], seq: &Sequence, spec: &CategorySpec) -> Result<Vec<FrameScore>> {
    if estimates.len() != seq.frames.len() {
        return Err(Error::LengthMismatch(estimates.len(), seq.frames.len()));
    }
    let axis = spec.symmetric.then_some(spec.axis);
    estimates
        .iter()
        .zip(&seq.frames)
        .map(|(e, f)| FrameScore::evaluate(&e.pose, &f.gt_pose, axis.as_ref(), &spec.extent))
        .collect()
}

/// Trains one model per keypoint count and evaluates it on `test`.
pub fn k_ablation(
    ks: &[usize],
    spec: &CategorySpec,
    train: &[Sequence],
    test: &[Sequence],
    model: &ModelConfig,
    trainer: &TrainConfig,
    bench: &BenchConfig,
) -> Result<Vec<(usize, Option<Metrics>)>> {
    ks.iter()
        .map(|&k| {
            let cfg = ModelConfig { keypoints: k, ..model.clone() };
            let m = Model::new(cfg, spec.into(), derive_labeled(trainer.seed, "init"))?;
            let mut t = Trainer::new(m, trainer.clone())?;
            t.run(train, trainer.steps, |_, _| Ok(()))?;
            let tracks = run_method(&Method::Learned(&t.model), spec, test, bench)?;
            let mut scores = Vec::new();
            for (est, seq) in tracks.iter().zip(test) {
                scores.extend(score_sequence(est, seq, spec)?);
            }
            Ok((k, Metrics::from_scores(&scores)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{gen_sequence, SequenceParams};

    #[test]
    fn drop_mask_properties() {
        let m = drop_mask(100, 0.15, 3);
        assert_eq!(m.iter().filter(|&&k| !k).count(), 15);
        assert!(m[0] && m[1]);
        assert_eq!(m, drop_mask(100, 0.15, 3));
        assert_ne!(m, drop_mask(100, 0.15, 4));
        assert!(drop_mask(10, 0.0, 1).iter().all(|&k| k));
    }

    #[test]
    fn init_noise_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(init_noise(&mut rng, 0.02).amax() <= 0.02);
        }
        assert_eq!(init_noise(&mut rng, 0.0), Vec3::zeros());
    }

    #[test]
    fn oracle_method_is_exact_without_noise() {
        let spec = CategorySpec::builtin("mug").unwrap();
        let seqs: Vec<Sequence> =
            (0..2).map(|i| gen_sequence(&spec, i, &SequenceParams { length: 15, ..SequenceParams::default() }, i)).collect();
        let cfg = BenchConfig { init_noise: 0.0, ..BenchConfig::default() };
        let out = run_method(&Method::Oracle(CropParams::default()), &spec, &seqs, &cfg).unwrap();
        for (est, seq) in out.iter().zip(&seqs) {
            let m = Metrics::from_scores(&score_sequence(est, seq, &spec).unwrap()).unwrap();
            assert_eq!((m.five_deg_five_cm, m.iou25), (100.0, 100.0));
            assert!(m.t_err_mean < 1e-9);
        }
        assert!(matches!(score_sequence(&out[0][..3], &seqs[0], &spec), Err(Error::LengthMismatch(3, 15))));
    }
}
