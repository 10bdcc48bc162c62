//! Tracking metrics, the ICP baseline, reports and benchmark harnesses.

mod bench;
mod icp;
mod report;

pub use bench::{
    drop_mask, init_noise, initial_pose, k_ablation, run_method, score_sequence, BenchConfig, Method,
};
pub use icp::{icp_baseline, icp_track_sequence, IcpConfig, IcpResult, PointGrid};
pub use report::{ablation_table, emit_report, parse_report, MetricReport, Metrics, ReportRow, REPORT_FORMAT};

use crate::error::{Error, Result};
use crate::geometry::{axis_rotation_error, box_iou, rotation_error, OrientedBox3, Pose, SymmetryAxis, Vec3};

pub const SUCCESS_DEG: f64 = 5.0;
pub const SUCCESS_CM: f64 = 5.0;
pub const IOU_THRESHOLD: f64 = 0.25;
pub const IOU_SAMPLES: usize = 20_000;

/// Errors of one estimated pose against the truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameError {
    pub r_deg: f64,
    pub t_cm: f64,
}

/// Orientation error is the geodesic angle, or for symmetric categories the
/// angle between the estimated and true symmetry axes.
pub fn frame_error(estimate: &Pose, truth: &Pose, symmetry: Option<&SymmetryAxis>) -> Result<FrameError> {
    let t_cm = 100.0 * (estimate.translation - truth.translation).norm();
    let r = match symmetry {
        Some(axis) => axis_rotation_error(&estimate.rotation.apply(axis.direction()), &truth.rotation.apply(axis.direction()))?,
        None => rotation_error(&estimate.rotation, &truth.rotation),
    };
    Ok(FrameError { r_deg: r.to_degrees(), t_cm })
}

/// `err < threshold`; an exact estimate passes any threshold.
fn within(err: f64, threshold: f64) -> bool {
    err < threshold || err == 0.0
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(Error::DegenerateInput("no frames to evaluate".into()));
    }
    Ok(())
}

fn errors(estimates: &[Pose], truths: &[Pose], symmetry: Option<&SymmetryAxis>) -> Result<Vec<FrameError>> {
    check_lengths(estimates.len(), truths.len())?;
    estimates.iter().zip(truths).map(|(e, t)| frame_error(e, t, symmetry)).collect()
}

fn percent(successes: usize, total: usize) -> f64 {
    100.0 * successes as f64 / total as f64
}

/// Percentage of frames with orientation error below `max_deg` and
/// translation error below `max_cm`.
pub fn success_rate(
    estimates: &[Pose],
    truths: &[Pose],
    symmetry: Option<&SymmetryAxis>,
    max_deg: f64,
    max_cm: f64,
) -> Result<f64> {
    let errs = errors(estimates, truths, symmetry)?;
    let ok = errs.iter().filter(|e| within(e.r_deg, max_deg) && within(e.t_cm, max_cm)).count();
    Ok(percent(ok, errs.len()))
}

pub fn metric_5deg5cm(estimates: &[Pose], truths: &[Pose], symmetry: Option<&SymmetryAxis>) -> Result<f64> {
    success_rate(estimates, truths, symmetry, SUCCESS_DEG, SUCCESS_CM)
}

/// IoU of boxes with full side lengths `extent` placed at the two poses.
pub fn pose_iou(estimate: &Pose, truth: &Pose, extent: &Vec3) -> Result<f64> {
    let half = extent / 2.0;
    Ok(box_iou(&OrientedBox3::new(*estimate, half)?, &OrientedBox3::new(*truth, half)?, IOU_SAMPLES))
}

pub fn metric_iou25(estimates: &[Pose], truths: &[Pose], extent: &Vec3) -> Result<f64> {
    check_lengths(estimates.len(), truths.len())?;
    let mut ok = 0;
    for (e, t) in estimates.iter().zip(truths) {
        if pose_iou(e, t, extent)? > IOU_THRESHOLD {
            ok += 1;
        }
    }
    Ok(percent(ok, estimates.len()))
}

/// Mean orientation error in degrees and mean translation error in cm.
pub fn mean_errors(estimates: &[Pose], truths: &[Pose], symmetry: Option<&SymmetryAxis>) -> Result<(f64, f64)> {
    let errs = errors(estimates, truths, symmetry)?;
    let n = errs.len() as f64;
    Ok((errs.iter().map(|e| e.r_deg).sum::<f64>() / n, errs.iter().map(|e| e.t_cm).sum::<f64>() / n))
}

/// `(x, mean success over frames x..end)` in percent, for every start x.
pub fn stability_curve(flags: &[bool]) -> Vec<(usize, f64)> {
    let mut out = vec![(0, 0.0); flags.len()];
    let mut hits = 0;
    for (x, &f) in flags.iter().enumerate().rev() {
        hits += f as usize;
        out[x] = (x, percent(hits, flags.len() - x));
    }
    out
}

/// Stability curves averaged over sequences; each x averages the sequences
/// that are longer than x.
pub fn mean_stability_curve(flags: &[Vec<bool>]) -> Vec<(usize, f64)> {
    let curves: Vec<_> = flags.iter().map(|f| stability_curve(f)).collect();
    let len = curves.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|x| {
            let vals: Vec<f64> = curves.iter().filter_map(|c| c.get(x).map(|p| p.1)).collect();
            (x, vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

/// All per-frame quantities the report needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameScore {
    pub r_deg: f64,
    pub t_cm: f64,
    pub iou: f64,
}

impl FrameScore {
    pub fn evaluate(estimate: &Pose, truth: &Pose, symmetry: Option<&SymmetryAxis>, extent: &Vec3) -> Result<Self> {
        let e = frame_error(estimate, truth, symmetry)?;
        Ok(Self { r_deg: e.r_deg, t_cm: e.t_cm, iou: pose_iou(estimate, truth, extent)? })
    }

    pub fn success(&self) -> bool {
        within(self.r_deg, SUCCESS_DEG) && within(self.t_cm, SUCCESS_CM)
    }

    pub fn tracked(&self) -> bool {
        self.iou > IOU_THRESHOLD
    }
}

/// Streaming counterpart of the batch metric functions.
#[derive(Clone, Debug)]
pub struct MetricAccumulator {
    symmetry: Option<SymmetryAxis>,
    extent: Vec3,
    frames: usize,
    successes: usize,
    tracked: usize,
    sum_r: f64,
    sum_t: f64,
}

impl MetricAccumulator {
    pub fn new(symmetry: Option<SymmetryAxis>, extent: Vec3) -> Self {
        Self { symmetry, extent, frames: 0, successes: 0, tracked: 0, sum_r: 0.0, sum_t: 0.0 }
    }

    pub fn push(&mut self, estimate: &Pose, truth: &Pose) -> Result<FrameScore> {
        let s = FrameScore::evaluate(estimate, truth, self.symmetry.as_ref(), &self.extent)?;
        self.push_score(&s);
        Ok(s)
    }

    pub fn push_score(&mut self, s: &FrameScore) {
        self.frames += 1;
        self.successes += s.success() as usize;
        self.tracked += s.tracked() as usize;
        self.sum_r += s.r_deg;
        self.sum_t += s.t_cm;
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn finish(&self) -> Option<Metrics> {
        (self.frames > 0).then(|| Metrics {
            five_deg_five_cm: percent(self.successes, self.frames),
            iou25: percent(self.tracked, self.frames),
            r_err_mean: self.sum_r / self.frames as f64,
            t_err_mean: self.sum_t / self.frames as f64,
        })
    }
}

impl Metrics {
    pub fn from_scores(scores: &[FrameScore]) -> Option<Self> {
        let mut acc = MetricAccumulator::new(None, Vec3::repeat(1.0));
        scores.iter().for_each(|s| acc.push_score(s));
        acc.finish()
    }
}
