//! Self-checks run by `sixpack check`: alignment and metric oracles, loss
//! gradients against finite differences, symmetry invariance and oracle
//! tracking.

use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encode::CropParams;
use crate::error::{Error, Result};
use crate::eval::{mean_errors, metric_5deg5cm, metric_iou25, pose_iou, stability_curve, MetricAccumulator};
use crate::geometry::{least_squares_align, rotation_error, Pose, Rotation, SymmetryAxis, Vec3};
use crate::keypoint::losses::{
    anchor_loss, cen_loss, mvc_loss, rotation_loss, sep_loss, sil_loss, sym_mvc_loss, sym_rot_loss, translation_loss,
};
use crate::nn::gradcheck::{check_gradient, ScalarFn};
use crate::nn::real::{sum, V3};
use crate::nn::Real;
use crate::synthdata::{constant_velocity_trajectory, gen_instance, render_sequence, CategorySpec, Frame, RenderParams};
use crate::tracker::{track_sequence, OracleKeypoints, TrackConfig};

/// Functions under test; swapped out to confirm a check can fail.
#[derive(Clone, Copy)]
pub struct Hooks {
    pub rotation_error: fn(&Rotation, &Rotation) -> f64,
}

impl Default for Hooks {
    fn default() -> Self {
        Self { rotation_error }
    }
}

fn skewed_rotation_error(a: &Rotation, b: &Rotation) -> f64 {
    rotation_error(a, b) * 1.001
}

impl Hooks {
    /// Hooks with the named function deliberately broken.
    pub fn corrupted(name: &str) -> Result<Self> {
        match name {
            "rotation_error" => Ok(Self { rotation_error: skewed_rotation_error }),
            other => Err(Error::DegenerateInput(format!("no corruption hook named {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

pub const CHECK_NAMES: [&str; 6] =
    ["alignment", "rotation_error", "loss_gradients", "symmetry_invariance", "metrics", "oracle_tracking"];

pub fn run_checks(hooks: &Hooks) -> Vec<CheckOutcome> {
    vec![
        check_alignment(),
        check_rotation_error(hooks),
        check_loss_gradients(),
        check_symmetry_invariance(),
        check_metrics(),
        check_oracle_tracking(),
    ]
}

fn random_points(rng: &mut ChaCha8Rng, k: usize, r: f64) -> Vec<Vec3> {
    (0..k).map(|_| Vec3::from_fn(|_, _| rng.random_range(-r..r))).collect()
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::new(Rotation::random(rng), Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)))
}

fn check_alignment() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_r, mut worst_t) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let src = random_points(&mut rng, 8, 0.2);
        let truth = random_pose(&mut rng);
        let dst: Vec<Vec3> = src.iter().map(|p| truth.transform_point(p)).collect();
        match least_squares_align(&src, &dst) {
            Ok(p) => {
                worst_r = worst_r.max(rotation_error(&p.rotation, &truth.rotation));
                worst_t = worst_t.max((p.translation - truth.translation).norm());
            }
            Err(e) => return outcome("alignment", false, e.to_string()),
        }
    }
    outcome("alignment", worst_r < 1e-9 && worst_t < 1e-9, format!("max rotation {worst_r:.2e} rad, translation {worst_t:.2e} m"))
}

fn check_rotation_error(hooks: &Hooks) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = Rotation::random(&mut rng);
        let b = Rotation::random(&mut rng);
        let rel = UnitQuaternion::from_matrix(&(a.matrix().transpose() * b.matrix()));
        worst = worst.max(((hooks.rotation_error)(&a, &b) - rel.angle()).abs());
    }
    outcome("rotation_error", worst < 1e-6, format!("max deviation from geodesic angle {worst:.2e} rad"))
}

fn unpack<S: Real>(x: &[S]) -> Vec<V3<S>> {
    x.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// Keypoint losses as functions of curr ++ prev flattened.
#[derive(Clone, Copy)]
enum PairLoss {
    Mvc,
    SymMvc,
    Tra,
    Rot,
    SymRot,
}

struct Pair {
    which: PairLoss,
    delta: Pose,
    frame: Pose,
}

impl ScalarFn for Pair {
    fn eval<S: Real>(&self, x: &[S]) -> S {
        let pts = unpack(x);
        let (c, p) = pts.split_at(pts.len() / 2);
        let axis = SymmetryAxis::y();
        match self.which {
            PairLoss::Mvc => mvc_loss(c, p, &self.delta),
            PairLoss::SymMvc => sym_mvc_loss(c, p, &self.delta, &axis, &self.frame),
            PairLoss::Tra => translation_loss(c, p, &self.delta),
            PairLoss::Rot => rotation_loss(c, p, &self.delta).unwrap_or_else(|_| x[0].lift(f64::NAN)),
            PairLoss::SymRot => sym_rot_loss(c, p, &self.frame.rotation.apply(axis.direction()), &self.delta)
                .unwrap_or_else(|_| x[0].lift(f64::NAN)),
        }
    }
}

enum SetLoss {
    Sep(f64),
    Sil(Vec<Vec3>),
    Cen(Vec3),
}

impl ScalarFn for SetLoss {
    fn eval<S: Real>(&self, x: &[S]) -> S {
        let k = unpack(x);
        match self {
            SetLoss::Sep(m) => sep_loss(&k, *m),
            SetLoss::Sil(obs) => sil_loss(&k, obs),
            SetLoss::Cen(c) => cen_loss(&k, c),
        }
    }
}

/// Anchor loss through the softmax over logits.
struct Anc(Vec<Vec3>, Vec3);

impl ScalarFn for Anc {
    fn eval<S: Real>(&self, x: &[S]) -> S {
        let m = x.iter().map(|v| v.value()).fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<S> = x.iter().map(|v| (*v - m).exp()).collect();
        let z = sum(&e);
        let c: Vec<S> = e.iter().map(|v| *v / z).collect();
        anchor_loss(&c, &self.0, &self.1)
    }
}

/// Largest relative gradient error per loss over `trials` random instances.
pub fn loss_gradient_errors(trials: usize, seed: u64) -> Vec<(&'static str, f64)> {
    const EPS: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = ["anc", "mvc", "tra", "rot", "sym_mvc", "sym_rot", "sep", "sil", "cen"];
    let mut worst = [0.0f64; 9];
    let anchors = crate::encode::build_anchor_grid(3);
    for _ in 0..trials {
        let frame = Pose::new(Rotation::random(&mut rng), Vec3::new(0.0, 0.0, 0.7));
        let prev: Vec<Vec3> = random_points(&mut rng, 8, 0.1).iter().map(|p| frame.transform_point(p)).collect();
        let delta = Pose::new(
            Rotation::random_small(&mut rng, 0.4),
            Vec3::new(0.02, -0.03, 0.01) * rng.random_range(-1.0..1.0),
        );
        let curr: Vec<Vec3> = prev
            .iter()
            .map(|p| delta.transform_point(p) + Vec3::from_fn(|_, _| rng.random_range(-0.02..0.02)))
            .collect();
        let x: Vec<f64> = curr.iter().chain(&prev).flat_map(|p| [p.x, p.y, p.z]).collect();
        let set = &x[..24];
        let logits: Vec<f64> = (0..27).map(|_| rng.random_range(-2.0..2.0)).collect();
        let o = Vec3::from_fn(|_, _| rng.random_range(-0.3..0.3));
        let obs: Vec<Vec3> = random_points(&mut rng, 40, 0.15).iter().map(|p| frame.transform_point(p)).collect();
        let errs = [
            check_gradient(&Anc(anchors.clone(), o), &logits, EPS),
            check_gradient(&Pair { which: PairLoss::Mvc, delta, frame }, &x, EPS),
            check_gradient(&Pair { which: PairLoss::Tra, delta, frame }, &x, EPS),
            check_gradient(&Pair { which: PairLoss::Rot, delta, frame }, &x, EPS),
            check_gradient(&Pair { which: PairLoss::SymMvc, delta, frame }, &x, EPS),
            check_gradient(&Pair { which: PairLoss::SymRot, delta, frame }, &x, EPS),
            check_gradient(&SetLoss::Sep(0.08), set, EPS),
            check_gradient(&SetLoss::Sil(obs), set, EPS),
            check_gradient(&SetLoss::Cen(Vec3::new(0.01, 0.02, 0.7)), set, EPS),
        ];
        for (w, c) in worst.iter_mut().zip(errs) {
            *w = if c.relative_error.is_finite() { w.max(c.relative_error) } else { f64::INFINITY };
        }
    }
    names.into_iter().zip(worst).collect()
}

fn check_loss_gradients() -> CheckOutcome {
    let errs = loss_gradient_errors(20, 3);
    let failing: Vec<String> = errs.iter().filter(|(_, e)| !(*e < 1e-4)).map(|(n, e)| format!("{n} {e:.2e}")).collect();
    let worst = errs.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let detail = if failing.is_empty() { format!("max relative error {worst:.2e}") } else { failing.join(", ") };
    outcome("loss_gradients", failing.is_empty(), detail)
}

fn check_symmetry_invariance() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let axis = SymmetryAxis::y();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let frame = Pose::new(Rotation::random(&mut rng), Vec3::new(0.0, 0.0, 0.7));
        let delta = Pose::new(Rotation::random_small(&mut rng, 0.3), Vec3::from_fn(|_, _| rng.random_range(-0.03..0.03)));
        let prev: Vec<V3<f64>> =
            random_points(&mut rng, 8, 0.1).iter().map(|p| frame.transform_point(p).into()).collect();
        let curr: Vec<V3<f64>> = random_points(&mut rng, 8, 0.1).iter().map(|p| frame.transform_point(p).into()).collect();
        let alpha = rng.random_range(0.0..std::f64::consts::TAU);
        let spin = frame * Pose::from_rotation(Rotation::ry(alpha)) * frame.inverse();
        let spun: Vec<V3<f64>> = curr.iter().map(|p| spin.transform_point(&Vec3::from(*p)).into()).collect();
        let a = sym_mvc_loss(&curr, &prev, &delta, &axis, &frame);
        let b = sym_mvc_loss(&spun, &prev, &delta, &axis, &frame);
        worst = worst.max((a - b).abs());
    }
    outcome("symmetry_invariance", worst < 1e-9, format!("max change {worst:.2e}"))
}

fn check_metrics() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ext = Vec3::new(0.2, 0.1, 0.15);
    for trial in 0..50 {
        let n = rng.random_range(1..20);
        let truths: Vec<Pose> = (0..n).map(|_| random_pose(&mut rng)).collect();
        let ests: Vec<Pose> = truths
            .iter()
            .map(|p| {
                let a = rng.random_range(0.0..0.3);
                Pose::new(Rotation::random_small(&mut rng, a) * p.rotation, p.translation + Vec3::from_fn(|_, _| rng.random_range(-0.08..0.08)))
            })
            .collect();
        let axis = (trial % 2 == 0).then(SymmetryAxis::y);
        let mut acc = MetricAccumulator::new(axis, ext);
        let mut flags = Vec::new();
        for (e, t) in ests.iter().zip(&truths) {
            match acc.push(e, t) {
                Ok(s) => flags.push(s.success()),
                Err(e) => return outcome("metrics", false, e.to_string()),
            }
        }
        let m = acc.finish().expect("nonempty");
        let batch = (|| -> Result<bool> {
            let (r, t) = mean_errors(&ests, &truths, axis.as_ref())?;
            Ok(m.five_deg_five_cm == metric_5deg5cm(&ests, &truths, axis.as_ref())?
                && m.iou25 == metric_iou25(&ests, &truths, &ext)?
                && m.r_err_mean == r
                && m.t_err_mean == t
                && stability_curve(&flags)[0].1 == m.five_deg_five_cm)
        })();
        if !matches!(batch, Ok(true)) {
            return outcome("metrics", false, format!("streaming and batch disagree on set {trial}"));
        }
    }
    let shifted = Pose::from_translation(Vec3::new(0.5, 0.0, 0.0));
    let iou = pose_iou(&shifted, &Pose::identity(), &Vec3::repeat(1.0)).unwrap_or(f64::NAN);
    outcome("metrics", (iou - 1.0 / 3.0).abs() < 0.02 && iou > 0.25, format!("50 sets agree; half-offset cube IoU {iou:.4}"))
}

fn check_oracle_tracking() -> CheckOutcome {
    let spec = CategorySpec::builtin("camera").expect("builtin category");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let start = crate::synthdata::start_pose(&mut rng);
    let delta = Pose::new(Rotation::from_axis_angle(&Vec3::new(0.3, 1.0, 0.2), 0.03), Vec3::new(0.002, 0.001, -0.001));
    let poses = constant_velocity_trajectory(&start, &delta, 100);
    let seq = render_sequence(&gen_instance(&spec, 1), &poses, &RenderParams::default(), 2);
    let mask = crate::eval::drop_mask(100, 0.15, 7);
    let frames: Vec<Option<&Frame>> = seq.frames.iter().zip(&mask).map(|(f, &k)| k.then_some(f)).collect();
    let oracle = OracleKeypoints::new(spec.extent, CropParams::default());
    match track_sequence(&oracle, &frames, &start, &TrackConfig::default()) {
        Ok(out) => {
            let worst = out.iter().zip(&poses).map(|(o, p)| o.pose.max_abs_diff(p)).fold(0.0, f64::max);
            outcome("oracle_tracking", worst < 1e-9, format!("max entry deviation {worst:.2e} with 15 dropped frames"))
        }
        Err(e) => outcome("oracle_tracking", false, e.to_string()),
    }
}
