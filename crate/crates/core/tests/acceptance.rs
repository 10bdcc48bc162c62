//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! stderr, bypassing output capture, and then asserts.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sixpack_core::encode::CropParams;
use sixpack_core::eval::{
    ablation_table, k_ablation, mean_errors, metric_5deg5cm, metric_iou25, run_method, score_sequence, BenchConfig,
    Method, Metrics,
};
use sixpack_core::geometry::{least_squares_align, rotation_error, Pose, Rotation, SymmetryAxis, Vec3};
use sixpack_core::keypoint::losses::{rotation_distance, sym_mvc_loss};
use sixpack_core::model::{CategoryInfo, Model, ModelConfig};
use sixpack_core::nn::real::V3;
use sixpack_core::seed::{derive, derive_labeled};
use sixpack_core::synthdata::{
    constant_velocity_trajectory, gen_instance, gen_sequence, render_sequence, start_pose, CategorySpec, Frame,
    RenderParams, Sequence, SequenceParams,
};
use sixpack_core::tracker::{track_sequence, LearnedKeypoints, OracleKeypoints, TrackConfig, Tracker};
use sixpack_core::train::{TrainConfig, Trainer};
use sixpack_core::verify::loss_gradient_errors;

fn report(name: &str, pass: bool, detail: &str) {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::new(Rotation::random(rng), Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)))
}

/// Relative rotation angle through quaternions, independent of the matrix
/// trace formula.
fn quat_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let qa = UnitQuaternion::from_matrix(a);
    let qb = UnitQuaternion::from_matrix(b);
    qa.angle_to(&qb)
}

#[test]
fn alignment_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let problems: Vec<(Vec<Vec3>, Pose)> = (0..1000)
        .map(|_| {
            let src: Vec<Vec3> = (0..8).map(|_| Vec3::from_fn(|_, _| rng.random_range(-0.3..0.3))).collect();
            (src, random_pose(&mut rng))
        })
        .collect();
    let start = Instant::now();
    let (mut worst_r, mut worst_t) = (0.0f64, 0.0f64);
    for (src, truth) in &problems {
        let dst: Vec<Vec3> = src.iter().map(|p| truth.transform_point(p)).collect();
        let est = least_squares_align(src, &dst).expect("well-posed problem");
        worst_r = worst_r.max(quat_angle(est.rotation.matrix(), truth.rotation.matrix()));
        worst_t = worst_t.max((est.translation - truth.translation).norm());
    }
    let elapsed = start.elapsed();
    report(
        "alignment_exactness",
        worst_r < 1e-9 && worst_t < 1e-9 && elapsed < Duration::from_secs(1),
        &format!("max rotation {worst_r:.2e} rad, translation {worst_t:.2e} m, {:.1} ms", elapsed.as_secs_f64() * 1e3),
    );
}

#[test]
fn rotation_metric_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = Rotation::random(&mut rng);
        let b = Rotation::random(&mut rng);
        let geodesic = quat_angle(a.matrix(), b.matrix());
        let m = a.matrix();
        let rows: [[f64; 3]; 3] = std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]));
        let chordal = rotation_distance(&rows, b.matrix());
        let closed = 2.0 * ((a.matrix() - b.matrix()).norm() / (2.0 * SQRT_2)).min(1.0).asin();
        worst = worst.max((chordal - geodesic).abs()).max((closed - geodesic).abs());
        worst = worst.max((rotation_error(&a, &b) - geodesic).abs());
    }
    report("rotation_metric_identity", worst < 1e-6, &format!("max deviation {worst:.2e} rad over 1000 pairs"));
}

#[test]
fn loss_gradient_fidelity() {
    let errs = loss_gradient_errors(20, 13);
    let worst = errs.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let detail: Vec<String> = errs.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    report("loss_gradient_fidelity", errs.iter().all(|(_, e)| *e < 1e-4), &format!("max {worst:.2e} ({})", detail.join(", ")));
}

#[test]
fn symmetry_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let axis = SymmetryAxis::new(Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0))).expect("nonzero axis");
        let frame = random_pose(&mut rng);
        let delta = Pose::new(Rotation::random_small(&mut rng, 0.5), Vec3::from_fn(|_, _| rng.random_range(-0.05..0.05)));
        let pts = |rng: &mut ChaCha8Rng| -> Vec<V3<f64>> {
            (0..8)
                .map(|_| frame.transform_point(&Vec3::from_fn(|_, _| rng.random_range(-0.15..0.15))).into())
                .collect()
        };
        let prev = pts(&mut rng);
        let curr = pts(&mut rng);
        // Spin the current set about the symmetry axis of the object frame.
        let world_axis = frame.rotation.apply(axis.direction());
        let spin = Rotation::from_axis_angle(&world_axis, rng.random_range(0.0..2.0 * PI));
        let spun: Vec<V3<f64>> = curr
            .iter()
            .map(|p| {
                let v = Vec3::from(*p) - frame.translation;
                (spin.apply(&v) + frame.translation).into()
            })
            .collect();
        let a = sym_mvc_loss(&curr, &prev, &delta, &axis, &frame);
        let b = sym_mvc_loss(&spun, &prev, &delta, &axis, &frame);
        worst = worst.max((a - b).abs());
    }
    report("symmetry_invariance", worst < 1e-9, &format!("max loss change {worst:.2e} over 100 spins"));
}

#[test]
fn oracle_tracking_exactness() {
    let mut worst = 0.0f64;
    let mut runs = 0;
    for (i, name) in ["camera", "laptop", "mug", "bowl"].iter().enumerate() {
        let spec = CategorySpec::builtin(name).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15 + i as u64);
        let start = start_pose(&mut rng);
        let axis = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let delta = Pose::new(
            Rotation::from_axis_angle(&axis, rng.random_range(0.0..0.05)),
            Vec3::from_fn(|_, _| rng.random_range(-0.004..0.004)),
        );
        let poses = constant_velocity_trajectory(&start, &delta, 100);
        let seq = render_sequence(&gen_instance(&spec, i as u64), &poses, &RenderParams::default(), i as u64);
        let oracle = OracleKeypoints::new(spec.extent, CropParams::default());
        for drop in [0.0, 0.15] {
            let mask = sixpack_core::eval::drop_mask(100, drop, 100 + i as u64);
            let frames: Vec<Option<&Frame>> = seq.frames.iter().zip(&mask).map(|(f, &k)| k.then_some(f)).collect();
            let out = track_sequence(&oracle, &frames, &start, &TrackConfig::default()).expect("oracle tracks");
            assert_eq!(out.len(), 100);
            worst = out.iter().zip(&poses).map(|(o, p)| o.pose.max_abs_diff(p)).fold(worst, f64::max);
            runs += 1;
        }
    }
    report("oracle_tracking_exactness", worst < 1e-9, &format!("max entry deviation {worst:.2e} over {runs} runs, 15% drops in half"));
}

/// Held-out evaluation split shared by the learning checks.
fn test_split(spec: &CategorySpec, count: usize, length: usize) -> Vec<Sequence> {
    let params = SequenceParams {
        length,
        motion_scale: 1.0,
        render: RenderParams { occlusion: 0.4, noise_sigma: 0.002, clutter_points: 50 },
    };
    (0..count).map(|i| gen_sequence(spec, 100_000 + i as u64, &params, derive_labeled(7, "test") ^ i as u64)).collect()
}

fn train_split(spec: &CategorySpec, count: usize, length: usize) -> Vec<Sequence> {
    let params = SequenceParams {
        length,
        motion_scale: 1.0,
        render: RenderParams { occlusion: 0.3, noise_sigma: 0.002, clutter_points: 50 },
    };
    (0..count).map(|i| gen_sequence(spec, i as u64, &params, derive(derive_labeled(7, "train"), i as u64))).collect()
}

fn evaluate(method: &Method, spec: &CategorySpec, test: &[Sequence], bench: &BenchConfig) -> Metrics {
    let tracks = run_method(method, spec, test, bench).expect("tracking runs");
    let mut scores = Vec::new();
    for (est, seq) in tracks.iter().zip(test) {
        scores.extend(score_sequence(est, seq, spec).expect("lengths match"));
    }
    Metrics::from_scores(&scores).expect("frames scored")
}

#[test]
fn learning_smoke_test() {
    let bench = BenchConfig { init_noise: 0.02, seed: 21, ..BenchConfig::default() };
    let mut lines = Vec::new();
    let mut pass = true;
    for name in ["bowl", "laptop"] {
        let spec = CategorySpec::builtin(name).unwrap();
        let train = train_split(&spec, 16, 40);
        let test = test_split(&spec, 5, 100);
        let cfg = TrainConfig { steps: 2000, seed: 22, ..TrainConfig::desk_scale() };
        let model = Model::new(ModelConfig::default(), CategoryInfo::from(&spec), 23).unwrap();
        let mut trainer = Trainer::new(model, cfg.clone()).unwrap();
        let start = Instant::now();
        trainer.run(&train, cfg.steps, |_, _| Ok(())).expect("training stays finite");
        let minutes = start.elapsed().as_secs_f64() / 60.0;

        let crop = trainer.model.config.crop_params();
        let learned = evaluate(&Method::Learned(&trainer.model), &spec, &test, &bench);
        let icp = evaluate(&Method::Icp(crop), &spec, &test, &bench);
        let lost = 100.0 - learned.iou25;
        let ok = learned.t_err_mean < 3.0 && lost < 20.0 && learned.t_err_mean < icp.t_err_mean && minutes <= 30.0;
        pass &= ok;
        lines.push(format!(
            "{name}: learned T_err {:.2} cm, lost {lost:.1}%, ICP T_err {:.2} cm, training {minutes:.1} min",
            learned.t_err_mean, icp.t_err_mean
        ));
    }
    report("learning_smoke_test", pass, &lines.join("; "));
}

#[test]
fn keypoint_count_ablation() {
    let spec = CategorySpec::builtin("mug").unwrap();
    let train = train_split(&spec, 4, 8);
    let test = test_split(&spec, 2, 20);
    let trainer = TrainConfig { steps: 20, batch: 4, seed: 31, ..TrainConfig::desk_scale() };
    let bench = BenchConfig { seed: 32, ..BenchConfig::default() };
    let rows = k_ablation(&[4, 8, 16], &spec, &train, &test, &ModelConfig::default(), &trainer, &bench).expect("ablation runs");
    let table = ablation_table(&rows);
    let complete = rows.iter().map(|(k, m)| (*k, m.is_some())).collect::<Vec<_>>() == [(4, true), (8, true), (16, true)];
    let rows_in_table = ["4", "8", "16"].iter().all(|k| table.lines().any(|l| l.trim_start().starts_with(k)));
    report("keypoint_count_ablation", complete && rows_in_table, &format!("table:\n{table}"));
}

/// Exact IoU of two equal boxes sharing an orientation, offset by `d` in the
/// box frame.
fn aligned_box_iou(extent: &Vec3, d: &Vec3) -> f64 {
    let inter: f64 = (0..3).map(|k| (extent[k] - d[k].abs()).max(0.0)).product();
    let vol = extent.x * extent.y * extent.z;
    inter / (2.0 * vol - inter)
}

#[test]
fn metric_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let extent = Vec3::new(0.2, 0.12, 0.16);
    let mut sets = 0;
    for trial in 0..50 {
        let axis = (trial % 2 == 1).then(|| SymmetryAxis::new(Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0))).unwrap());
        let n = rng.random_range(5..30);
        let (mut truths, mut ests, mut ious) = (Vec::new(), Vec::new(), Vec::new());
        while truths.len() < n {
            let t = random_pose(&mut rng);
            if rng.random_bool(0.5) {
                // Same orientation, offset in the box frame: IoU known exactly.
                let d = Vec3::from_fn(|k, _| rng.random_range(-0.6..0.6) * extent[k]);
                let iou = aligned_box_iou(&extent, &d);
                if (iou - 0.25).abs() < 0.03 {
                    continue;
                }
                ests.push(Pose::new(t.rotation, t.translation + t.rotation.apply(&d)));
                ious.push(iou);
            } else {
                // Far apart: the boxes cannot meet.
                let max_angle = rng.random_range(0.0..0.3);
                let r = Rotation::random_small(&mut rng, max_angle) * t.rotation;
                let far = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize() * (extent.norm() * 1.1);
                ests.push(Pose::new(r, t.translation + far));
                ious.push(0.0);
            }
            truths.push(t);
        }
        let (mut ok5, mut sum_r, mut sum_t, mut ok_iou) = (0usize, 0.0, 0.0, 0usize);
        for ((e, t), iou) in ests.iter().zip(&truths).zip(&ious) {
            let r_deg = match &axis {
                Some(a) => {
                    let u = e.rotation.apply(a.direction());
                    let v = t.rotation.apply(a.direction());
                    u.cross(&v).norm().atan2(u.dot(&v)).to_degrees()
                }
                None => quat_angle(e.rotation.matrix(), t.rotation.matrix()).to_degrees(),
            };
            let t_cm = 100.0 * (e.translation - t.translation).norm();
            ok5 += (r_deg < 5.0 && t_cm < 5.0) as usize;
            ok_iou += (*iou > 0.25) as usize;
            sum_r += r_deg;
            sum_t += t_cm;
        }
        let pct = |k: usize| 100.0 * k as f64 / n as f64;
        let (r, t) = mean_errors(&ests, &truths, axis.as_ref()).unwrap();
        let agree = metric_5deg5cm(&ests, &truths, axis.as_ref()).unwrap() == pct(ok5)
            && metric_iou25(&ests, &truths, &extent).unwrap() == pct(ok_iou)
            && (r - sum_r / n as f64).abs() < 1e-9
            && (t - sum_t / n as f64).abs() < 1e-9;
        if !agree {
            report("metric_correctness", false, &format!("set {trial} disagrees with the brute-force reference"));
        }
        sets += 1;
    }
    // Unit cubes offset by half a side overlap in a third of their union.
    let half = Pose::from_translation(Vec3::new(0.5, 0.0, 0.0));
    let third = metric_iou25(&[half], &[Pose::identity()], &Vec3::repeat(1.0)).unwrap();
    report("metric_correctness", third == 100.0, &format!("{sets} sets agree; 1/3-overlap case counted as success"));
}

#[test]
fn inference_throughput() {
    let spec = CategorySpec::builtin("laptop").unwrap();
    let cfg = ModelConfig { keypoints: 8, grid: 5, max_points: 512, ..ModelConfig::default() };
    let model = Model::new(cfg, CategoryInfo::from(&spec), 51).unwrap();
    let params = SequenceParams {
        length: 12,
        motion_scale: 1.0,
        render: RenderParams { occlusion: 0.0, noise_sigma: 0.002, clutter_points: 50 },
    };
    let seq = gen_sequence(&spec, 1, &params, 52);
    assert!(seq.frames.iter().all(|f| f.points.len() >= 512), "frames must fill a 512-point crop");
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let source = LearnedKeypoints { model: &model };
    let (worst, mean) = pool.install(|| {
        let mut tracker = Tracker::new(&source, TrackConfig::default());
        tracker.initialize(&seq.frames[0], &seq.frames[0].gt_pose).unwrap();
        let mut times = Vec::new();
        for f in &seq.frames[1..] {
            let start = Instant::now();
            tracker.step(Some(f)).unwrap();
            times.push(start.elapsed().as_secs_f64() * 1e3);
        }
        (times.iter().cloned().fold(0.0, f64::max), times.iter().sum::<f64>() / times.len() as f64)
    });
    report("inference_throughput", worst < 100.0, &format!("track step mean {mean:.1} ms, max {worst:.1} ms on one thread"));
}
