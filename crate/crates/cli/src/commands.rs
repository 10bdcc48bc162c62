use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sixpack_core::encode::CropParams;
use sixpack_core::eval::{
    emit_report, mean_stability_curve, run_method, score_sequence, FrameScore, Method, MetricReport,
};
use sixpack_core::model::{CategoryInfo, Checkpoint, Model};
use sixpack_core::seed::{derive, derive_labeled};
use sixpack_core::synthdata::{gen_sequence, load_dataset, save_dataset, Dataset, SequenceParams};
use sixpack_core::train::{write_log, StepLog, Trainer};
use sixpack_core::trajectory::{load_trajectory, save_trajectory, Trajectory};
use sixpack_core::verify::{run_checks, Hooks};

use crate::config::RunConfig;
use crate::CliError;

/// Environment variable naming a function to corrupt in `check`.
pub const CORRUPT_ENV: &str = "SIXPACK_CORRUPT";

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn pick<'a>(cfg: &'a RunConfig, only: &'a [String]) -> Result<&'a [String], CliError> {
    if only.is_empty() {
        return Ok(&cfg.categories);
    }
    for c in only {
        cfg.spec(c)?;
    }
    Ok(only)
}

pub fn gen_data(cfg: &RunConfig) -> Result<(), CliError> {
    create_dir(&cfg.data.dir)?;
    let d = &cfg.data;
    for cat in &cfg.categories {
        let spec = cfg.spec(cat)?;
        let splits = [
            ("train", d.train_sequences, d.train_length, d.train_instance_base, &d.train_render),
            ("test", d.test_sequences, d.test_length, d.test_instance_base, &d.test_render),
        ];
        for (split, count, length, base, render) in splits {
            let seed = derive_labeled(cfg.seed, &format!("data/{cat}/{split}"));
            let params = SequenceParams { length, motion_scale: d.motion_scale, render: render.clone() };
            let sequences = (0..count)
                .map(|i| gen_sequence(&spec, base + i as u64, &params, derive(seed, i as u64)))
                .collect();
            let path = cfg.dataset_path(cat, split);
            save_dataset(&path, &Dataset { category: cat.clone(), seed, sequences })?;
            println!("wrote {} ({count} sequences)", path.display());
        }
    }
    Ok(())
}

fn load_nonempty(path: &Path) -> Result<Dataset, CliError> {
    let meta = fs::metadata(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if meta.len() == 0 {
        return Err(CliError::Usage(format!("{} is empty", path.display())));
    }
    let ds = load_dataset(path).map_err(|e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if ds.sequences.is_empty() || ds.sequences.iter().any(|s| s.frames.is_empty()) {
        return Err(CliError::Usage(format!("{} holds no frames", path.display())));
    }
    Ok(ds)
}

fn checkpoint_name(step: u64) -> String {
    format!("checkpoint-{step:06}.json")
}

/// The checkpoint with the highest step in `dir`.
fn latest_checkpoint(dir: &Path) -> Result<Option<PathBuf>, CliError> {
    let Ok(entries) = fs::read_dir(dir) else { return Ok(None) };
    let mut best: Option<(u64, PathBuf)> = None;
    for e in entries {
        let path = e.map_err(|e| CliError::Io(e.to_string()))?.path();
        let step = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("checkpoint-")?.strip_suffix(".json")?.parse::<u64>().ok());
        if let Some(s) = step {
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, path));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

/// Rewrites the loss log keeping rows up to `step`.
fn truncate_log(path: &Path, step: u64) -> Result<(), CliError> {
    let text = fs::read_to_string(path).unwrap_or_default();
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        let keep = i == 0 || line.split(',').next().and_then(|s| s.parse::<u64>().ok()).is_some_and(|s| s <= step);
        if keep {
            out.push_str(line);
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn train(cfg: &RunConfig, only: &[String], resume: bool, until: Option<u64>) -> Result<(), CliError> {
    let stop = until.unwrap_or(cfg.train.steps).min(cfg.train.steps);
    for cat in pick(cfg, only)? {
        let spec = cfg.spec(cat)?;
        let data = load_nonempty(&cfg.dataset_path(cat, "train"))?;
        let dir = cfg.run_dir(cat);
        create_dir(&dir)?;
        let log_path = dir.join("loss.csv");
        let mut trainer = match resume.then(|| latest_checkpoint(&dir)).transpose()?.flatten() {
            Some(path) => {
                let t = Trainer::from_checkpoint(Checkpoint::load(&path)?, cfg.train.clone())?;
                truncate_log(&log_path, t.step_count())?;
                println!("{cat}: resuming from {} at step {}", path.display(), t.step_count());
                t
            }
            None => {
                let model = Model::new(cfg.model.clone(), CategoryInfo::from(&spec), derive_labeled(cfg.seed, "init"))?;
                fs::write(&log_path, format!("{}\n", StepLog::csv_header()))
                    .map_err(|e| CliError::Io(format!("{}: {e}", log_path.display())))?;
                Trainer::new(model, cfg.train.clone())?
            }
        };
        let mut log = fs::OpenOptions::new()
            .append(true)
            .open(&log_path)
            .map_err(|e| CliError::Io(format!("{}: {e}", log_path.display())))?;
        let every = cfg.train.checkpoint_every;
        let start = Instant::now();
        trainer.run(&data.sequences, stop, |step, t| {
            write_log(&mut log, std::slice::from_ref(step), false)?;
            if (every > 0 && step.step % every == 0) || step.step == stop {
                t.checkpoint().save(&dir.join(checkpoint_name(step.step)))?;
                println!("{cat}: step {} total {:.5} ({:.1}s)", step.step, step.total, start.elapsed().as_secs_f64());
            }
            Ok(())
        })?;
        log.flush().map_err(|e| CliError::Io(e.to_string()))?;
        if trainer.step_count() < cfg.train.steps {
            println!("{cat}: stopped at step {}", trainer.step_count());
            continue;
        }
        trainer.checkpoint().save(&cfg.model_path(cat))?;
        println!("{cat}: wrote {}", cfg.model_path(cat).display());
    }
    Ok(())
}

pub struct TrackArgs<'a> {
    pub method: &'a str,
    pub categories: &'a [String],
    pub checkpoint: Option<&'a Path>,
    pub data: Option<&'a Path>,
    pub out: Option<&'a Path>,
}

pub fn track(cfg: &RunConfig, args: &TrackArgs) -> Result<(), CliError> {
    let cats = pick(cfg, args.categories)?;
    if cats.len() > 1 && (args.checkpoint.is_some() || args.data.is_some() || args.out.is_some()) {
        return Err(CliError::Usage("--checkpoint, --data and --out need a single --category".into()));
    }
    for cat in cats {
        let spec = cfg.spec(cat)?;
        let data_path = args.data.map_or_else(|| cfg.dataset_path(cat, "test"), Path::to_path_buf);
        let data = load_nonempty(&data_path)?;
        let crop = CropParams { enlargement: cfg.model.enlargement, min_points: cfg.model.min_points, max_points: cfg.model.max_points };
        let model;
        let method = match args.method {
            "6pack" => {
                let path = args.checkpoint.map_or_else(|| cfg.model_path(cat), Path::to_path_buf);
                model = Checkpoint::load(&path)?.model;
                Method::Learned(&model)
            }
            "icp" => Method::Icp(crop),
            "oracle" => Method::Oracle(crop),
            other => return Err(CliError::Usage(format!("unknown method {other:?}; use 6pack, icp or oracle"))),
        };
        let start = Instant::now();
        let poses = run_method(&method, &spec, &data.sequences, &cfg.bench)?;
        let secs = start.elapsed().as_secs_f64();
        let frames: usize = poses.iter().map(Vec::len).sum();
        let valid = poses.iter().flatten().filter(|p| p.valid).count();
        let out = args.out.map_or_else(|| cfg.trajectory_path(cat, method.name()), Path::to_path_buf);
        if let Some(parent) = out.parent() {
            create_dir(parent)?;
        }
        let traj = Trajectory { method: method.name().into(), category: cat.clone(), sequences: poses };
        save_trajectory(&out, &traj)?;
        println!(
            "{cat}: {} frames ({valid} valid) in {secs:.2}s, {:.1} fps; wrote {}",
            frames,
            frames as f64 / secs.max(1e-9),
            out.display()
        );
    }
    Ok(())
}

pub fn eval(cfg: &RunConfig, trajectories: &[PathBuf], data: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let paths: Vec<PathBuf> = if trajectories.is_empty() {
        cfg.categories
            .iter()
            .flat_map(|c| ["6pack", "icp", "oracle"].map(|m| cfg.trajectory_path(c, m)))
            .filter(|p| p.exists())
            .collect()
    } else {
        trajectories.to_vec()
    };
    if paths.is_empty() {
        return Err(CliError::Usage("no trajectories given or found under the runs directory".into()));
    }
    let mut scored: Vec<(String, String, Vec<FrameScore>)> = Vec::new();
    let mut stability: Vec<(String, String, Vec<(usize, f64)>)> = Vec::new();
    for path in &paths {
        let traj = load_trajectory(path)?;
        let spec = cfg.spec(&traj.category)?;
        let data_path = data.map_or_else(|| cfg.dataset_path(&traj.category, "test"), Path::to_path_buf);
        let ds = load_nonempty(&data_path)?;
        if ds.sequences.len() != traj.sequences.len() {
            return Err(sixpack_core::Error::LengthMismatch(traj.sequences.len(), ds.sequences.len()).into());
        }
        let mut scores = Vec::new();
        let mut flags = Vec::new();
        for (est, seq) in traj.sequences.iter().zip(&ds.sequences) {
            let s = score_sequence(est, seq, &spec)?;
            flags.push(s.iter().map(FrameScore::success).collect::<Vec<_>>());
            scores.extend(s);
        }
        stability.push((traj.method.clone(), traj.category.clone(), mean_stability_curve(&flags)));
        scored.push((traj.method, traj.category, scores));
    }
    let report = MetricReport::from_scores(&scored);
    let base = out.map_or_else(|| cfg.paths.runs.join("report"), Path::to_path_buf);
    if let Some(parent) = base.parent() {
        create_dir(parent)?;
    }
    let (json, txt) = emit_report(&report, &base.with_extension("json"))?;
    let mut csv = String::from("method,category,offset,success_rate\n");
    for (m, c, curve) in &stability {
        for (offset, rate) in curve {
            csv.push_str(&format!("{m},{c},{offset},{rate}\n"));
        }
    }
    let csv_path = base.with_file_name(format!(
        "{}_stability.csv",
        base.file_name().and_then(|n| n.to_str()).unwrap_or("report")
    ));
    fs::write(&csv_path, csv).map_err(|e| CliError::Io(format!("{}: {e}", csv_path.display())))?;
    print!("{}", report.table());
    println!("wrote {}, {}, {}", json.display(), txt.display(), csv_path.display());
    Ok(())
}

pub fn check() -> Result<(), CliError> {
    let hooks = match std::env::var(CORRUPT_ENV) {
        Ok(name) if !name.is_empty() => Hooks::corrupted(&name)?,
        _ => Hooks::default(),
    };
    let start = Instant::now();
    let outcomes = run_checks(&hooks);
    let mut failed = Vec::new();
    for o in &outcomes {
        println!("{} {:<20} {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        if !o.passed {
            failed.push(o.name);
        }
    }
    println!("{} checks in {:.1}s", outcomes.len(), start.elapsed().as_secs_f64());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failed.join(", ")))
    }
}
