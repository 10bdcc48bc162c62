//! Run configuration: one TOML file, `--set key=value` overrides, one root
//! seed from which every component seed is derived.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sixpack_core::eval::BenchConfig;
use sixpack_core::model::ModelConfig;
use sixpack_core::seed::derive_labeled;
use sixpack_core::synthdata::{CategorySpec, RenderParams, CATEGORY_NAMES};
use sixpack_core::train::TrainConfig;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub dir: PathBuf,
    pub train_sequences: usize,
    pub test_sequences: usize,
    pub train_length: usize,
    pub test_length: usize,
    pub motion_scale: f64,
    /// Instance seeds `base .. base + count`; train and test ranges must not
    /// overlap.
    pub train_instance_base: u64,
    pub test_instance_base: u64,
    pub train_render: RenderParams,
    pub test_render: RenderParams,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("data"),
            train_sequences: 16,
            test_sequences: 5,
            train_length: 40,
            test_length: 100,
            motion_scale: 1.0,
            train_instance_base: 0,
            test_instance_base: 100_000,
            train_render: RenderParams { occlusion: 0.3, noise_sigma: 0.002, clutter_points: 50 },
            test_render: RenderParams { occlusion: 0.4, noise_sigma: 0.002, clutter_points: 50 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Checkpoints, loss logs, trajectories and reports go under here.
    pub runs: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { runs: PathBuf::from("runs") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub categories: Vec<String>,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub bench: BenchConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            categories: CATEGORY_NAMES.iter().map(|s| s.to_string()).collect(),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::desk_scale(),
            bench: BenchConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

/// Keys that exist on the component configs but are always derived from
/// the root seed.
const DERIVED_KEYS: [&str; 3] = ["train.seed", "bench.seed", "bench.track.seed"];

/// Keys without a value by default, listed separately in `--help`.
const OPTIONAL_KEYS: [(&str, &str); 1] =
    [("bench.track.max_lost_frames", "unset: a lost track keeps extrapolating forever")];

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Every config key with its default, sorted by key.
pub fn documented_keys() -> Vec<(String, String)> {
    let value = toml::Value::try_from(RunConfig::default()).expect("defaults serialize");
    let mut out = Vec::new();
    flatten("", &value, &mut out);
    out.retain(|(k, _)| !DERIVED_KEYS.contains(&k.as_str()));
    for (k, note) in OPTIONAL_KEYS {
        out.push((k.to_string(), format!("({note})")));
    }
    out
}

pub fn help_text() -> String {
    let mut s = String::from("Config keys and defaults (set in --config or with --set key=value):\n");
    for (k, v) in documented_keys() {
        s.push_str(&format!("  {k} = {v}\n"));
    }
    s.push_str("\nExit codes: 0 ok, 1 check failure, 2 usage or config error, 3 I/O error, 4 numerical failure.\n");
    s
}

fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| usage(format!("empty key in {key:?}")))?;
    let mut t = table;
    for p in parts {
        let entry = t.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| usage(format!("{p:?} in {key:?} is not a section")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

fn reject_derived(table: &toml::Table) -> Result<(), CliError> {
    let mut keys = Vec::new();
    flatten("", &toml::Value::Table(table.clone()), &mut keys);
    if let Some((k, _)) = keys.iter().find(|(k, _)| DERIVED_KEYS.contains(&k.as_str())) {
        return Err(usage(format!("{k} is derived from the root `seed`; set `seed` instead")));
    }
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any) and applies `overrides` on top; flags win.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(|e| usage(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| usage(format!("--set expects key=value, got {o:?}")))?;
            set_path(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        reject_derived(&table)?;
        let mut cfg: RunConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| usage(e.message().to_string()))?;
        cfg.train.seed = derive_labeled(cfg.seed, "train");
        cfg.bench.seed = derive_labeled(cfg.seed, "bench");
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.categories.is_empty() {
            return Err(usage("categories must not be empty"));
        }
        for c in &self.categories {
            if CategorySpec::builtin(c).is_none() {
                return Err(usage(format!("unknown category {c:?}; known: {}", CATEGORY_NAMES.join(", "))));
            }
        }
        let d = &self.data;
        let train = d.train_instance_base..d.train_instance_base.saturating_add(d.train_sequences as u64);
        let test = d.test_instance_base..d.test_instance_base.saturating_add(d.test_sequences as u64);
        if train.start < test.end && test.start < train.end {
            return Err(usage(format!("train instance seeds {train:?} overlap test instance seeds {test:?}")));
        }
        if d.train_length < 2 || d.test_length < 2 {
            return Err(usage("sequence lengths must be at least 2"));
        }
        for r in [&d.train_render, &d.test_render] {
            if !(0.0..=0.6).contains(&r.occlusion) || !(r.noise_sigma >= 0.0) {
                return Err(usage("occlusion must be in [0, 0.6] and noise_sigma nonnegative"));
            }
        }
        if !(d.motion_scale >= 0.0) {
            return Err(usage("motion_scale must be nonnegative"));
        }
        self.model.validate().map_err(|e| usage(e.to_string()))?;
        self.train.validate().map_err(|e| usage(e.to_string()))?;
        self.bench.track.validate().map_err(|e| usage(e.to_string()))?;
        if !(0.0..1.0).contains(&self.bench.drop_fraction) || !(self.bench.init_noise >= 0.0) {
            return Err(usage("drop_fraction must be in [0, 1) and init_noise nonnegative"));
        }
        Ok(())
    }

    pub fn spec(&self, category: &str) -> Result<CategorySpec, CliError> {
        CategorySpec::builtin(category).ok_or_else(|| usage(format!("unknown category {category:?}")))
    }

    pub fn dataset_path(&self, category: &str, split: &str) -> PathBuf {
        self.data.dir.join(format!("{category}_{split}.jsonl"))
    }

    pub fn run_dir(&self, category: &str) -> PathBuf {
        self.paths.runs.join(category)
    }

    pub fn model_path(&self, category: &str) -> PathBuf {
        self.run_dir(category).join("model.json")
    }

    pub fn trajectory_path(&self, category: &str, method: &str) -> PathBuf {
        self.run_dir(category).join(format!("{method}.traj.jsonl"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let text = toml::to_string(&RunConfig::default()).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, RunConfig::default());
    }

    #[test]
    fn overrides_win_and_unknown_keys_fail() {
        let cfg = RunConfig::load(None, &["train.steps=7".into(), "categories=[\"bowl\"]".into()]).unwrap();
        assert_eq!(cfg.train.steps, 7);
        assert_eq!(cfg.categories, vec!["bowl"]);
        assert!(matches!(RunConfig::load(None, &["train.stepz=7".into()]), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::load(None, &["train.seed=7".into()]), Err(CliError::Usage(_))));
    }

    #[test]
    fn seeds_derive_from_the_root() {
        let a = RunConfig::load(None, &[]).unwrap();
        let b = RunConfig::load(None, &["seed=1".into()]).unwrap();
        assert_ne!(a.train.seed, b.train.seed);
        assert_ne!(a.bench.seed, b.bench.seed);
    }

    #[test]
    fn overlapping_instances_are_rejected() {
        let set = ["data.test_instance_base=10".to_string()];
        assert!(matches!(RunConfig::load(None, &set), Err(CliError::Usage(_))));
    }

    #[test]
    fn help_lists_every_key() {
        let help = help_text();
        for key in ["seed", "data.dir", "model.keypoints", "train.weights.w_mvc", "bench.icp.cutoff", "paths.runs"] {
            assert!(help.contains(&format!("  {key} = ")), "{key} missing");
        }
        assert!(!help.contains("train.seed"));
    }
}
