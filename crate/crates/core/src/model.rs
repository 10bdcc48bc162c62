//! The full keypoint model: point encoder, anchor attention and keypoint
//! generator, plus its checkpoint file.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encode::{crop_volume, encode_points, pool_grid, AnchorGrid, Crop, CropParams, ObservedPoint};
use crate::error::{Error, Result};
use crate::geometry::{Pose, SymmetryAxis, Vec3};
use crate::keypoint::{attend, generate_keypoints, AnchorScores, KeypointSet};
use crate::nn::{AdamState, MlpParams};
use crate::synthdata::CategorySpec;

pub const CHECKPOINT_FORMAT: &str = "sixpack-ckpt/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Keypoints per set.
    pub keypoints: usize,
    /// Anchors per axis.
    pub grid: usize,
    pub feature_dim: usize,
    pub encoder_hidden: usize,
    pub attention_hidden: usize,
    pub generator_hidden: Vec<usize>,
    /// Pooling temperature in normalized crop units.
    pub temperature: f64,
    pub enlargement: f64,
    pub min_points: usize,
    pub max_points: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            keypoints: 8,
            grid: 5,
            feature_dim: 64,
            encoder_hidden: 32,
            attention_hidden: 32,
            generator_hidden: vec![128, 128],
            temperature: 0.1,
            enlargement: 1.5,
            min_points: 32,
            max_points: 512,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::DegenerateInput(m.into()));
        if self.keypoints < 3 {
            return bad("at least 3 keypoints are needed for alignment");
        }
        if self.grid < 2 {
            return bad("grid needs at least 2 anchors per axis");
        }
        if self.feature_dim == 0 || self.encoder_hidden == 0 || self.attention_hidden == 0 {
            return bad("layer sizes must be positive");
        }
        if self.generator_hidden.contains(&0) {
            return bad("layer sizes must be positive");
        }
        if !(self.temperature > 0.0) || !(self.enlargement >= 1.0) {
            return bad("temperature must be positive and enlargement at least 1");
        }
        if self.min_points == 0 || self.max_points < self.min_points {
            return bad("need 0 < min_points <= max_points");
        }
        Ok(())
    }

    pub fn crop_params(&self) -> CropParams {
        CropParams { enlargement: self.enlargement, min_points: self.min_points, max_points: self.max_points }
    }

    pub fn encoder_sizes(&self) -> Vec<usize> {
        vec![6, self.encoder_hidden, self.feature_dim]
    }

    pub fn attention_sizes(&self) -> Vec<usize> {
        vec![self.feature_dim, self.attention_hidden, 1]
    }

    pub fn generator_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.feature_dim + 3];
        s.extend(&self.generator_hidden);
        s.push(3 * self.keypoints);
        s
    }
}

/// Category information the model needs at inference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryInfo {
    pub name: String,
    pub symmetric: bool,
    pub axis: [f64; 3],
    pub extent: [f64; 3],
}

impl CategoryInfo {
    pub fn extent(&self) -> Vec3 {
        Vec3::from(self.extent)
    }

    pub fn axis(&self) -> Result<SymmetryAxis> {
        SymmetryAxis::new(Vec3::from(self.axis))
    }
}

impl From<&CategorySpec> for CategoryInfo {
    fn from(spec: &CategorySpec) -> Self {
        Self {
            name: spec.name.clone(),
            symmetric: spec.symmetric,
            axis: (*spec.axis.direction()).into(),
            extent: spec.extent.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    pub config: ModelConfig,
    pub category: CategoryInfo,
    pub encoder: MlpParams,
    pub attention: MlpParams,
    pub generator: MlpParams,
}

/// Everything produced by one forward pass.
#[derive(Clone, Debug)]
pub struct Inference {
    pub crop: Crop,
    pub grid: AnchorGrid,
    pub scores: AnchorScores,
    pub keypoints: KeypointSet,
}

impl Model {
    pub fn new(config: ModelConfig, category: CategoryInfo, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            encoder: MlpParams::random(&config.encoder_sizes(), &mut rng)?,
            attention: MlpParams::random(&config.attention_sizes(), &mut rng)?,
            generator: MlpParams::random(&config.generator_sizes(), &mut rng)?,
            config,
            category,
        })
    }

    pub fn infer_crop(&self, crop: Crop) -> Result<Inference> {
        let features = encode_points(&crop, &self.encoder)?;
        let grid = pool_grid(self.config.grid, &crop, &features, self.config.temperature);
        let scores = attend(&grid, &self.attention)?;
        let s = scores.selected;
        let keypoints = generate_keypoints(&grid.embeddings[s], &grid.anchors[s], &crop, &self.generator)?;
        Ok(Inference { crop, grid, scores, keypoints })
    }

    /// Crops `points` around `around` and runs the network.
    pub fn infer(&self, points: &[ObservedPoint], around: &Pose, seed: u64) -> Result<Inference> {
        let crop = crop_volume(points, around, &self.category.extent(), &self.config.crop_params(), seed)?;
        self.infer_crop(crop)
    }
}

/// Optimizer state carried in a checkpoint so training can resume exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerState {
    pub step: u64,
    pub encoder: AdamState,
    pub attention: AdamState,
    pub generator: AdamState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub model: Model,
    pub optimizer: Option<OptimizerState>,
}

impl Checkpoint {
    pub fn new(model: Model, optimizer: Option<OptimizerState>) -> Self {
        Self { format: CHECKPOINT_FORMAT.into(), model, optimizer }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
        let found = value.get("format").and_then(|v| v.as_str()).unwrap_or("").to_string();
        if found != CHECKPOINT_FORMAT {
            return Err(Error::FormatVersionMismatch { expected: CHECKPOINT_FORMAT.into(), found });
        }
        let ckpt: Checkpoint = serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
        ckpt.model.config.validate()?;
        let c = &ckpt.model.config;
        for (net, sizes) in [
            (&ckpt.model.encoder, c.encoder_sizes()),
            (&ckpt.model.attention, c.attention_sizes()),
            (&ckpt.model.generator, c.generator_sizes()),
        ] {
            if net.sizes() != sizes.as_slice() {
                return Err(Error::Format(format!("network sizes {:?} do not match config {sizes:?}", net.sizes())));
            }
        }
        Ok(ckpt)
    }
}
