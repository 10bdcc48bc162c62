//! Cropping around a predicted pose, the anchor lattice, per-point features
//! and distance-weighted pooling of those features onto anchors.
//!
//! The crop frame is the predicted object frame scaled isotropically so the
//! longest side of the enlarged category box spans one unit.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, Vec3};
use crate::nn::{softmax, MlpParams};

/// A colored 3D point from the sensor, in the camera frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservedPoint {
    pub position: Vec3,
    pub color: [f64; 3],
}

impl ObservedPoint {
    pub fn new(position: Vec3, color: [f64; 3]) -> Self {
        Self { position, color }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CropParams {
    pub enlargement: f64,
    pub min_points: usize,
    pub max_points: usize,
}

impl Default for CropParams {
    fn default() -> Self {
        Self { enlargement: 1.5, min_points: 32, max_points: 512 }
    }
}

/// Points inside the enlarged box around a predicted pose.
#[derive(Clone, Debug, PartialEq)]
pub struct Crop {
    /// Original camera-frame points.
    pub points: Vec<ObservedPoint>,
    /// The same points in the normalized crop frame.
    pub normalized: Vec<Vec3>,
    pub center: Vec3,
    pub rotation: Rotation,
    pub scale: f64,
}

impl Crop {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn normalize(&self, p: &Vec3) -> Vec3 {
        self.rotation.matrix().transpose() * (p - self.center) / self.scale
    }

    pub fn denormalize(&self, n: &Vec3) -> Vec3 {
        self.rotation.matrix() * (n * self.scale) + self.center
    }

    /// `(position, color)` encoder inputs.
    pub fn encoder_inputs(&self) -> impl Iterator<Item = [f64; 6]> + '_ {
        self.normalized.iter().zip(&self.points).map(|(n, p)| {
            [n.x, n.y, n.z, p.color[0], p.color[1], p.color[2]]
        })
    }
}

/// Crops `frame` to the box of side lengths `enlargement · category_extent`
/// around `predicted`, keeping at most `max_points` (seeded subsample).
pub fn crop_volume(
    frame: &[ObservedPoint],
    predicted: &Pose,
    category_extent: &Vec3,
    params: &CropParams,
    seed: u64,
) -> Result<Crop> {
    if !(params.enlargement >= 1.0) {
        return Err(Error::DegenerateInput("crop enlargement must be at least 1".into()));
    }
    if !category_extent.iter().all(|&e| e > 0.0 && e.is_finite()) {
        return Err(Error::DegenerateInput("category extent must be positive".into()));
    }
    let scale = params.enlargement * category_extent.max();
    let half = category_extent * (0.5 * params.enlargement / scale);
    let rt = predicted.rotation.matrix().transpose();
    let mut inside: Vec<(usize, Vec3)> = Vec::new();
    for (i, p) in frame.iter().enumerate() {
        let n = rt * (p.position - predicted.translation) / scale;
        if (0..3).all(|k| n[k].abs() <= half[k] + 1e-12) {
            inside.push((i, n));
        }
    }
    if inside.len() < params.min_points.max(1) {
        return Err(Error::EmptyCrop { found: inside.len(), required: params.min_points.max(1) });
    }
    if inside.len() > params.max_points {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = index::sample(&mut rng, inside.len(), params.max_points).into_vec();
        keep.sort_unstable();
        inside = keep.into_iter().map(|k| inside[k]).collect();
    }
    Ok(Crop {
        points: inside.iter().map(|(i, _)| frame[*i]).collect(),
        normalized: inside.into_iter().map(|(_, n)| n).collect(),
        center: predicted.translation,
        rotation: predicted.rotation,
        scale,
    })
}

/// Regular `n × n × n` lattice over the unit cube, `x` slowest.
pub fn build_anchor_grid(n: usize) -> Vec<Vec3> {
    assert!(n >= 2, "anchor grid needs n >= 2");
    let coord = |i: usize| (i as f64 + 0.5) / n as f64 - 0.5;
    let mut anchors = Vec::with_capacity(n * n * n);
    for ix in 0..n {
        for iy in 0..n {
            for iz in 0..n {
                anchors.push(Vec3::new(coord(ix), coord(iy), coord(iz)));
            }
        }
    }
    anchors
}

/// Anchors with their pooled embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchorGrid {
    pub n: usize,
    pub anchors: Vec<Vec3>,
    pub embeddings: Vec<Vec<f64>>,
}

impl AnchorGrid {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// One feature per crop point from the shared point encoder.
pub fn encode_points(crop: &Crop, params: &MlpParams) -> Result<Vec<Vec<f64>>> {
    crop.encoder_inputs().map(|x| params.forward(&x)).collect()
}

/// Softmax weights over `−‖anchor − x_j‖ / temperature`.
pub fn pool_weights(anchor: &Vec3, normalized: &[Vec3], temperature: f64) -> Vec<f64> {
    let logits: Vec<f64> = normalized.iter().map(|x| -(anchor - x).norm() / temperature).collect();
    softmax(&logits)
}

/// Distance-weighted average of point features at `anchor`.
pub fn pool_anchor(anchor: &Vec3, crop: &Crop, features: &[Vec<f64>], temperature: f64) -> Vec<f64> {
    assert_eq!(features.len(), crop.len(), "one feature per crop point");
    let weights = pool_weights(anchor, &crop.normalized, temperature);
    let dim = features.first().map_or(0, Vec::len);
    let mut psi = vec![0.0; dim];
    for (w, f) in weights.iter().zip(features) {
        for (acc, v) in psi.iter_mut().zip(f) {
            *acc += w * v;
        }
    }
    psi
}

pub fn pool_grid(n: usize, crop: &Crop, features: &[Vec<f64>], temperature: f64) -> AnchorGrid {
    let anchors = build_anchor_grid(n);
    let embeddings = anchors.iter().map(|a| pool_anchor(a, crop, features, temperature)).collect();
    AnchorGrid { n, anchors, embeddings }
}
