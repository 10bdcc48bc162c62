//! Anchor attention, ordered keypoint generation and the training losses.

pub mod losses;

pub use losses::{
    anchor_loss, cen_loss, mvc_loss, pose_loss, rotation_loss, sep_loss, sil_loss, sym_mvc_loss, sym_rot_loss,
    total_loss, translation_loss, LossParts, LossWeights,
};

use crate::encode::{AnchorGrid, Crop};
use crate::error::Result;
use crate::geometry::Vec3;
use crate::nn::real::{add3c, matvec3, scale3, V3};
use crate::nn::{softmax, MlpParams, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct AnchorScores {
    pub confidences: Vec<f64>,
    pub selected: usize,
}

/// Ordered keypoints in the camera frame.
#[derive(Clone, Debug, PartialEq)]
pub struct KeypointSet {
    pub points: Vec<Vec3>,
}

impl KeypointSet {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn arrays(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|p| (*p).into()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn attend(grid: &AnchorGrid, params: &MlpParams) -> Result<AnchorScores> {
    let logits = grid
        .embeddings
        .iter()
        .map(|psi| params.forward(psi).map(|o| o[0]))
        .collect::<Result<Vec<f64>>>()?;
    let confidences = softmax(&logits);
    let selected = argmax(&confidences);
    Ok(AnchorScores { confidences, selected })
}

/// Keypoint-generator input: the anchor embedding followed by the anchor.
pub fn generator_input(embedding: &[f64], anchor: &Vec3) -> Vec<f64> {
    let mut x = embedding.to_vec();
    x.extend(anchor.iter());
    x
}

/// Maps raw generator outputs to camera-frame keypoints. Each normalized
/// coordinate is `0.5·tanh(o + atanh(2a))`: the anchor itself at `o = 0`,
/// and always strictly inside the crop box.
pub fn keypoint_head<S: Real>(outputs: &[S], anchor: &Vec3, crop: &Crop) -> Vec<V3<S>> {
    let bias: [f64; 3] = std::array::from_fn(|c| (2.0 * anchor[c]).atanh());
    let rot: [[f64; 3]; 3] = std::array::from_fn(|r| std::array::from_fn(|c| crop.rotation.matrix()[(r, c)]));
    let center: [f64; 3] = crop.center.into();
    outputs
        .chunks(3)
        .map(|o| {
            let n: V3<S> = std::array::from_fn(|c| (o[c] + bias[c]).tanh() * 0.5);
            add3c(&matvec3(&rot, &scale3(&n, crop.scale)), &center)
        })
        .collect()
}

pub fn generate_keypoints(embedding: &[f64], anchor: &Vec3, crop: &Crop, params: &MlpParams) -> Result<KeypointSet> {
    let out = params.forward(&generator_input(embedding, anchor))?;
    let pts = keypoint_head(&out, anchor, crop);
    Ok(KeypointSet::new(pts.into_iter().map(Vec3::from).collect()))
}
