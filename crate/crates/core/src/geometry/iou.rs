use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Pose, Vec3};
use crate::error::{Error, Result};

pub const IOU_DEFAULT_SEED: u64 = 0x10_u64;

/// Box centred at `pose.translation`, axes given by `pose.rotation`, with
/// half side lengths `extents`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedBox3 {
    pub pose: Pose,
    pub extents: Vec3,
}

impl OrientedBox3 {
    pub fn new(pose: Pose, extents: Vec3) -> Result<Self> {
        if extents.iter().all(|&e| e > 0.0 && e.is_finite()) {
            Ok(Self { pose, extents })
        } else {
            Err(Error::DegenerateInput("box extents must be positive".into()))
        }
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.extents.x * self.extents.y * self.extents.z
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let local = self.pose.rotation.matrix().transpose() * (p - self.pose.translation);
        (0..3).all(|k| local[k].abs() <= self.extents[k])
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Vec3 {
        let u = Vec3::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        self.pose.transform_point(&u.component_mul(&self.extents))
    }
}

/// Monte Carlo intersection-over-union with the default fixed seed.
pub fn box_iou(a: &OrientedBox3, b: &OrientedBox3, samples: usize) -> f64 {
    box_iou_seeded(a, b, samples, IOU_DEFAULT_SEED)
}

/// Half the samples are drawn in each box; the two intersection estimates
/// are averaged before forming `I / (|a| + |b| − I)`.
pub fn box_iou_seeded(a: &OrientedBox3, b: &OrientedBox3, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = (samples / 2).max(1);
    let in_b = (0..half).filter(|_| b.contains(&a.sample(&mut rng))).count();
    let in_a = (0..half).filter(|_| a.contains(&b.sample(&mut rng))).count();
    let (va, vb) = (a.volume(), b.volume());
    let inter = 0.5 * (va * in_b as f64 + vb * in_a as f64) / half as f64;
    let union = va + vb - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
