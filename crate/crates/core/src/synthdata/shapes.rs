//! Parametric surface samplers for the built-in shape families.
//!
//! Canonical frame: y up, symmetry axis (when present) along y through the
//! origin, front facing −z. Surfaces of revolution are sampled as rings with
//! an even number of evenly spaced points and random phase, so rotating the
//! set about y maps each ring onto itself up to half the arc spacing.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{Rotation, Vec3};

/// One sampled surface point with its outward normal and part index.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Sample {
    pub point: Vec3,
    pub normal: Vec3,
    pub part: usize,
}

/// A meridian curve `s ↦ (radius, height, normal_radial, normal_y)` of
/// arc length `length`, swept about y.
pub(crate) struct Meridian<F: Fn(f64) -> [f64; 4]> {
    pub length: f64,
    pub at: F,
    pub part: usize,
}

pub(crate) fn meridian_area<F: Fn(f64) -> [f64; 4]>(m: &Meridian<F>) -> f64 {
    let steps = 64;
    (0..steps)
        .map(|i| {
            let s = (i as f64 + 0.5) / steps as f64 * m.length;
            TAU * (m.at)(s)[0] * m.length / steps as f64
        })
        .sum()
}

/// Rings every `ring_step` along the meridian, points every `arc_step`
/// along each ring.
pub(crate) fn sweep<R: Rng + ?Sized, F: Fn(f64) -> [f64; 4]>(
    m: &Meridian<F>,
    ring_step: f64,
    arc_step: f64,
    rng: &mut R,
    out: &mut Vec<Sample>,
) {
    let rings = ((m.length / ring_step).round() as usize).max(1);
    for k in 0..rings {
        let s = (k as f64 + 0.5) / rings as f64 * m.length;
        let [rho, y, nr, ny] = (m.at)(s);
        let count = 2 * ((PI * rho / arc_step).round() as usize).max(2);
        let phase = rng.random_range(0.0..TAU);
        for j in 0..count {
            let phi = phase + TAU * j as f64 / count as f64;
            let (sin, cos) = phi.sin_cos();
            out.push(Sample {
                point: Vec3::new(rho * cos, y, rho * sin),
                normal: Vec3::new(nr * cos, ny, nr * sin),
                part: m.part,
            });
        }
    }
}

/// Uniform samples on the six faces of a posed box.
pub(crate) fn box_surface<R: Rng + ?Sized>(
    center: Vec3,
    half: Vec3,
    rot: &Rotation,
    count: usize,
    part: usize,
    rng: &mut R,
    out: &mut Vec<Sample>,
) {
    let areas = [half.y * half.z, half.y * half.z, half.x * half.z, half.x * half.z, half.x * half.y, half.x * half.y];
    let total: f64 = areas.iter().sum();
    for _ in 0..count {
        let mut pick = rng.random_range(0.0..total);
        let mut face = 0;
        while face < 5 && pick >= areas[face] {
            pick -= areas[face];
            face += 1;
        }
        let axis = face / 2;
        let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
        let mut local = Vec3::new(
            rng.random_range(-half.x..half.x),
            rng.random_range(-half.y..half.y),
            rng.random_range(-half.z..half.z),
        );
        local[axis] = sign * half[axis];
        let mut normal = Vec3::zeros();
        normal[axis] = sign;
        out.push(Sample { point: center + rot.apply(&local), normal: rot.apply(&normal), part });
    }
}

pub(crate) fn box_area(half: &Vec3) -> f64 {
    8.0 * (half.x * half.y + half.y * half.z + half.x * half.z)
}

/// Closed cylinder along `axis` (unit) from `base`, random samples.
#[allow(clippy::too_many_arguments)]
pub(crate) fn cylinder<R: Rng + ?Sized>(
    base: Vec3,
    rot: &Rotation,
    radius: f64,
    length: f64,
    caps: (bool, bool),
    count: usize,
    part: usize,
    rng: &mut R,
    out: &mut Vec<Sample>,
) {
    // local frame: axis along +y
    let side = TAU * radius * length;
    let cap = PI * radius * radius;
    let total = side + cap * (caps.0 as u8 + caps.1 as u8) as f64;
    for _ in 0..count {
        let pick = rng.random_range(0.0..total);
        let phi = rng.random_range(0.0..TAU);
        let (sin, cos) = phi.sin_cos();
        let (local, normal) = if pick < side {
            let y = rng.random_range(0.0..length);
            (Vec3::new(radius * cos, y, radius * sin), Vec3::new(cos, 0.0, sin))
        } else {
            let rho = radius * rng.random_range(0.0f64..1.0).sqrt();
            let top = if caps.0 && caps.1 { pick >= side + cap } else { caps.1 };
            let y = if top { length } else { 0.0 };
            let ny = if top { 1.0 } else { -1.0 };
            (Vec3::new(rho * cos, y, rho * sin), Vec3::new(0.0, ny, 0.0))
        };
        out.push(Sample { point: base + rot.apply(&local), normal: rot.apply(&normal), part });
    }
}

/// Half torus in the x-y plane on the +x side of `center`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn handle<R: Rng + ?Sized>(
    center: Vec3,
    major: f64,
    minor: f64,
    count: usize,
    part: usize,
    rng: &mut R,
    out: &mut Vec<Sample>,
) {
    let mut n = 0;
    while n < count {
        let theta = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        let phi = rng.random_range(0.0..TAU);
        // area element ∝ (major + minor cos φ); rejection keeps it uniform
        if rng.random_range(0.0..major + minor) > major + minor * phi.cos() {
            continue;
        }
        let ring = Vec3::new(theta.cos(), theta.sin(), 0.0);
        let normal = ring * phi.cos() + Vec3::z() * phi.sin();
        out.push(Sample { point: center + ring * major + normal * minor, normal, part });
        n += 1;
    }
}

/// Per-part base colors plus small per-point Gaussian jitter.
pub(crate) fn colorize<R: Rng + ?Sized>(samples: &[Sample], parts: usize, rng: &mut R) -> Vec<[f64; 3]> {
    let palette: Vec<[f64; 3]> = (0..parts)
        .map(|_| std::array::from_fn(|_| rng.random_range(0.1..0.9)))
        .collect();
    let jitter = Normal::new(0.0, 0.03).expect("valid sigma");
    samples
        .iter()
        .map(|s| {
            let base = palette[s.part];
            std::array::from_fn(|c| (base[c] + 0.5 * s.point.y + jitter.sample(rng)).clamp(0.0, 1.0))
        })
        .collect()
}
