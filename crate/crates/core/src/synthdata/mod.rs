//! Synthetic category instances, trajectories and RGB-D-like frames.

pub(crate) mod io;
mod render;
mod shapes;

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use io::{load_dataset, save_dataset, Dataset, DATASET_FORMAT};
pub use render::{
    render_sequence,
    constant_velocity_trajectory, gen_sequence, gen_trajectory, render_frame, render_frame_occluded, start_pose, Frame, RenderParams,
    Sequence, SequenceParams, MAX_STEP_ANGLE, MAX_STEP_TRANSLATION,
};

use crate::geometry::{centroid, Rotation, SymmetryAxis, Vec3};
use shapes::{box_area, box_surface, colorize, cylinder, handle, meridian_area, sweep, Meridian, Sample};

pub type Range = (f64, f64);

#[derive(Clone, Debug, PartialEq)]
pub enum ShapeFamily {
    /// Hemispherical shell open at the top.
    Bowl { radius: Range, thickness: f64 },
    /// Capped cylinder.
    Can { radius: Range, height: Range },
    /// Capped body, conical shoulder and capped neck.
    Bottle { radius: Range, height: Range, neck_radius: Range, neck_height: Range },
    /// Base box with a lid hinged at the back edge; angle in degrees.
    Laptop { width: Range, depth: Range, thickness: f64, lid_angle: Range },
    /// Box body with a cylindrical lens on the front face.
    Camera { width: Range, height: Range, depth: Range, lens_radius: Range, lens_length: Range },
    /// Open cylinder with a wall and a half-torus handle on +x.
    Mug { radius: Range, height: Range, handle_radius: Range },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategorySpec {
    pub name: String,
    pub symmetric: bool,
    pub axis: SymmetryAxis,
    pub family: ShapeFamily,
    /// Full side lengths of a box about the centroid holding every instance.
    pub extent: Vec3,
}

pub const CATEGORY_NAMES: [&str; 6] = ["bottle", "bowl", "camera", "can", "laptop", "mug"];

/// Target number of surface samples per instance.
const TARGET_POINTS: f64 = 1200.0;

impl CategorySpec {
    pub fn builtin(name: &str) -> Option<Self> {
        let (symmetric, family, extent) = match name {
            "bottle" => (
                true,
                ShapeFamily::Bottle {
                    radius: (0.03, 0.042),
                    height: (0.11, 0.16),
                    neck_radius: (0.011, 0.016),
                    neck_height: (0.03, 0.05),
                },
                Vec3::new(0.09, 0.30, 0.09),
            ),
            "bowl" => (true, ShapeFamily::Bowl { radius: (0.06, 0.085), thickness: 0.004 }, Vec3::new(0.18, 0.10, 0.18)),
            "camera" => (
                false,
                ShapeFamily::Camera {
                    width: (0.10, 0.13),
                    height: (0.07, 0.09),
                    depth: (0.05, 0.065),
                    lens_radius: (0.025, 0.032),
                    lens_length: (0.03, 0.05),
                },
                Vec3::new(0.15, 0.10, 0.145),
            ),
            "can" => (true, ShapeFamily::Can { radius: (0.03, 0.042), height: (0.09, 0.13) }, Vec3::new(0.09, 0.14, 0.09)),
            "laptop" => (
                false,
                ShapeFamily::Laptop { width: (0.26, 0.32), depth: (0.18, 0.22), thickness: 0.012, lid_angle: (95.0, 115.0) },
                Vec3::new(0.34, 0.34, 0.39),
            ),
            "mug" => (
                false,
                ShapeFamily::Mug { radius: (0.035, 0.045), height: (0.08, 0.10), handle_radius: (0.022, 0.03) },
                Vec3::new(0.16, 0.115, 0.095),
            ),
            _ => return None,
        };
        Some(Self { name: name.to_string(), symmetric, axis: SymmetryAxis::y(), family, extent })
    }

    pub fn all() -> Vec<Self> {
        CATEGORY_NAMES.iter().map(|n| Self::builtin(n).expect("built-in")).collect()
    }
}

/// A sampled instance in its canonical frame, centered at its centroid.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceModel {
    pub id: u64,
    pub category: String,
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub colors: Vec<[f64; 3]>,
}

impl InstanceModel {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

fn pick<R: Rng + ?Sized>(rng: &mut R, r: Range) -> f64 {
    if r.1 > r.0 {
        rng.random_range(r.0..r.1)
    } else {
        r.0
    }
}

/// Sweeps every meridian at a common density so the total is near the target.
fn sweep_all<R: Rng + ?Sized>(meridians: &[Meridian<Box<dyn Fn(f64) -> [f64; 4]>>], rng: &mut R, out: &mut Vec<Sample>) {
    let area: f64 = meridians.iter().map(meridian_area).sum();
    let a = (area / TARGET_POINTS).sqrt();
    let (ring_step, arc_step) = (a * 3f64.sqrt(), a / 3f64.sqrt());
    for m in meridians {
        sweep(m, ring_step, arc_step, rng, out);
    }
}

type Curve = Box<dyn Fn(f64) -> [f64; 4]>;

fn segment(part: usize, from: (f64, f64), to: (f64, f64), outward: bool) -> Meridian<Curve> {
    let (dr, dy) = (to.0 - from.0, to.1 - from.1);
    let length = dr.hypot(dy);
    // normal is the tangent turned clockwise in the (radius, height) plane
    let (mut nr, mut ny) = (dy / length, -dr / length);
    if !outward {
        nr = -nr;
        ny = -ny;
    }
    Meridian {
        length,
        part,
        at: Box::new(move |s| {
            let u = s / length;
            [from.0 + u * dr, from.1 + u * dy, nr, ny]
        }),
    }
}

fn arc(part: usize, radius: f64, outward: bool) -> Meridian<Curve> {
    let sign = if outward { 1.0 } else { -1.0 };
    Meridian {
        length: radius * FRAC_PI_2,
        part,
        at: Box::new(move |s| {
            let beta = s / radius;
            [radius * beta.sin(), -radius * beta.cos(), sign * beta.sin(), -sign * beta.cos()]
        }),
    }
}

fn per_area(area: f64, total: f64) -> usize {
    ((area / total) * TARGET_POINTS).round().max(1.0) as usize
}

pub fn gen_instance(spec: &CategorySpec, seed: u64) -> InstanceModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let parts = match &spec.family {
        ShapeFamily::Bowl { radius, thickness } => {
            let r = pick(&mut rng, *radius);
            let ri = r - thickness;
            let ms = vec![arc(0, r, true), arc(1, ri, false), segment(0, (ri, 0.0), (r, 0.0), false)];
            sweep_all(&ms, &mut rng, &mut samples);
            2
        }
        ShapeFamily::Can { radius, height } => {
            let r = pick(&mut rng, *radius);
            let h = pick(&mut rng, *height);
            let ms = vec![
                segment(0, (r, -h / 2.0), (r, h / 2.0), true),
                segment(1, (r, h / 2.0), (0.0, h / 2.0), true),
                segment(1, (0.0, -h / 2.0), (r, -h / 2.0), true),
            ];
            sweep_all(&ms, &mut rng, &mut samples);
            2
        }
        ShapeFamily::Bottle { radius, height, neck_radius, neck_height } => {
            let rb = pick(&mut rng, *radius);
            let hb = pick(&mut rng, *height);
            let rn = pick(&mut rng, *neck_radius);
            let hn = pick(&mut rng, *neck_height);
            let ys = hb + (rb - rn);
            let ms = vec![
                segment(0, (0.0, 0.0), (rb, 0.0), true),
                segment(0, (rb, 0.0), (rb, hb), true),
                segment(1, (rb, hb), (rn, ys), true),
                segment(1, (rn, ys), (rn, ys + hn), true),
                segment(2, (rn, ys + hn), (0.0, ys + hn), true),
            ];
            sweep_all(&ms, &mut rng, &mut samples);
            3
        }
        ShapeFamily::Laptop { width, depth, thickness, lid_angle } => {
            let w = pick(&mut rng, *width);
            let d = pick(&mut rng, *depth);
            let alpha = pick(&mut rng, *lid_angle).to_radians();
            let half = Vec3::new(w / 2.0, thickness / 2.0, d / 2.0);
            let area = 2.0 * box_area(&half);
            let n = per_area(box_area(&half), area);
            box_surface(Vec3::new(0.0, thickness / 2.0, 0.0), half, &Rotation::identity(), n, 0, &mut rng, &mut samples);
            let lid_rot = Rotation::rx(-alpha);
            let hinge = Vec3::new(0.0, *thickness, -d / 2.0);
            let lid_center = hinge + lid_rot.apply(&Vec3::new(0.0, thickness / 2.0, d / 2.0));
            box_surface(lid_center, half, &lid_rot, n, 1, &mut rng, &mut samples);
            2
        }
        ShapeFamily::Camera { width, height, depth, lens_radius, lens_length } => {
            let half = Vec3::new(pick(&mut rng, *width) / 2.0, pick(&mut rng, *height) / 2.0, pick(&mut rng, *depth) / 2.0);
            let lr = pick(&mut rng, *lens_radius).min(0.9 * half.y);
            let ll = pick(&mut rng, *lens_length);
            let lens_area = 2.0 * PI * lr * ll + PI * lr * lr;
            let total = box_area(&half) + lens_area;
            box_surface(Vec3::zeros(), half, &Rotation::identity(), per_area(box_area(&half), total), 0, &mut rng, &mut samples);
            // lens axis toward −z, offset toward +x so the body is not mirror-symmetric
            let base = Vec3::new(0.3 * half.x, 0.0, -half.z);
            let rot = Rotation::rx(-FRAC_PI_2);
            cylinder(base, &rot, lr, ll, (false, true), per_area(lens_area, total), 1, &mut rng, &mut samples);
            2
        }
        ShapeFamily::Mug { radius, height, handle_radius } => {
            let r = pick(&mut rng, *radius);
            let h = pick(&mut rng, *height);
            let hr = pick(&mut rng, *handle_radius).min(0.45 * h);
            let wall = 0.004;
            let ri = r - wall;
            let minor = 0.006;
            let ms = vec![
                segment(0, (r, -h / 2.0), (r, h / 2.0), true),
                segment(0, (0.0, -h / 2.0), (r, -h / 2.0), true),
                segment(0, (ri, h / 2.0), (r, h / 2.0), false),
                segment(1, (ri, h / 2.0), (ri, -h / 2.0 + wall), true),
                segment(1, (ri, -h / 2.0 + wall), (0.0, -h / 2.0 + wall), true),
            ];
            let body: f64 = ms.iter().map(meridian_area).sum();
            let handle_area = 2.0 * PI * minor * PI * hr;
            sweep_all(&ms, &mut rng, &mut samples);
            let n = (samples.len() as f64 * handle_area / body).round() as usize;
            handle(Vec3::new(r, 0.0, 0.0), hr, minor, n.max(1), 2, &mut rng, &mut samples);
            3
        }
    };
    let colors = colorize(&samples, parts, &mut rng);
    let raw: Vec<Vec3> = samples.iter().map(|s| s.point).collect();
    let c = centroid(&raw);
    InstanceModel {
        id: seed,
        category: spec.name.clone(),
        points: raw.iter().map(|p| p - c).collect(),
        normals: samples.iter().map(|s| s.normal).collect(),
        colors,
    }
}

/// Symmetric chamfer distance: mean of the two directed mean nearest-neighbor
/// distances.
pub fn chamfer_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    let directed = |x: &[Vec3], y: &[Vec3]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min).sqrt())
            .sum::<f64>()
            / x.len() as f64
    };
    0.5 * (directed(a, b) + directed(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_deterministic_and_centered() {
        for spec in CategorySpec::all() {
            let a = gen_instance(&spec, 42);
            let b = gen_instance(&spec, 42);
            assert_eq!(a, b);
            assert!(a.len() >= 500, "{} has {} points", spec.name, a.len());
            assert!(centroid(&a.points).norm() < 1e-6);
            assert!(a.colors.iter().flatten().all(|c| (0.0..=1.0).contains(c)));
            assert!(a.normals.iter().all(|n| (n.norm() - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn instances_fit_category_extent() {
        for spec in CategorySpec::all() {
            for seed in 0..30 {
                let m = gen_instance(&spec, seed);
                for p in &m.points {
                    for k in 0..3 {
                        assert!(p[k].abs() <= spec.extent[k] / 2.0, "{} seed {seed} axis {k}: {}", spec.name, p[k]);
                    }
                }
            }
        }
    }

    #[test]
    fn symmetric_categories_are_axisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for name in ["bowl", "can", "bottle"] {
            let spec = CategorySpec::builtin(name).unwrap();
            let m = gen_instance(&spec, 3);
            let r = Rotation::ry(rng.random_range(0.0..std::f64::consts::TAU));
            let spun: Vec<Vec3> = m.points.iter().map(|p| r.apply(p)).collect();
            let d = chamfer_distance(&spun, &m.points);
            assert!(d < 0.002, "{name}: {d}");
        }
    }

    #[test]
    fn asymmetric_categories_are_not() {
        for name in ["laptop", "camera", "mug"] {
            let spec = CategorySpec::builtin(name).unwrap();
            let m = gen_instance(&spec, 3);
            let r = Rotation::ry(FRAC_PI_2);
            let spun: Vec<Vec3> = m.points.iter().map(|p| r.apply(p)).collect();
            let d = chamfer_distance(&spun, &m.points);
            let bound = if name == "laptop" { 0.005 } else { 0.002 };
            assert!(d > bound, "{name}: {d}");
        }
    }

    #[test]
    fn category_extent_holds_every_instance() {
        for spec in CategorySpec::all() {
            for seed in 0..100 {
                for p in gen_instance(&spec, seed).points {
                    assert!((0..3).all(|k| p[k].abs() <= spec.extent[k] / 2.0), "{} seed {seed}: {p:?}", spec.name);
                }
            }
        }
    }

    #[test]
    fn unknown_category() {
        assert!(CategorySpec::builtin("teapot").is_none());
    }
}
