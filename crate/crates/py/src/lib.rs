//! Python bindings: poses, synthetic data, models, tracking and metrics.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use sixpack_core::encode::ObservedPoint;
use sixpack_core::eval::{self, run_method, score_sequence, BenchConfig, Method, MetricAccumulator};
use sixpack_core::geometry::{self, Rotation, Vec3};
use sixpack_core::model::{CategoryInfo, Checkpoint, ModelConfig};
use sixpack_core::seed::derive;
use sixpack_core::synthdata::{self as sd, CategorySpec, RenderParams, SequenceParams};
use sixpack_core::train::{TrainConfig, Trainer as CoreTrainer};
use sixpack_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::NonFiniteLoss(_) | Error::NonFiniteGradient(_) | Error::LostTrack(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn spec(category: &str) -> PyResult<CategorySpec> {
    CategorySpec::builtin(category)
        .ok_or_else(|| PyValueError::new_err(format!("unknown category {category:?}; known: {}", sd::CATEGORY_NAMES.join(", "))))
}

fn v3(p: [f64; 3]) -> Vec3 {
    Vec3::new(p[0], p[1], p[2])
}

fn points(ps: Vec<[f64; 3]>) -> Vec<Vec3> {
    ps.into_iter().map(v3).collect()
}

/// Rigid transform `x -> R x + t`.
#[pyclass(module = "sixpack", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct Pose {
    inner: geometry::Pose,
}

#[pymethods]
impl Pose {
    /// `rotation` is a row-major 3x3 matrix as nine floats or three rows.
    #[new]
    #[pyo3(signature = (rotation=None, translation=[0.0; 3]))]
    fn new(rotation: Option<Vec<Vec<f64>>>, translation: [f64; 3]) -> PyResult<Self> {
        let r = match rotation {
            None => Rotation::identity(),
            Some(rows) => {
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                let arr: [f64; 9] = flat.try_into().map_err(|_| PyValueError::new_err("rotation needs 9 entries"))?;
                Rotation::from_row_major(&arr).map_err(py_err)?
            }
        };
        Ok(Self { inner: geometry::Pose::new(r, v3(translation)) })
    }

    #[staticmethod]
    fn from_axis_angle(axis: [f64; 3], angle: f64, translation: [f64; 3]) -> PyResult<Self> {
        let a = v3(axis);
        if !(a.norm() > 0.0) {
            return Err(py_err(Error::ZeroVector));
        }
        Ok(Self { inner: geometry::Pose::new(Rotation::from_axis_angle(&a, angle), v3(translation)) })
    }

    #[getter]
    fn rotation(&self) -> [[f64; 3]; 3] {
        let m = self.inner.rotation.matrix();
        [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]
    }

    #[getter]
    fn translation(&self) -> [f64; 3] {
        let t = self.inner.translation;
        [t.x, t.y, t.z]
    }

    fn inverse(&self) -> Self {
        Self { inner: self.inner.inverse() }
    }

    /// `self ∘ base`: apply `base` first.
    fn compose(&self, base: &Pose) -> Self {
        Self { inner: geometry::compose(&self.inner, &base.inner) }
    }

    fn transform(&self, pts: Vec<[f64; 3]>) -> Vec<[f64; 3]> {
        pts.into_iter()
            .map(|p| {
                let q = self.inner.transform_point(&v3(p));
                [q.x, q.y, q.z]
            })
            .collect()
    }

    /// Geodesic angle between the two rotations, radians.
    fn angle_to(&self, other: &Pose) -> f64 {
        self.inner.rotation.angle_to(&other.inner.rotation)
    }

    fn __repr__(&self) -> String {
        let t = self.inner.translation;
        format!("Pose(t=[{:.4}, {:.4}, {:.4}])", t.x, t.y, t.z)
    }
}

/// Least-squares rigid transform taking `src` onto `dst`.
#[pyfunction]
fn align(src: Vec<[f64; 3]>, dst: Vec<[f64; 3]>) -> PyResult<Pose> {
    let inner = geometry::least_squares_align(&points(src), &points(dst)).map_err(py_err)?;
    Ok(Pose { inner })
}

/// Rotation error (degrees) and translation error (centimeters); symmetric
/// categories compare only the symmetry axis.
#[pyfunction]
#[pyo3(signature = (estimate, truth, category=None))]
fn pose_error(estimate: &Pose, truth: &Pose, category: Option<&str>) -> PyResult<(f64, f64)> {
    let axis = match category {
        Some(c) => {
            let s = spec(c)?;
            s.symmetric.then_some(s.axis)
        }
        None => None,
    };
    let e = eval::frame_error(&estimate.inner, &truth.inner, axis.as_ref()).map_err(py_err)?;
    Ok((e.r_deg, e.t_cm))
}

#[pyfunction]
fn categories() -> Vec<&'static str> {
    sd::CATEGORY_NAMES.to_vec()
}

/// A set of rendered sequences for one category.
#[pyclass(module = "sixpack")]
struct Dataset {
    inner: sd::Dataset,
}

#[pymethods]
impl Dataset {
    /// Renders `count` sequences of instances `instance_base ..`.
    #[staticmethod]
    #[pyo3(signature = (category, count, length, seed=0, instance_base=0, motion_scale=1.0, occlusion=0.0, noise_sigma=0.0, clutter_points=0))]
    #[allow(clippy::too_many_arguments)]
    fn generate(
        category: &str,
        count: usize,
        length: usize,
        seed: u64,
        instance_base: u64,
        motion_scale: f64,
        occlusion: f64,
        noise_sigma: f64,
        clutter_points: usize,
    ) -> PyResult<Self> {
        let s = spec(category)?;
        let params = SequenceParams {
            length,
            motion_scale,
            render: RenderParams { occlusion, noise_sigma, clutter_points },
        };
        let sequences = (0..count)
            .map(|i| sd::gen_sequence(&s, instance_base + i as u64, &params, derive(seed, i as u64)))
            .collect();
        Ok(Self { inner: sd::Dataset { category: s.name.clone(), seed, sequences } })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: sd::load_dataset(&path).map_err(py_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        sd::save_dataset(&path, &self.inner).map_err(py_err)
    }

    #[getter]
    fn category(&self) -> &str {
        &self.inner.category
    }

    fn __len__(&self) -> usize {
        self.inner.sequences.len()
    }

    fn frame_count(&self, sequence: usize) -> PyResult<usize> {
        Ok(self.sequence(sequence)?.frames.len())
    }

    fn gt_poses(&self, sequence: usize) -> PyResult<Vec<Pose>> {
        Ok(self.sequence(sequence)?.frames.iter().map(|f| Pose { inner: f.gt_pose }).collect())
    }

    /// Observed positions of one frame.
    fn points(&self, sequence: usize, frame: usize) -> PyResult<Vec<[f64; 3]>> {
        let f = self.sequence(sequence)?.frames.get(frame).ok_or_else(|| PyValueError::new_err("frame out of range"))?;
        Ok(f.points.iter().map(|p| [p.position.x, p.position.y, p.position.z]).collect())
    }
}

impl Dataset {
    fn sequence(&self, i: usize) -> PyResult<&sd::Sequence> {
        self.inner.sequences.get(i).ok_or_else(|| PyValueError::new_err("sequence out of range"))
    }
}

/// A keypoint network for one category.
#[pyclass(module = "sixpack")]
struct Model {
    inner: Checkpoint,
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (category, seed=0, keypoints=8))]
    fn new(category: &str, seed: u64, keypoints: usize) -> PyResult<Self> {
        let s = spec(category)?;
        let config = ModelConfig { keypoints, ..ModelConfig::default() };
        let model = sixpack_core::model::Model::new(config, CategoryInfo::from(&s), seed).map_err(py_err)?;
        Ok(Self { inner: Checkpoint::new(model, None) })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: Checkpoint::load(&path).map_err(py_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    #[getter]
    fn keypoints(&self) -> usize {
        self.inner.model.config.keypoints
    }

    /// Keypoints generated from `points` cropped around `around`. Rows are
    /// `[x, y, z]` or `[x, y, z, r, g, b]`; missing colors are mid-gray.
    #[pyo3(signature = (points, around, seed=0))]
    fn infer(&self, points: Vec<Vec<f64>>, around: &Pose, seed: u64) -> PyResult<Vec<[f64; 3]>> {
        let obs = points
            .into_iter()
            .map(|r| match r[..] {
                [x, y, z] => Ok(ObservedPoint::new(Vec3::new(x, y, z), [0.5; 3])),
                [x, y, z, cr, cg, cb] => Ok(ObservedPoint::new(Vec3::new(x, y, z), [cr, cg, cb])),
                _ => Err(PyValueError::new_err("point rows need 3 or 6 values")),
            })
            .collect::<PyResult<Vec<_>>>()?;
        let inf = self.inner.model.infer(&obs, &around.inner, seed).map_err(py_err)?;
        Ok(inf.keypoints.points.iter().map(|k| [k.x, k.y, k.z]).collect())
    }
}

/// Gradient-descent driver for a `Model`.
#[pyclass(module = "sixpack")]
struct Trainer {
    inner: Option<CoreTrainer>,
    data: Vec<sd::Sequence>,
}

#[pymethods]
impl Trainer {
    #[new]
    #[pyo3(signature = (model, data, steps=2000, batch=16, lr=3e-3, seed=0))]
    fn new(model: &Model, data: &Dataset, steps: u64, batch: usize, lr: f64, seed: u64) -> PyResult<Self> {
        let config = TrainConfig { steps, batch, lr, seed, ..TrainConfig::default() };
        let inner = CoreTrainer::from_checkpoint(model.inner.clone(), config).map_err(py_err)?;
        Ok(Self { inner: Some(inner), data: data.inner.sequences.clone() })
    }

    /// One optimizer step; returns the loss terms by name, plus `total`.
    fn step(&mut self) -> PyResult<Vec<(String, f64)>> {
        let t = self.inner.as_mut().ok_or_else(|| PyRuntimeError::new_err("trainer already finished"))?;
        let log = t.step(&self.data).map_err(py_err)?;
        let mut out = vec![("total".to_string(), log.total)];
        out.extend(sixpack_core::train::LOSS_COLUMNS.iter().zip(log.parts).map(|(n, v)| (n.to_string(), v)));
        Ok(out)
    }

    #[getter]
    fn steps_done(&self) -> u64 {
        self.inner.as_ref().map_or(0, |t| t.step_count())
    }

    /// The current parameters as a new `Model`.
    fn model(&self) -> PyResult<Model> {
        let t = self.inner.as_ref().ok_or_else(|| PyRuntimeError::new_err("trainer already finished"))?;
        Ok(Model { inner: t.checkpoint() })
    }
}

/// Tracks every sequence of `data`; `method` is "6pack" (needs `model`),
/// "icp" or "oracle". Returns per-sequence lists of `(pose, valid)`.
#[pyfunction]
#[pyo3(signature = (data, method, model=None, init_noise=0.02, drop_fraction=0.0, seed=0))]
fn track(
    py: Python<'_>,
    data: &Dataset,
    method: &str,
    model: Option<&Model>,
    init_noise: f64,
    drop_fraction: f64,
    seed: u64,
) -> PyResult<Vec<Vec<(Pose, bool)>>> {
    let s = spec(&data.inner.category)?;
    let crop = model.map(|m| m.inner.model.config.crop_params()).unwrap_or_else(|| ModelConfig::default().crop_params());
    let m = match (method, model) {
        ("6pack", Some(m)) => Method::Learned(&m.inner.model),
        ("6pack", None) => return Err(PyValueError::new_err("method 6pack needs a model")),
        ("icp", _) => Method::Icp(crop),
        ("oracle", _) => Method::Oracle(crop),
        (other, _) => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let bench = BenchConfig { init_noise, drop_fraction, seed, ..BenchConfig::default() };
    let seqs = &data.inner.sequences;
    let out = py.detach(|| run_method(&m, &s, seqs, &bench)).map_err(py_err)?;
    Ok(out.into_iter().map(|seq| seq.into_iter().map(|p| (Pose { inner: p.pose }, p.valid)).collect()).collect())
}

/// Aggregate metrics for tracked sequences against the dataset's ground truth.
#[pyfunction]
fn evaluate(data: &Dataset, tracks: Vec<Vec<(Pose, bool)>>) -> PyResult<Vec<(String, f64)>> {
    let s = spec(&data.inner.category)?;
    if tracks.len() != data.inner.sequences.len() {
        return Err(py_err(Error::LengthMismatch(tracks.len(), data.inner.sequences.len())));
    }
    let mut acc = MetricAccumulator::new(s.symmetric.then_some(s.axis), s.extent);
    for (t, seq) in tracks.iter().zip(&data.inner.sequences) {
        let est: Vec<_> = t.iter().map(|(p, v)| sixpack_core::tracker::TrackedPose { pose: p.inner, valid: *v }).collect();
        for score in score_sequence(&est, seq, &s).map_err(py_err)? {
            acc.push_score(&score);
        }
    }
    let m = acc.finish().ok_or_else(|| PyValueError::new_err("no frames"))?;
    Ok(vec![
        ("5deg5cm".into(), m.five_deg_five_cm),
        ("iou25".into(), m.iou25),
        ("rotation_deg".into(), m.r_err_mean),
        ("translation_cm".into(), m.t_err_mean),
    ])
}

#[pymodule]
fn sixpack(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Pose>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_class::<Trainer>()?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    m.add_function(wrap_pyfunction!(pose_error, m)?)?;
    m.add_function(wrap_pyfunction!(categories, m)?)?;
    m.add_function(wrap_pyfunction!(track, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
