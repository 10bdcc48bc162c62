//! Minibatch training on consecutive-frame pairs.
//!
//! The per-point encoder and the per-anchor attention run as dense batched
//! passes with hand-written backward sweeps; only the attention logits,
//! the selected embedding, the keypoint generator and the losses live on the
//! scalar tape. Pooling weights depend only on geometry, so embedding
//! gradients flow to point features through the same weights.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::{build_anchor_grid, crop_volume, encode_points, pool_grid, pool_weights, Crop, CropParams};
use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, SymmetryAxis, Vec3};
use crate::keypoint::losses::{
    anchor_loss, cen_loss, mvc_loss, rotation_loss, sep_loss, sil_loss, sym_mvc_loss, sym_rot_loss, total_loss,
    translation_loss, LossParts, LossWeights,
};
use crate::keypoint::{argmax, generator_input, keypoint_head};
use crate::model::{Checkpoint, Model, OptimizerState};
use crate::nn::real::V3;
use crate::nn::{adam_step, softmax_taped, AdamState, MlpTrace, MlpVars, Real, Tape, Var};
use crate::seed::derive;
use crate::synthdata::Sequence;

/// Loss columns written to the training log, in order.
pub const LOSS_COLUMNS: [&str; 7] = ["mvc", "tra", "rot", "sep", "sil", "cen", "anc"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: u64,
    /// Frame pairs per step.
    pub batch: usize,
    pub lr: f64,
    /// Cosine decay from `lr` to `lr · lr_final` over `steps`.
    pub lr_final: f64,
    pub weights: LossWeights,
    /// Separation margin as a fraction of the crop scale.
    pub sep_margin: f64,
    /// Points kept per training crop.
    pub train_points: usize,
    /// Uniform per-axis translation noise on training crops, meters.
    pub crop_noise: f64,
    /// Rotation noise on training crops, degrees.
    pub crop_noise_deg: f64,
    pub checkpoint_every: u64,
    /// Anchor the generator is trained from.
    pub anchor: AnchorChoice,
    /// Crops used to standardise network inputs before the first step;
    /// zero skips it.
    pub calibrate_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorChoice {
    /// The anchor nearest the true centroid.
    Nearest,
    /// The attention argmax, as at inference.
    Attended,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch: 4,
            lr: 1e-3,
            lr_final: 0.1,
            weights: LossWeights::default(),
            sep_margin: 0.05,
            train_points: 128,
            crop_noise: 0.03,
            crop_noise_deg: 5.0,
            checkpoint_every: 500,
            anchor: AnchorChoice::Attended,
            calibrate_samples: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Settings used for the bundled runs: larger batches and step size, a
    /// strong anchor term so attention trains, and ±45° crop tilts so the
    /// network has seen the rotation errors it meets while tracking.
    pub fn desk_scale() -> Self {
        Self {
            batch: 16,
            lr: 3e-3,
            lr_final: 0.05,
            crop_noise_deg: 45.0,
            weights: LossWeights { w_anc: 100.0, ..LossWeights::default() },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.batch == 0 || self.train_points == 0 {
            return Err(Error::DegenerateInput("batch and train_points must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lr_final) {
            return Err(Error::DegenerateInput("lr_final must be in [0, 1]".into()));
        }
        if !(self.lr > 0.0) || !(self.sep_margin >= 0.0) || !(self.crop_noise >= 0.0) || !(self.crop_noise_deg >= 0.0) {
            return Err(Error::DegenerateInput("lr must be positive and noise levels nonnegative".into()));
        }
        Ok(())
    }

    /// Learning rate used for the update that ends at `step + 1`.
    pub fn lr_at(&self, step: u64) -> f64 {
        let p = (step as f64 / self.steps.max(1) as f64).min(1.0);
        self.lr * (self.lr_final + (1.0 - self.lr_final) * 0.5 * (1.0 + (std::f64::consts::PI * p).cos()))
    }
}

/// Batch-mean losses of one step, columns as in [`LOSS_COLUMNS`].
#[derive(Clone, Debug, PartialEq)]
pub struct StepLog {
    pub step: u64,
    pub total: f64,
    pub parts: [f64; 7],
    /// Pairs that produced a usable crop.
    pub samples: usize,
}

impl StepLog {
    pub fn csv_header() -> String {
        format!("step,total,{}", LOSS_COLUMNS.join(","))
    }

    pub fn csv_row(&self) -> String {
        let mut row = format!("{},{}", self.step, self.total);
        for p in self.parts {
            row.push_str(&format!(",{p}"));
        }
        row
    }
}

pub fn write_log<W: Write>(w: &mut W, logs: &[StepLog], header: bool) -> std::io::Result<()> {
    if header {
        writeln!(w, "{}", StepLog::csv_header())?;
    }
    for l in logs {
        writeln!(w, "{}", l.csv_row())?;
    }
    Ok(())
}

struct FramePass<'t> {
    encoder: Vec<MlpTrace>,
    weights: Vec<Vec<f64>>,
    attention: Vec<MlpTrace>,
    logits: Vec<Var<'t>>,
    selected: usize,
    embedding: Vec<Var<'t>>,
    keypoints: Vec<V3<Var<'t>>>,
    anchor_loss: Var<'t>,
}

fn frame_pass<'t>(
    tape: &'t Tape,
    generator: &MlpVars<'t>,
    model: &Model,
    crop: &Crop,
    gt: &Pose,
    choice: AnchorChoice,
) -> Result<FramePass<'t>> {
    let cfg = &model.config;
    let encoder = crop
        .encoder_inputs()
        .map(|x| model.encoder.forward_trace(&x))
        .collect::<Result<Vec<_>>>()?;
    let anchors = build_anchor_grid(cfg.grid);
    let weights: Vec<Vec<f64>> = anchors.iter().map(|a| pool_weights(a, &crop.normalized, cfg.temperature)).collect();
    let embeddings: Vec<Vec<f64>> = weights
        .iter()
        .map(|w| {
            let mut psi = vec![0.0; cfg.feature_dim];
            for (wj, tr) in w.iter().zip(&encoder) {
                for (acc, v) in psi.iter_mut().zip(tr.output()) {
                    *acc += wj * v;
                }
            }
            psi
        })
        .collect();
    let attention = embeddings
        .iter()
        .map(|psi| model.attention.forward_trace(psi))
        .collect::<Result<Vec<_>>>()?;
    let logits: Vec<Var<'t>> = attention.iter().map(|tr| tape.var(tr.output()[0])).collect();
    let confidences = softmax_taped(&logits);
    let centroid = crop.normalize(&gt.translation);
    let anchor_loss = anchor_loss(&confidences, &anchors, &centroid);
    let selected = match choice {
        AnchorChoice::Nearest => argmax(&anchors.iter().map(|a| -(a - centroid).norm()).collect::<Vec<_>>()),
        AnchorChoice::Attended => argmax(&attention.iter().map(|tr| tr.output()[0]).collect::<Vec<_>>()),
    };
    let embedding = tape.vars(&embeddings[selected]);
    let mut input = embedding.clone();
    input.extend(tape.vars(anchors[selected].as_slice()));
    let out = generator.forward(tape, &input)?;
    let keypoints = keypoint_head(&out, &anchors[selected], crop);
    Ok(FramePass { encoder, weights, attention, logits, selected, embedding, keypoints, anchor_loss })
}

/// Gradients of the dense parts given the tape's gradients at their outputs.
fn dense_backward(model: &Model, pass: &FramePass<'_>, g: &crate::nn::Gradients, enc: &mut [f64], att: &mut [f64]) {
    let g_logits = g.collect(&pass.logits);
    let g_sel = g.collect(&pass.embedding);
    let g_psi: Vec<Vec<f64>> = pass
        .attention
        .iter()
        .zip(&g_logits)
        .enumerate()
        .map(|(i, (tr, gl))| {
            let mut gp = model.attention.backward_trace(tr, &[*gl], att);
            if i == pass.selected {
                gp.iter_mut().zip(&g_sel).for_each(|(a, b)| *a += b);
            }
            gp
        })
        .collect();
    let dim = model.config.feature_dim;
    for (j, tr) in pass.encoder.iter().enumerate() {
        let mut g_phi = vec![0.0; dim];
        for (w, gp) in pass.weights.iter().zip(&g_psi) {
            let wj = w[j];
            g_phi.iter_mut().zip(gp).for_each(|(a, b)| *a += wj * b);
        }
        model.encoder.backward_trace(tr, &g_phi, enc);
    }
}

/// Degenerate keypoint layouts contribute no rotation term.
fn or_zero<'t>(r: Result<Var<'t>>, zero: Var<'t>) -> Result<Var<'t>> {
    match r {
        Err(Error::DegenerateInput(_)) | Err(Error::ZeroVector) => Ok(zero),
        other => other,
    }
}

struct SampleOut {
    grads: [Vec<f64>; 3],
    parts: LossParts<f64>,
    total: f64,
}

/// Training crop around a perturbed ground-truth pose.
fn noisy_crop(seq: &Sequence, t: usize, cfg: &TrainConfig, model: &Model, rng: &mut ChaCha8Rng) -> Result<Crop> {
    let gt = seq.frames[t].gt_pose;
    let n = cfg.crop_noise;
    let shift = if n > 0.0 {
        Vec3::new(rng.random_range(-n..=n), rng.random_range(-n..=n), rng.random_range(-n..=n))
    } else {
        Vec3::zeros()
    };
    let tilt = Rotation::random_small(rng, cfg.crop_noise_deg.to_radians());
    let around = Pose::new(tilt * gt.rotation, gt.translation + shift);
    let params = CropParams {
        enlargement: model.config.enlargement,
        min_points: model.config.min_points,
        max_points: cfg.train_points.max(model.config.min_points),
    };
    crop_volume(&seq.frames[t].points, &around, &model.category.extent(), &params, rng.random())
}

fn sample_gradient(model: &Model, cfg: &TrainConfig, seq: &Sequence, t: usize, seed: u64) -> Result<Option<SampleOut>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let crop_a = match noisy_crop(seq, t - 1, cfg, model, &mut rng) {
        Ok(c) => c,
        Err(Error::EmptyCrop { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let crop_b = match noisy_crop(seq, t, cfg, model, &mut rng) {
        Ok(c) => c,
        Err(Error::EmptyCrop { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let gt_a = seq.frames[t - 1].gt_pose;
    let gt_b = seq.frames[t].gt_pose;
    let delta = gt_b * gt_a.inverse();
    let symmetric = model.category.symmetric;
    let axis: SymmetryAxis = model.category.axis()?;

    let tape = Tape::with_capacity(1 << 14, 1 << 17);
    let generator = model.generator.register(&tape);
    let a = frame_pass(&tape, &generator, model, &crop_a, &gt_a, cfg.anchor)?;
    let b = frame_pass(&tape, &generator, model, &crop_b, &gt_b, cfg.anchor)?;
    let (ka, kb) = (&a.keypoints, &b.keypoints);
    let zero = a.anchor_loss.lift(0.0);
    let observed = |c: &Crop| c.points.iter().map(|p| p.position).collect::<Vec<_>>();
    let margin_a = cfg.sep_margin * crop_a.scale;
    let margin_b = cfg.sep_margin * crop_b.scale;
    let axis_prev = gt_a.rotation.apply(axis.direction());
    let parts = LossParts {
        mvc: mvc_loss(kb, ka, &delta),
        sym_mvc: symmetric.then(|| sym_mvc_loss(kb, ka, &delta, &axis, &gt_b)),
        tra: translation_loss(kb, ka, &delta),
        rot: or_zero(rotation_loss(kb, ka, &delta), zero)?,
        sym_rot: if symmetric { Some(or_zero(sym_rot_loss(kb, ka, &axis_prev, &delta), zero)?) } else { None },
        sep: (sep_loss(ka, margin_a) + sep_loss(kb, margin_b)) * 0.5,
        sil: (sil_loss(ka, &observed(&crop_a)) + sil_loss(kb, &observed(&crop_b))) * 0.5,
        cen: (cen_loss(ka, &gt_a.translation) + cen_loss(kb, &gt_b.translation)) * 0.5,
        anc: (a.anchor_loss + b.anchor_loss) * 0.5,
    };
    let total = total_loss(&parts, &cfg.weights, symmetric);

    let g = tape.backward(total);
    let mut enc = vec![0.0; model.encoder.len()];
    let mut att = vec![0.0; model.attention.len()];
    dense_backward(model, &a, &g, &mut enc, &mut att);
    dense_backward(model, &b, &g, &mut enc, &mut att);
    let grads = [enc, att, g.collect(generator.vars())];
    Ok(Some(SampleOut { grads, parts: parts.values(symmetric), total: total.value() }))
}

/// Per-channel mean and standard deviation, with a floor on the scale.
fn channel_stats<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    let mut n: f64 = 0.0;
    for r in rows {
        for k in 0..dim {
            sum[k] += r[k];
            sq[k] += r[k] * r[k];
        }
        n += 1.0;
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n.max(1.0)).collect();
    let std = sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| (q / n.max(1.0) - m * m).max(0.0).sqrt().max(1e-4))
        .collect();
    (mean, std)
}

/// Folds input standardisation into the first layer of each network, using
/// noisy training crops. Each network is calibrated on the outputs of the
/// already calibrated stages before it.
pub fn calibrate(model: &mut Model, data: &[Sequence], cfg: &TrainConfig) -> Result<()> {
    let frames: Vec<(usize, usize)> =
        data.iter().enumerate().flat_map(|(s, seq)| (0..seq.frames.len()).map(move |t| (s, t))).collect();
    if frames.is_empty() || cfg.calibrate_samples == 0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive_labeled(cfg.seed, "calibrate"));
    let mut crops = Vec::new();
    for _ in 0..cfg.calibrate_samples {
        let (s, t) = frames[rng.random_range(0..frames.len())];
        match noisy_crop(&data[s], t, cfg, model, &mut rng) {
            Ok(c) => crops.push(c),
            Err(Error::EmptyCrop { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if crops.is_empty() {
        return Ok(());
    }
    let inputs: Vec<[f64; 6]> = crops.iter().flat_map(|c| c.encoder_inputs().collect::<Vec<_>>()).collect();
    let (mean, std) = channel_stats(inputs.iter().map(|x| &x[..]), model.encoder.input_dim());
    model.encoder.fold_input_standardization(&mean, &std)?;

    let cfg_m = &model.config;
    let mut embeddings = Vec::new();
    for c in &crops {
        let features = encode_points(c, &model.encoder)?;
        embeddings.extend(pool_grid(cfg_m.grid, c, &features, cfg_m.temperature).embeddings);
    }
    let (mean, std) = channel_stats(embeddings.iter().map(Vec::as_slice), cfg_m.feature_dim);
    model.attention.fold_input_standardization(&mean, &std)?;

    let anchors = build_anchor_grid(cfg_m.grid);
    let gen_inputs: Vec<Vec<f64>> = embeddings
        .iter()
        .zip(anchors.iter().cycle())
        .map(|(e, a)| generator_input(e, a))
        .collect();
    let (mean, std) = channel_stats(gen_inputs.iter().map(Vec::as_slice), model.generator.input_dim());
    model.generator.fold_input_standardization(&mean, &std)
}

pub struct Trainer {
    pub model: Model,
    pub optimizer: OptimizerState,
    pub config: TrainConfig,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizer = OptimizerState {
            step: 0,
            encoder: AdamState::new(model.encoder.len()),
            attention: AdamState::new(model.attention.len()),
            generator: AdamState::new(model.generator.len()),
        };
        Ok(Self { model, optimizer, config })
    }

    /// Resumes from a checkpoint; a checkpoint without optimizer state starts
    /// fresh moments at step 0.
    pub fn from_checkpoint(ckpt: Checkpoint, config: TrainConfig) -> Result<Self> {
        let mut t = Self::new(ckpt.model, config)?;
        if let Some(opt) = ckpt.optimizer {
            t.optimizer = opt;
        }
        Ok(t)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self.model.clone(), Some(self.optimizer.clone()))
    }

    pub fn step_count(&self) -> u64 {
        self.optimizer.step
    }

    /// One optimizer step on a random minibatch of consecutive-frame pairs.
    pub fn step(&mut self, data: &[Sequence]) -> Result<StepLog> {
        let pairs: Vec<(usize, usize)> = data
            .iter()
            .enumerate()
            .flat_map(|(s, seq)| (1..seq.frames.len()).map(move |t| (s, t)))
            .collect();
        if pairs.is_empty() {
            return Err(Error::DegenerateInput("training data has no consecutive frame pairs".into()));
        }
        let step = self.optimizer.step;
        if step == 0 {
            calibrate(&mut self.model, data, &self.config)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive(self.config.seed, step));
        let picks: Vec<((usize, usize), u64)> =
            (0..self.config.batch).map(|_| (pairs[rng.random_range(0..pairs.len())], rng.random())).collect();
        let model = &self.model;
        let cfg = &self.config;
        let outs = picks
            .par_iter()
            .map(|((s, t), seed)| sample_gradient(model, cfg, &data[*s], *t, *seed))
            .collect::<Result<Vec<_>>>()?;
        let used: Vec<SampleOut> = outs.into_iter().flatten().collect();
        let mut log = StepLog { step: step + 1, total: 0.0, parts: [0.0; 7], samples: used.len() };
        self.optimizer.step += 1;
        if used.is_empty() {
            return Ok(log);
        }
        let n = used.len() as f64;
        let mut grads = [
            vec![0.0; self.model.encoder.len()],
            vec![0.0; self.model.attention.len()],
            vec![0.0; self.model.generator.len()],
        ];
        for s in &used {
            log.total += s.total / n;
            let p = &s.parts;
            for (acc, v) in log.parts.iter_mut().zip([p.mvc, p.tra, p.rot, p.sep, p.sil, p.cen, p.anc]) {
                *acc += v / n;
            }
            for (acc, g) in grads.iter_mut().zip(&s.grads) {
                for (a, v) in acc.iter_mut().zip(g) {
                    *a += v / n;
                }
            }
        }
        if !log.total.is_finite() {
            return Err(Error::NonFiniteLoss(step + 1));
        }
        let lr = self.config.lr_at(step);
        let opt = &mut self.optimizer;
        adam_step(self.model.encoder.params_mut(), &grads[0], &mut opt.encoder, lr)?;
        adam_step(self.model.attention.params_mut(), &grads[1], &mut opt.attention, lr)?;
        adam_step(self.model.generator.params_mut(), &grads[2], &mut opt.generator, lr)?;
        Ok(log)
    }

    /// Runs until `self.step_count() == until`, calling `on_step` after each.
    pub fn run<F>(&mut self, data: &[Sequence], until: u64, mut on_step: F) -> Result<Vec<StepLog>>
    where
        F: FnMut(&StepLog, &Trainer) -> Result<()>,
    {
        let mut logs = Vec::new();
        while self.optimizer.step < until {
            let log = self.step(data)?;
            on_step(&log, self)?;
            logs.push(log);
        }
        Ok(logs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CategoryInfo, ModelConfig};
    use crate::nn::gradcheck::central_differences;
    use crate::synthdata::{gen_sequence, CategorySpec, SequenceParams};

    fn small_config() -> ModelConfig {
        ModelConfig {
            keypoints: 4,
            grid: 2,
            feature_dim: 5,
            encoder_hidden: 4,
            attention_hidden: 3,
            generator_hidden: vec![6],
            ..ModelConfig::default()
        }
    }

    fn data(name: &str) -> (CategorySpec, Vec<Sequence>) {
        let spec = CategorySpec::builtin(name).unwrap();
        let seqs = vec![gen_sequence(&spec, 1, &SequenceParams { length: 6, ..SequenceParams::default() }, 2)];
        (spec, seqs)
    }

    /// Loss as a plain function of a flat parameter vector, for finite
    /// differences of the full pipeline.
    fn loss_at(model: &Model, cfg: &TrainConfig, seq: &Sequence, net: usize, params: &[f64]) -> f64 {
        let mut m = model.clone();
        let target = match net {
            0 => &mut m.encoder,
            1 => &mut m.attention,
            _ => &mut m.generator,
        };
        target.params_mut().copy_from_slice(params);
        sample_gradient(&m, cfg, seq, 1, 5).unwrap().unwrap().total
    }

    #[test]
    fn pipeline_gradient_matches_finite_differences() {
        for name in ["laptop", "bowl"] {
            let (spec, seqs) = data(name);
            let model = Model::new(small_config(), CategoryInfo::from(&spec), 3).unwrap();
            let cfg = TrainConfig { train_points: 40, ..TrainConfig::default() };
            let out = sample_gradient(&model, &cfg, &seqs[0], 1, 5).unwrap().unwrap();
            for (net, params) in [&model.encoder, &model.attention, &model.generator].into_iter().enumerate() {
                let f = |x: &[f64]| loss_at(&model, &cfg, &seqs[0], net, x);
                let numeric = central_differences(&FnWrap(&f), params.params(), 1e-6);
                let analytic = &out.grads[net];
                let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let scale = numeric.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
                assert!(diff / scale < 1e-4, "{name} net {net}: {}", diff / scale);
            }
        }
    }

    struct FnWrap<'a>(&'a dyn Fn(&[f64]) -> f64);

    impl crate::nn::gradcheck::ScalarFn for FnWrap<'_> {
        fn eval<S: Real>(&self, x: &[S]) -> S {
            let v: Vec<f64> = x.iter().map(|s| s.value()).collect();
            x[0].lift((self.0)(&v))
        }
    }

    #[test]
    fn training_is_deterministic_and_resumable() {
        let (spec, seqs) = data("can");
        let model = Model::new(small_config(), CategoryInfo::from(&spec), 3).unwrap();
        let cfg = TrainConfig { batch: 2, train_points: 40, ..TrainConfig::default() };
        let mut a = Trainer::new(model.clone(), cfg.clone()).unwrap();
        let logs = a.run(&seqs, 4, |_, _| Ok(())).unwrap();
        assert_eq!(logs.len(), 4);
        let mut b = Trainer::new(model, cfg.clone()).unwrap();
        b.run(&seqs, 2, |_, _| Ok(())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        b.checkpoint().save(&path).unwrap();
        let mut c = Trainer::from_checkpoint(Checkpoint::load(&path).unwrap(), cfg).unwrap();
        c.run(&seqs, 4, |_, _| Ok(())).unwrap();
        assert_eq!(a.model, c.model);
        assert_eq!(a.optimizer, c.optimizer);
    }

    #[test]
    fn log_format() {
        let log = StepLog { step: 1, total: 0.5, parts: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7], samples: 1 };
        assert_eq!(StepLog::csv_header(), "step,total,mvc,tra,rot,sep,sil,cen,anc");
        assert_eq!(log.csv_row().split(',').count(), 9);
    }
}
