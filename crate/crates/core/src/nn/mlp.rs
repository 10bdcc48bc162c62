use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Fully connected network: `tanh` on hidden layers, linear output.
///
/// Parameters are one flat array; layer `l` stores its `out × in` weights
/// row-major followed by its `out` biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpParams {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Format(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self { sizes: sizes.to_vec(), params: vec![0.0; param_count(sizes)] })
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(&sizes)?;
        if params.len() != m.params.len() {
            return Err(Error::ShapeMismatch { expected: m.params.len(), got: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Format("non-finite parameter".into()));
        }
        m.params = params;
        Ok(m)
    }

    /// Xavier-style weights. Hidden biases are uniform in `[−1, 1]` so that
    /// units on centered inputs are not all odd functions (which would hide
    /// even moments from mean pooling); output biases are zero.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(sizes)?;
        let mut offset = 0;
        let layers = sizes.len() - 1;
        for (l, w) in sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let std = (1.0 / n_in as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            for p in &mut m.params[offset..offset + n_in * n_out] {
                *p = normal.sample(rng);
            }
            if l + 1 < layers {
                for b in &mut m.params[offset + n_in * n_out..offset + n_in * n_out + n_out] {
                    *b = rng.random_range(-1.0..=1.0);
                }
            }
            offset += n_in * n_out + n_out;
        }
        Ok(m)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Mutable view of layer `l` as `(weights, biases)`.
    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let offset: usize = self.sizes[..l + 1].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let layer = &mut self.params[offset..offset + n_in * n_out + n_out];
        layer.split_at_mut(n_in * n_out)
    }

    /// Folds `x ↦ (x − mean) / std` into the first layer so the network
    /// sees standardised inputs without changing its structure.
    pub fn fold_input_standardization(&mut self, mean: &[f64], std: &[f64]) -> Result<()> {
        let n_in = self.input_dim();
        self.check_input(mean.len())?;
        self.check_input(std.len())?;
        if std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Format("standardization needs finite means and positive scales".into()));
        }
        let (w, b) = self.layer_mut(0);
        for (row, bias) in w.chunks_mut(n_in).zip(b.iter_mut()) {
            for ((wk, m), s) in row.iter_mut().zip(mean).zip(std) {
                *wk /= s;
                *bias -= *wk * m;
            }
        }
        Ok(())
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::ShapeMismatch { expected: self.input_dim(), got: len });
        }
        Ok(())
    }

    /// Plain forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        let mut x = input.to_vec();
        let mut offset = 0;
        let layers = self.sizes.len() - 1;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let mut y: Vec<f64> = weights
                .chunks_exact(n_in)
                .zip(bias)
                .map(|(row, b)| row.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() + b)
                .collect();
            if l + 1 < layers {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            x = y;
            offset += n_in * n_out + n_out;
        }
        Ok(x)
    }

    /// Forward pass keeping every layer's activations for [`Self::backward_trace`].
    pub fn forward_trace(&self, input: &[f64]) -> Result<MlpTrace> {
        self.check_input(input.len())?;
        let mut acts = vec![input.to_vec()];
        let mut offset = 0;
        let layers = self.sizes.len() - 1;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let x = acts.last().expect("input");
            let mut y: Vec<f64> = weights
                .chunks_exact(n_in)
                .zip(bias)
                .map(|(row, b)| row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)
                .collect();
            if l + 1 < layers {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
            offset += n_in * n_out + n_out;
        }
        Ok(MlpTrace { acts })
    }

    /// Adds `∂(g_out · output)/∂params` into `grads` and returns
    /// `∂(g_out · output)/∂input`.
    pub fn backward_trace(&self, trace: &MlpTrace, g_out: &[f64], grads: &mut [f64]) -> Vec<f64> {
        assert_eq!(g_out.len(), self.output_dim());
        assert_eq!(grads.len(), self.params.len());
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        let mut delta = g_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let x = &trace.acts[l];
            let weights = &self.params[off..off + n_in * n_out];
            let (gw, gb) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let mut g_in = vec![0.0; n_in];
            for j in 0..n_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                gb[j] += d;
                let row = &weights[j * n_in..(j + 1) * n_in];
                for ((g, xi), (gi, w)) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(x).zip(g_in.iter_mut().zip(row)) {
                    *g += d * xi;
                    *gi += d * w;
                }
            }
            if l > 0 {
                // x holds tanh outputs of the previous layer
                for (g, a) in g_in.iter_mut().zip(x) {
                    *g *= 1.0 - a * a;
                }
            }
            delta = g_in;
        }
        delta
    }

    /// Records every parameter as an input node on `tape`.
    pub fn register<'t>(&self, tape: &'t Tape) -> MlpVars<'t> {
        MlpVars { sizes: self.sizes.clone(), vars: tape.vars(&self.params) }
    }
}

/// Layer activations of one forward pass, input first.
#[derive(Clone, Debug)]
pub struct MlpTrace {
    acts: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("at least the input")
    }
}

/// Parameters of an [`MlpParams`] recorded on a tape.
pub struct MlpVars<'t> {
    sizes: Vec<usize>,
    vars: Vec<Var<'t>>,
}

impl<'t> MlpVars<'t> {
    pub fn vars(&self) -> &[Var<'t>] {
        &self.vars
    }

    /// Forward pass whose input is data (no gradient needed).
    pub fn forward_const(&self, tape: &'t Tape, input: &[f64]) -> Result<Vec<Var<'t>>> {
        self.run(tape, Input::Const(input))
    }

    /// Forward pass through taped inputs.
    pub fn forward(&self, tape: &'t Tape, input: &[Var<'t>]) -> Result<Vec<Var<'t>>> {
        self.run(tape, Input::Taped(input))
    }

    fn run(&self, tape: &'t Tape, input: Input<'_, 't>) -> Result<Vec<Var<'t>>> {
        let len = match input {
            Input::Const(c) => c.len(),
            Input::Taped(v) => v.len(),
        };
        if len != self.sizes[0] {
            return Err(Error::ShapeMismatch { expected: self.sizes[0], got: len });
        }
        let layers = self.sizes.len() - 1;
        let mut offset = 0;
        let mut current: Vec<Var<'t>> = Vec::new();
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.vars[offset..offset + n_in * n_out];
            let bias = &self.vars[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let w_vals = tape.values(weights);
            let (x_vals, x_vars): (Vec<f64>, Option<&[Var<'t>]>) = match (l, input) {
                (0, Input::Const(c)) => (c.to_vec(), None),
                (0, Input::Taped(v)) => (tape.values(v), Some(v)),
                _ => (tape.values(&current), Some(&current[..])),
            };
            let mut next = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let row = &w_vals[j * n_in..(j + 1) * n_in];
                let b = bias[j];
                let value = row.iter().zip(&x_vals).map(|(w, x)| w * x).sum::<f64>() + b.value();
                let w_edges = weights[j * n_in..(j + 1) * n_in].iter().copied().zip(x_vals.iter().copied());
                let out = match x_vars {
                    Some(xv) => {
                        let x_edges = xv.iter().copied().zip(row.iter().copied());
                        tape.push(value, w_edges.chain(x_edges).chain(std::iter::once((b, 1.0))))
                    }
                    None => tape.push(value, w_edges.chain(std::iter::once((b, 1.0)))),
                };
                next.push(if l + 1 < layers {
                    let t = value.tanh();
                    out.unary(t, 1.0 - t * t)
                } else {
                    out
                });
            }
            current = next;
            offset += n_in * n_out + n_out;
        }
        Ok(current)
    }
}

#[derive(Clone, Copy)]
enum Input<'a, 't> {
    Const(&'a [f64]),
    Taped(&'a [Var<'t>]),
}
