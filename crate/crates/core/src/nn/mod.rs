//! Reverse-mode differentiation on a scalar tape, small MLPs and Adam.

mod adam;
pub mod gradcheck;
mod mlp;
pub mod real;
mod tape;

pub use adam::{adam_step, AdamState};
pub use mlp::{MlpParams, MlpTrace, MlpVars};
pub use real::Real;
pub use tape::{Gradients, Tape, Var};

/// Numerically stable softmax (max subtraction).
pub fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax over taped values; each output is one node with partials
/// `∂c_i/∂l_k = c_i (δ_ik − c_k)`.
pub fn softmax_taped<'t>(values: &[Var<'t>]) -> Vec<Var<'t>> {
    let Some(first) = values.first() else { return Vec::new() };
    let tape = first.tape();
    let probs = softmax(&tape.values(values));
    (0..values.len())
        .map(|i| {
            let ci = probs[i];
            let edges = values
                .iter()
                .zip(&probs)
                .enumerate()
                .map(move |(k, (&v, &ck))| (v, ci * (if i == k { 1.0 } else { 0.0 } - ck)));
            tape.push(ci, edges)
        })
        .collect()
}
