//! Central finite-difference oracle for taped gradients.

use super::real::Real;
use super::tape::Tape;

/// A scalar function that can be evaluated on plain or taped scalars.
pub trait ScalarFn {
    fn eval<S: Real>(&self, x: &[S]) -> S;
}

#[derive(Clone, Debug)]
pub struct GradCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖, floor)`.
    pub relative_error: f64,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.relative_error.is_finite() && self.relative_error < tol
    }
}

pub fn taped_gradient<F: ScalarFn>(f: &F, x: &[f64]) -> (f64, Vec<f64>) {
    let tape = Tape::new();
    let vars = tape.vars(x);
    let out = f.eval(&vars);
    let g = tape.backward(out);
    (out.value(), g.collect(&vars))
}

pub fn central_differences<F: ScalarFn>(f: &F, x: &[f64], eps: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + eps;
            let up = f.eval::<f64>(&probe);
            probe[i] = x[i] - eps;
            let down = f.eval::<f64>(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * eps)
        })
        .collect()
}

pub fn check_gradient<F: ScalarFn>(f: &F, x: &[f64], eps: f64) -> GradCheck {
    let (_, analytic) = taped_gradient(f, x);
    let numeric = central_differences(f, x, eps);
    let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let relative_error = diff / na.max(nn).max(1e-12);
    GradCheck { analytic, numeric, relative_error }
}
