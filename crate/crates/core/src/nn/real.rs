//! Scalar abstraction shared by plain `f64` evaluation and taped evaluation.
//!
//! Loss functions are written once against [`Real`]; instantiating them with
//! `f64` gives values (and finite differences), with [`Var`] gives gradients.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::tape::Var;

pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(self) -> f64;
    /// A constant living alongside `self` (same tape, if any).
    fn lift(self, v: f64) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn asin(self) -> Self;
    fn acos(self) -> Self;
    fn atan2(self, x: Self) -> Self;
    fn abs(self) -> Self;
    /// `max(self, 0)`.
    fn relu(self) -> Self;
    fn clamp(self, lo: f64, hi: f64) -> Self;
    /// Node with an externally computed value and partials w.r.t. `inputs`.
    /// `inputs` must be nonempty.
    fn custom(inputs: &[Self], value: f64, partials: &[f64]) -> Self;
}

impl Real for f64 {
    fn value(self) -> f64 {
        self
    }
    fn lift(self, v: f64) -> Self {
        v
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn asin(self) -> Self {
        f64::asin(self)
    }
    fn acos(self) -> Self {
        f64::acos(self)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn relu(self) -> Self {
        self.max(0.0)
    }
    fn clamp(self, lo: f64, hi: f64) -> Self {
        f64::clamp(self, lo, hi)
    }
    fn custom(_inputs: &[Self], value: f64, _partials: &[f64]) -> Self {
        value
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, self.value() + rhs.value(), 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, self.value() - rhs.value(), 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self.value(), rhs.value());
        self.binary(rhs, a * b, b, a)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let (a, b) = (self.value(), rhs.value());
        self.binary(rhs, a / b, 1.0 / b, -a / (b * b))
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.value(), -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        self.unary(self.value() + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        self.unary(self.value() - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.unary(self.value() * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.unary(self.value() / rhs, 1.0 / rhs)
    }
}

impl<'t> Real for Var<'t> {
    fn value(self) -> f64 {
        Var::value(&self)
    }
    fn lift(self, v: f64) -> Self {
        self.tape().var(v)
    }
    fn sqrt(self) -> Self {
        // zero subgradient at the kink keeps norms of coincident points finite
        let s = self.value().sqrt();
        self.unary(s, if s > 0.0 { 0.5 / s } else { 0.0 })
    }
    fn exp(self) -> Self {
        let e = self.value().exp();
        self.unary(e, e)
    }
    fn ln(self) -> Self {
        let x = self.value();
        self.unary(x.ln(), 1.0 / x)
    }
    fn tanh(self) -> Self {
        let t = self.value().tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn asin(self) -> Self {
        let x = self.value();
        let d = 1.0 - x * x;
        self.unary(x.asin(), if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
    }
    fn acos(self) -> Self {
        let x = self.value();
        let d = 1.0 - x * x;
        self.unary(x.acos(), if d > 0.0 { -1.0 / d.sqrt() } else { 0.0 })
    }
    fn atan2(self, x: Self) -> Self {
        let (yv, xv) = (self.value(), x.value());
        let r2 = xv * xv + yv * yv;
        if r2 == 0.0 {
            return self.binary(x, yv.atan2(xv), 0.0, 0.0);
        }
        self.binary(x, yv.atan2(xv), xv / r2, -yv / r2)
    }
    fn abs(self) -> Self {
        let x = self.value();
        self.unary(x.abs(), if x < 0.0 { -1.0 } else { 1.0 })
    }
    fn relu(self) -> Self {
        let x = self.value();
        if x > 0.0 {
            self.unary(x, 1.0)
        } else {
            self.unary(0.0, 0.0)
        }
    }
    fn clamp(self, lo: f64, hi: f64) -> Self {
        let x = self.value();
        if x < lo {
            self.unary(lo, 0.0)
        } else if x > hi {
            self.unary(hi, 0.0)
        } else {
            self.unary(x, 1.0)
        }
    }
    fn custom(inputs: &[Self], value: f64, partials: &[f64]) -> Self {
        assert!(!inputs.is_empty(), "custom node needs at least one input");
        assert_eq!(inputs.len(), partials.len());
        inputs[0]
            .tape()
            .push(value, inputs.iter().copied().zip(partials.iter().copied()))
    }
}

/// `Σ terms`, keeping the result on the terms' tape. `terms` must be nonempty.
pub fn sum<S: Real>(terms: &[S]) -> S {
    let partials = vec![1.0; terms.len()];
    let value = terms.iter().map(|t| t.value()).sum();
    S::custom(terms, value, &partials)
}

/// 3-vectors over a [`Real`] scalar.
pub type V3<S> = [S; 3];

pub fn sub3<S: Real>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add3<S: Real>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn dot3<S: Real>(a: &V3<S>, b: &V3<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn dot3c<S: Real>(a: &V3<S>, c: &[f64; 3]) -> S {
    a[0] * c[0] + a[1] * c[1] + a[2] * c[2]
}

pub fn norm3<S: Real>(a: &V3<S>) -> S {
    dot3(a, a).sqrt()
}

pub fn cross3<S: Real>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn scale3<S: Real>(a: &V3<S>, c: f64) -> V3<S> {
    [a[0] * c, a[1] * c, a[2] * c]
}

pub fn add3c<S: Real>(a: &V3<S>, c: &[f64; 3]) -> V3<S> {
    [a[0] + c[0], a[1] + c[1], a[2] + c[2]]
}

/// `M · a` for a constant row-major 3×3 matrix.
pub fn matvec3<S: Real>(m: &[[f64; 3]; 3], a: &V3<S>) -> V3<S> {
    [dot3c(a, &m[0]), dot3c(a, &m[1]), dot3c(a, &m[2])]
}

/// Mean of a nonempty list of 3-vectors.
pub fn mean3<S: Real>(points: &[V3<S>]) -> V3<S> {
    let n = points.len() as f64;
    std::array::from_fn(|k| {
        let col: Vec<S> = points.iter().map(|p| p[k]).collect();
        sum(&col) / n
    })
}

pub fn values3<S: Real>(a: &V3<S>) -> [f64; 3] {
    [a[0].value(), a[1].value(), a[2].value()]
}

#[cfg(test)]
mod tests {
    use super::super::Tape;
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn unary_derivatives_match_finite_differences() {
        let cases: Vec<(fn(Var) -> Var, fn(f64) -> f64, f64)> = vec![
            (|v| v.sqrt(), f64::sqrt, 1.7),
            (|v| v.exp(), f64::exp, 0.3),
            (|v| v.ln(), f64::ln, 2.5),
            (|v| v.tanh(), f64::tanh, -0.4),
            (|v| v.asin(), f64::asin, 0.35),
            (|v| v.acos(), f64::acos, -0.6),
            (|v| v.abs(), f64::abs, -1.2),
            (|v| v.relu(), |x| x.max(0.0), 0.8),
        ];
        for (tf, ff, x0) in cases {
            let t = Tape::new();
            let x = t.var(x0);
            let y = tf(x);
            assert!((y.value() - ff(x0)).abs() < 1e-15);
            let g = t.backward(y).get(x);
            assert!((g - fd(ff, x0)).abs() < 1e-7, "{g} vs {}", fd(ff, x0));
        }
    }

    #[test]
    fn atan2_partials() {
        let t = Tape::new();
        let (y, x) = (t.var(0.7), t.var(-0.2));
        let g = t.backward(y.atan2(x));
        assert!((g.get(y) - fd(|v| v.atan2(-0.2), 0.7)).abs() < 1e-7);
        assert!((g.get(x) - fd(|v| 0.7f64.atan2(v), -0.2)).abs() < 1e-7);
    }

    #[test]
    fn division_and_sum() {
        let t = Tape::new();
        let (a, b) = (t.var(3.0), t.var(4.0));
        let s = sum(&[a / b, a * 2.0, b - 1.0]);
        let g = t.backward(s);
        assert!((g.get(a) - (0.25 + 2.0)).abs() < 1e-15);
        assert!((g.get(b) - (-3.0 / 16.0 + 1.0)).abs() < 1e-15);
    }
}
