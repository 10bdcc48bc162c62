//! Append-only scalar tape for reverse-mode differentiation.
//!
//! Each node stores its value plus a run of `(parent, ∂node/∂parent)` edges.
//! Nodes may have any number of parents, so a whole dot product or a softmax
//! output is one node. Parents always precede children, and the backward
//! sweep visits every node once in reverse order.

use std::cell::RefCell;
use std::fmt;

#[derive(Default)]
struct TapeData {
    values: Vec<f64>,
    /// `edge_start[i]..edge_start[i + 1]` are node `i`'s edges.
    edge_start: Vec<usize>,
    parents: Vec<u32>,
    partials: Vec<f64>,
}

#[derive(Default)]
pub struct Tape {
    data: RefCell<TapeData>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: u32,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}({})", self.index, self.value())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize, edges: usize) -> Self {
        let mut data = TapeData {
            values: Vec::with_capacity(nodes),
            edge_start: Vec::with_capacity(nodes + 1),
            parents: Vec::with_capacity(edges),
            partials: Vec::with_capacity(edges),
        };
        data.edge_start.push(0);
        Self { data: RefCell::new(data) }
    }

    pub fn len(&self) -> usize {
        self.data.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edge_count(&self) -> usize {
        self.data.borrow().parents.len()
    }

    /// Independent input node.
    pub fn var(&self, value: f64) -> Var<'_> {
        self.push(value, std::iter::empty())
    }

    /// Input nodes for a whole slice; their indices are contiguous.
    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    /// Node with the given value and `(parent, partial)` edges.
    pub fn push<'t, I>(&'t self, value: f64, edges: I) -> Var<'t>
    where
        I: IntoIterator<Item = (Var<'t>, f64)>,
    {
        let mut d = self.data.borrow_mut();
        if d.edge_start.is_empty() {
            d.edge_start.push(0);
        }
        let index = d.values.len() as u32;
        for (p, w) in edges {
            debug_assert!(std::ptr::eq(p.tape, self), "parent from another tape");
            debug_assert!(p.index < index);
            d.parents.push(p.index);
            d.partials.push(w);
        }
        d.values.push(value);
        let end = d.parents.len();
        d.edge_start.push(end);
        Var { tape: self, index }
    }

    pub fn value(&self, v: Var<'_>) -> f64 {
        self.data.borrow().values[v.index as usize]
    }

    pub fn values(&self, vars: &[Var<'_>]) -> Vec<f64> {
        let d = self.data.borrow();
        vars.iter().map(|v| d.values[v.index as usize]).collect()
    }

    /// Adjoints of `output` with respect to every node recorded before it.
    pub fn backward(&self, output: Var<'_>) -> Gradients {
        let d = self.data.borrow();
        let out = output.index as usize;
        let mut adj = vec![0.0; out + 1];
        adj[out] = 1.0;
        for i in (0..=out).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            for e in d.edge_start[i]..d.edge_start[i + 1] {
                adj[d.parents[e] as usize] += a * d.partials[e];
            }
        }
        Gradients { adjoints: adj }
    }
}

/// Result of a backward sweep, indexed by node.
#[derive(Clone, Debug)]
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    pub fn get(&self, v: Var<'_>) -> f64 {
        self.get_index(v.index as usize)
    }

    pub fn get_index(&self, index: usize) -> f64 {
        self.adjoints.get(index).copied().unwrap_or(0.0)
    }

    pub fn collect(&self, vars: &[Var<'_>]) -> Vec<f64> {
        vars.iter().map(|&v| self.get(v)).collect()
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.tape.value(*self)
    }

    pub fn index(&self) -> usize {
        self.index as usize
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub(crate) fn unary(self, value: f64, partial: f64) -> Self {
        self.tape.push(value, [(self, partial)])
    }

    pub(crate) fn binary(self, other: Self, value: f64, da: f64, db: f64) -> Self {
        self.tape.push(value, [(self, da), (other, db)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Real;

    #[test]
    fn square_gradient() {
        let t = Tape::new();
        let x = t.var(3.0);
        let y = x * x;
        assert_eq!(y.value(), 9.0);
        assert_eq!(t.backward(y).get(x), 6.0);
    }

    #[test]
    fn product_gradient() {
        let t = Tape::new();
        let (x, y) = (t.var(2.0), t.var(5.0));
        let g = t.backward(x * y);
        assert_eq!((g.get(x), g.get(y)), (5.0, 2.0));
    }

    #[test]
    fn output_gradient_is_one() {
        let t = Tape::new();
        let x = t.var(1.5);
        let y = x.tanh() + 2.0;
        assert_eq!(t.backward(y).get(y), 1.0);
    }

    #[test]
    fn parents_precede_children() {
        let t = Tape::new();
        let a = t.var(1.0);
        let b = a * 2.0 + a;
        let c = b * a;
        assert!(a.index() < b.index() && b.index() < c.index());
        assert_eq!(t.backward(c).get(a), 6.0); // c = 3a²
    }
}
