//! Reverse-mode differentiation over a linear tape.
//!
//! Every operation appends one node whose inputs are earlier nodes, so the
//! tape is topologically ordered by construction and a single reverse sweep
//! visits each node once. Leaves may borrow their values (parameters, graph
//! operators) for the lifetime of the tape, which avoids copying weights on
//! every forward pass.

use std::borrow::Cow;

use super::tensor::{matmul_into, matmul_nt_into, matmul_tn_into, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
    Sigmoid,
    Tanh,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    LeftScalar,
    RightScalar,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var, Broadcast),
    Sub(Var, Var, Broadcast),
    Mul(Var, Var, Broadcast),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Softmax(Var),
    Sum(Var),
    Mean(Var),
    Element(Var, usize),
}

#[derive(Debug)]
struct Node<'a> {
    value: Cow<'a, Tensor>,
    requires_grad: bool,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    visits: Vec<u32>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }

    /// Number of times the reverse sweep processed `var` (0 or 1).
    pub fn visit_count(&self, var: Var) -> u32 {
        self.visits.get(var.0).copied().unwrap_or(0)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor>, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_owned(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(Cow::Owned(value), requires_grad, op)
    }

    /// Records an owned leaf.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(Cow::Owned(value), requires_grad, Op::Leaf)
    }

    /// Records a borrowed leaf; nothing is copied.
    pub fn leaf_ref(&mut self, value: &'a Tensor, requires_grad: bool) -> Var {
        self.push(Cow::Borrowed(value), requires_grad, Op::Leaf)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.is_matrix() || !bv.is_matrix() || av.cols() != bv.rows() {
            return Err(Error::shape("matmul", av.shape(), bv.shape()));
        }
        let (m, k, n) = (av.rows(), av.cols(), bv.cols());
        let mut out = vec![0.0; m * n];
        matmul_into(av.data(), bv.data(), &mut out, m, k, n);
        let value = Tensor::matrix(m, n, out)?;
        Ok(self.push_owned(value, Op::MatMul(a, b), &[a, b]))
    }

    fn broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<Broadcast> {
        let (sa, sb) = (self.value(a), self.value(b));
        if sa.shape() == sb.shape() {
            Ok(Broadcast::Same)
        } else if sa.len() == 1 {
            Ok(Broadcast::LeftScalar)
        } else if sb.len() == 1 {
            Ok(Broadcast::RightScalar)
        } else {
            Err(Error::shape(op, sa.shape(), sb.shape()))
        }
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<(Tensor, Broadcast)> {
        let mode = self.broadcast(name, a, b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let value = match mode {
            Broadcast::Same => {
                let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y));
                Tensor::new(av.shape().to_vec(), data.collect())?
            }
            Broadcast::LeftScalar => {
                let s = av.data()[0];
                bv.map(|y| f(s, y))
            }
            Broadcast::RightScalar => {
                let s = bv.data()[0];
                av.map(|x| f(x, s))
            }
        };
        Ok((value, mode))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (value, mode) = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push_owned(value, Op::Add(a, b, mode), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (value, mode) = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push_owned(value, Op::Sub(a, b, mode), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (value, mode) = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push_owned(value, Op::Mul(a, b, mode), &[a, b]))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push_owned(value, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push_owned(value, Op::Tanh(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push_owned(value, Op::Relu(a), &[a])
    }

    /// Dispatches one of the elementwise operations by tag.
    pub fn elementwise(&mut self, op: ElementwiseOp, args: &[Var]) -> Result<Var> {
        let arity = match op {
            ElementwiseOp::Add | ElementwiseOp::Sub | ElementwiseOp::Mul => 2,
            _ => 1,
        };
        if args.len() != arity {
            return Err(Error::Usage(format!(
                "{op:?} takes {arity} argument(s), got {}",
                args.len()
            )));
        }
        match op {
            ElementwiseOp::Add => self.add(args[0], args[1]),
            ElementwiseOp::Sub => self.sub(args[0], args[1]),
            ElementwiseOp::Mul => self.mul(args[0], args[1]),
            ElementwiseOp::Sigmoid => Ok(self.sigmoid(args[0])),
            ElementwiseOp::Tanh => Ok(self.tanh(args[0])),
            ElementwiseOp::Relu => Ok(self.relu(args[0])),
        }
    }

    /// Multiplies by a constant scalar.
    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let c = self.constant(Tensor::scalar(factor));
        self.mul(c, a)
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        let one = self.constant(Tensor::scalar(1.0));
        self.sub(one, a)
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| Error::Usage("concat of an empty list".into()))?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(Error::Usage(format!(
                "concat axis {axis} out of range for rank {}",
                base.len()
            )));
        }
        let mut out_shape = base.clone();
        out_shape[axis] = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible =
                s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(Error::shape("concat", &base, s));
            }
            out_shape[axis] += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push_owned(
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            inputs,
        ))
    }

    /// Softmax over all entries, with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.data().iter().any(|x| x.is_nan()) {
            return Err(Error::Numeric("softmax input contains NaN".into()));
        }
        let max = t.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = t.data().iter().map(|&x| (x - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let value = Tensor::new(t.shape().to_vec(), exps.iter().map(|e| e / total).collect())?;
        Ok(self.push_owned(value, Op::Softmax(a), &[a]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.value(a).data().iter().sum();
        self.push_owned(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s: f64 = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push_owned(Tensor::scalar(s), Op::Mean(a), &[a])
    }

    /// Extracts one entry (flat index) as a scalar.
    pub fn element(&mut self, a: Var, index: usize) -> Result<Var> {
        let t = self.value(a);
        let x = *t
            .data()
            .get(index)
            .ok_or_else(|| Error::Usage(format!("element index {index} out of range for {:?}", t.shape())))?;
        Ok(self.push_owned(Tensor::scalar(x), Op::Element(a, index), &[a]))
    }

    /// Runs the reverse sweep from a scalar `loss`, consuming the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::Usage("backward on an empty tape".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        let mut visits = vec![0u32; n];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..n).rev() {
            let Some(g) = grads[idx].take() else { continue };
            visits[idx] += 1;
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, node)| {
                let g = g.filter(|_| node.requires_grad)?;
                Some(Tensor::new(node.value.shape().to_vec(), g).expect("gradient shape"))
            })
            .collect();
        Ok(Gradients { grads, visits })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], var: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[var.0].requires_grad {
            return;
        }
        let len = self.nodes[var.0].value.len();
        let slot = grads[var.0].get_or_insert_with(|| vec![0.0; len]);
        f(slot);
    }

    fn accumulate_binary(
        &self,
        grads: &mut [Option<Vec<f64>>],
        a: Var,
        b: Var,
        mode: Broadcast,
        g: &[f64],
        da: impl Fn(usize) -> f64,
        db: impl Fn(usize) -> f64,
    ) {
        match mode {
            Broadcast::Same => {
                self.accumulate(grads, a, |s| s.iter_mut().enumerate().for_each(|(i, x)| *x += da(i)));
                self.accumulate(grads, b, |s| s.iter_mut().enumerate().for_each(|(i, x)| *x += db(i)));
            }
            Broadcast::LeftScalar => {
                self.accumulate(grads, a, |s| s[0] += (0..g.len()).map(&da).sum::<f64>());
                self.accumulate(grads, b, |s| s.iter_mut().enumerate().for_each(|(i, x)| *x += db(i)));
            }
            Broadcast::RightScalar => {
                self.accumulate(grads, a, |s| s.iter_mut().enumerate().for_each(|(i, x)| *x += da(i)));
                self.accumulate(grads, b, |s| s[0] += (0..g.len()).map(&db).sum::<f64>());
            }
        }
    }

    fn propagate(&self, node: &Node<'a>, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let (av, bv) = (self.value(a), self.value(b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                // dA = dC * B^T, dB = A^T * dC
                self.accumulate(grads, a, |s| matmul_nt_into(g, bv.data(), s, m, n, k));
                self.accumulate(grads, b, |s| matmul_tn_into(av.data(), g, s, m, k, n));
            }
            &Op::Add(a, b, mode) => {
                self.accumulate_binary(grads, a, b, mode, g, |i| g[i], |i| g[i]);
            }
            &Op::Sub(a, b, mode) => {
                self.accumulate_binary(grads, a, b, mode, g, |i| g[i], |i| -g[i]);
            }
            &Op::Mul(a, b, mode) => {
                let (av, bv) = (self.value(a).data(), self.value(b).data());
                let pick = |d: &[f64], i: usize| if d.len() == 1 { d[0] } else { d[i] };
                self.accumulate_binary(grads, a, b, mode, g, |i| g[i] * pick(bv, i), |i| g[i] * pick(av, i));
            }
            &Op::Sigmoid(a) => {
                let y = node.value.data();
                self.accumulate(grads, a, |s| {
                    for ((x, &gi), &yi) in s.iter_mut().zip(g).zip(y) {
                        *x += gi * yi * (1.0 - yi);
                    }
                });
            }
            &Op::Tanh(a) => {
                let y = node.value.data();
                self.accumulate(grads, a, |s| {
                    for ((x, &gi), &yi) in s.iter_mut().zip(g).zip(y) {
                        *x += gi * (1.0 - yi * yi);
                    }
                });
            }
            &Op::Relu(a) => {
                let input = self.value(a).data();
                self.accumulate(grads, a, |s| {
                    for ((x, &gi), &xi) in s.iter_mut().zip(g).zip(input) {
                        if xi > 0.0 {
                            *x += gi;
                        }
                    }
                });
            }
            Op::Concat { inputs, axis } => {
                let shape = node.value.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let row = shape[*axis] * inner;
                let mut offset = 0;
                for &v in inputs {
                    let chunk = self.shape(v)[*axis] * inner;
                    self.accumulate(grads, v, |s| {
                        for o in 0..outer {
                            let src = &g[o * row + offset..o * row + offset + chunk];
                            for (x, &gi) in s[o * chunk..(o + 1) * chunk].iter_mut().zip(src) {
                                *x += gi;
                            }
                        }
                    });
                    offset += chunk;
                }
            }
            &Op::Softmax(a) => {
                let y = node.value.data();
                let dot: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                self.accumulate(grads, a, |s| {
                    for ((x, &gi), &yi) in s.iter_mut().zip(g).zip(y) {
                        *x += yi * (gi - dot);
                    }
                });
            }
            &Op::Sum(a) => {
                self.accumulate(grads, a, |s| s.iter_mut().for_each(|x| *x += g[0]));
            }
            &Op::Mean(a) => {
                let scale = g[0] / self.value(a).len() as f64;
                self.accumulate(grads, a, |s| s.iter_mut().for_each(|x| *x += scale));
            }
            &Op::Element(a, index) => {
                self.accumulate(grads, a, |s| s[index] += g[0]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_values() {
        let mut tape = Tape::new();
        let i = tape.constant(Tensor::identity(2));
        let m = tape.constant(mat(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let out = tape.matmul(i, m).unwrap();
        assert_eq!(tape.value(out), tape.value(m));

        let a = tape.constant(mat(&[&[1.0, 2.0]]));
        let b = tape.constant(mat(&[&[3.0], &[4.0]]));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3] vs [2, 3]"), "{err}");
    }

    #[test]
    fn activations_at_known_points() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::scalar(0.0));
        let s = tape.sigmoid(z);
        let t = tape.tanh(z);
        let neg = tape.constant(Tensor::scalar(-1.0));
        let r = tape.relu(neg);
        assert_eq!(tape.value(s).data(), &[0.5]);
        assert_eq!(tape.value(t).data(), &[0.0]);
        assert_eq!(tape.value(r).data(), &[0.0]);
    }

    #[test]
    fn incompatible_broadcast_is_rejected() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 2]));
        let b = tape.constant(Tensor::zeros(&[2, 1]));
        assert!(matches!(tape.add(a, b), Err(Error::Shape { .. })));
        assert!(tape.elementwise(ElementwiseOp::Tanh, &[a, b]).is_err());
    }

    #[test]
    fn concat_columns_and_single() {
        let mut tape = Tape::new();
        let a = tape.constant(mat(&[&[1.0], &[2.0]]));
        let b = tape.constant(mat(&[&[3.0], &[4.0]]));
        let c = tape.concat(&[a, b], 1).unwrap();
        assert_eq!(tape.value(c), &mat(&[&[1.0, 3.0], &[2.0, 4.0]]));
        let single = tape.concat(&[a], 1).unwrap();
        assert_eq!(tape.value(single), tape.value(a));
    }

    #[test]
    fn concat_errors() {
        let mut tape = Tape::new();
        assert!(tape.concat(&[], 0).is_err());
        let a = tape.constant(Tensor::zeros(&[2, 1]));
        let b = tape.constant(Tensor::zeros(&[3, 1]));
        assert!(tape.concat(&[a, b], 1).is_err());
        assert!(tape.concat(&[a, b], 0).is_ok());
    }

    #[test]
    fn concat_gradient_is_ones() {
        let mut tape = Tape::new();
        let a = tape.leaf(mat(&[&[1.0, 2.0], &[3.0, 4.0]]), true);
        let b = tape.leaf(mat(&[&[5.0], &[6.0]]), true);
        let c = tape.concat(&[a, b], 1).unwrap();
        let loss = tape.sum(c);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(a).unwrap().data(), &[1.0; 4]);
        assert_eq!(grads.get(b).unwrap().data(), &[1.0; 2]);
    }

    #[test]
    fn softmax_hand_values() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::vector(vec![7.5; 3]));
        let s = tape.softmax(c).unwrap();
        for &p in tape.value(s).data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let logs = tape.constant(Tensor::vector(vec![1f64.ln(), 2f64.ln(), 3f64.ln()]));
        let s = tape.softmax(logs).unwrap();
        for (p, e) in tape.value(s).data().iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_rejects_nan() {
        let mut tape = Tape::new();
        let v = tape.constant(Tensor::vector(vec![0.0, f64::NAN]));
        assert!(matches!(tape.softmax(v), Err(Error::Numeric(_))));
    }

    #[test]
    fn backward_simple_losses() {
        let x0 = Tensor::vector(vec![1.0, -2.0, 0.5]);
        let mut tape = Tape::new();
        let x = tape.leaf(x0.clone(), true);
        let loss = tape.sum(x);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.0; 3]);

        let mut tape = Tape::new();
        let x = tape.leaf(x0.clone(), true);
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_and_empty() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[2]), true);
        assert!(matches!(tape.backward(x), Err(Error::Usage(_))));
        let tape = Tape::new();
        assert!(tape.backward(Var(0)).is_err());
    }

    #[test]
    fn diamond_graph_visits_each_node_once() {
        // loss = sum(a*b + a*c) with b = 2a, c = 3a => 5 * sum(a^2), d/da = 10a
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::vector(vec![0.5, -1.5]), true);
        let b = tape.scale(a, 2.0).unwrap();
        let c = tape.scale(a, 3.0).unwrap();
        let ab = tape.mul(a, b).unwrap();
        let ac = tape.mul(a, c).unwrap();
        let top = tape.add(ab, ac).unwrap();
        let loss = tape.sum(top);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(a).unwrap().data(), &[5.0, -15.0]);
        for v in [a, b, c, ab, ac, top, loss] {
            assert_eq!(grads.visit_count(v), 1);
        }
    }

    #[test]
    fn scalar_broadcast_gradient_sums() {
        let mut tape = Tape::new();
        let s = tape.leaf(Tensor::scalar(2.0), true);
        let v = tape.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]), true);
        let p = tape.mul(s, v).unwrap();
        let loss = tape.sum(p);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(s).unwrap().data(), &[6.0]);
        assert_eq!(grads.get(v).unwrap().data(), &[2.0; 3]);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        let x = tape.leaf(Tensor::vector(vec![3.0, 4.0]), true);
        let p = tape.mul(c, x).unwrap();
        let loss = tape.sum(p);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(c).is_none());
        assert_eq!(grads.get(x).unwrap().data(), &[1.0, 2.0]);
    }
}
