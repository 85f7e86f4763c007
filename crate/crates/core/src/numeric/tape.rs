//! Reverse-mode differentiation over dense tensors.
//!
//! Every operation appends a node holding its output value and the ids of
//! its inputs. [`Tape::backward`] walks the nodes in exact reverse
//! execution order, accumulating gradients additively into every input
//! that requires them, so a value used twice receives the sum of both
//! path contributions.
//!
//! ```
//! use dfan::numeric::{Tape, Tensor};
//!
//! let mut tape = Tape::<f64>::new();
//! let w = tape.param(Tensor::row(vec![1.0, 2.0]));
//! let x = tape.constant(Tensor::from_rows(&[vec![3.0], vec![4.0]]));
//! let y = tape.matmul(w, x).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.get(w).unwrap().data(), &[3.0, 4.0]);
//! ```

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddRow(Var, Var),
    Relu(Var),
    Softmax { x: Var, axis: usize },
    NormalizeColumns { x: Var, eps: T, norms: Vec<T> },
    SumAxis { x: Var, axis: usize },
    Sum(Var),
    Frobenius(Var),
    CrossEntropy { logits: Var, target: usize },
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Ordered record of executed operations.
#[derive(Clone, Debug, Default)]
pub struct Tape<T = f32> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Tracked leaf; gradients are reported for it.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Untracked leaf.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Sign pattern (`x > 0`) of every ReLU input on the tape, in order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(a) => Some(&self.nodes[a.0].value),
                _ => None,
            })
            .flat_map(|t| t.data().iter().map(|v| *v > T::zero()))
            .collect()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.tracked(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose()?;
        let rg = self.tracked(&[a]);
        Ok(self.push(out, Op::Transpose(a), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        let rg = self.tracked(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        let rg = self.tracked(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        let rg = self.tracked(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let out = self.value(a).map(|x| x * c);
        let rg = self.tracked(&[a]);
        self.push(out, Op::Scale(a, c), rg)
    }

    /// Adds a `1×C` row to every row of an `R×C` matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (r, c) = self.value(x).dims2("add_row")?;
        let b = self.value(row);
        if b.shape() != [1, c] {
            return Err(Error::shape("add_row", self.value(x).shape(), b.shape()));
        }
        let mut out = self.value(x).clone();
        let bias = b.data().to_vec();
        for i in 0..r {
            for (o, &bj) in out.data_mut()[i * c..(i + 1) * c].iter_mut().zip(&bias) {
                *o = *o + bj;
            }
        }
        let rg = self.tracked(&[x, row]);
        Ok(self.push(out, Op::AddRow(x, row), rg))
    }

    /// Element-wise `max(0, x)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, a: Var) -> Var {
        let zero = T::zero();
        let out = self.value(a).map(|x| if x > zero { x } else { zero });
        let rg = self.tracked(&[a]);
        self.push(out, Op::Relu(a), rg)
    }

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let out = softmax_values(self.value(x), axis)?;
        let rg = self.tracked(&[x]);
        Ok(self.push(out, Op::Softmax { x, axis }, rg))
    }

    /// Divides every column by `max(‖column‖₂, eps)`.
    pub fn l2_normalize_columns(&mut self, x: Var, eps: T) -> Result<Var> {
        let xv = self.value(x);
        let (r, c) = xv.dims2("l2_normalize_columns")?;
        let norms: Vec<T> = (0..c)
            .map(|j| {
                let sq: T = (0..r).map(|i| xv.at(i, j) * xv.at(i, j)).sum();
                sq.sqrt()
            })
            .collect();
        let mut out = xv.clone();
        for i in 0..r {
            for j in 0..c {
                out.set(i, j, xv.at(i, j) / norms[j].max(eps));
            }
        }
        let rg = self.tracked(&[x]);
        Ok(self.push(out, Op::NormalizeColumns { x, eps, norms }, rg))
    }

    /// Sum along `axis`, keeping that axis with length 1.
    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let xv = self.value(x);
        let (outer, len, inner) = xv.axis_layout(axis)?;
        let mut shape = xv.shape().to_vec();
        shape[axis] = 1;
        let mut out = Tensor::zeros(&shape);
        let src = xv.data();
        let dst = out.data_mut();
        for o in 0..outer {
            for k in 0..len {
                for i in 0..inner {
                    dst[o * inner + i] = dst[o * inner + i] + src[(o * len + k) * inner + i];
                }
            }
        }
        let rg = self.tracked(&[x]);
        Ok(self.push(out, Op::SumAxis { x, axis }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        let rg = self.tracked(&[x]);
        self.push(out, Op::Sum(x), rg)
    }

    pub fn frobenius_norm(&mut self, x: Var) -> Var {
        let sq: T = self.value(x).data().iter().map(|&v| v * v).sum();
        let rg = self.tracked(&[x]);
        self.push(Tensor::scalar(sq.sqrt()), Op::Frobenius(x), rg)
    }

    /// `-log softmax(logits)[target]` over all elements of `logits`.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let l = self.value(logits);
        if target >= l.numel() {
            return Err(Error::Index {
                index: target,
                len: l.numel(),
            });
        }
        let loss = log_sum_exp(l.data()) - l.data()[target];
        let rg = self.tracked(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy { logits, target },
            rg,
        ))
    }

    /// Gradients of the scalar `loss` with respect to every tracked node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.shape(), T::one()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads)?;
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let y = &node.value;
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.requires_grad(a) {
                    let ga = g.matmul(&self.value(b).transpose()?)?;
                    self.accumulate(grads, a, ga);
                }
                if self.requires_grad(b) {
                    let gb = self.value(a).transpose()?.matmul(g)?;
                    self.accumulate(grads, b, gb);
                }
            }
            Op::Transpose(a) => self.accumulate(grads, a, g.transpose()?),
            Op::Add(a, b) => {
                self.accumulate(grads, a, g.clone());
                self.accumulate(grads, b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, a, g.clone());
                self.accumulate(grads, b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                if self.requires_grad(a) {
                    let ga = g.zip_map(self.value(b), "mul", |x, y| x * y)?;
                    self.accumulate(grads, a, ga);
                }
                if self.requires_grad(b) {
                    let gb = g.zip_map(self.value(a), "mul", |x, y| x * y)?;
                    self.accumulate(grads, b, gb);
                }
            }
            Op::Scale(a, c) => self.accumulate(grads, a, g.map(|v| v * c)),
            Op::AddRow(x, row) => {
                self.accumulate(grads, x, g.clone());
                if self.requires_grad(row) {
                    let (r, c) = g.dims2("add_row")?;
                    let mut gb = Tensor::zeros(&[1, c]);
                    for i in 0..r {
                        for (acc, &v) in gb.data_mut().iter_mut().zip(g.row_slice(i)) {
                            *acc = *acc + v;
                        }
                    }
                    self.accumulate(grads, row, gb);
                }
            }
            Op::Relu(a) => {
                let zero = T::zero();
                let ga = g.zip_map(self.value(a), "relu", |gv, x| if x > zero { gv } else { zero })?;
                self.accumulate(grads, a, ga);
            }
            Op::Softmax { x, axis } => {
                let (outer, len, inner) = y.axis_layout(axis)?;
                let mut gx = Tensor::zeros(y.shape());
                let (yd, gd) = (y.data(), g.data());
                let out = gx.data_mut();
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |k: usize| (o * len + k) * inner + i;
                        let dot: T = (0..len).map(|k| yd[at(k)] * gd[at(k)]).sum();
                        for k in 0..len {
                            out[at(k)] = yd[at(k)] * (gd[at(k)] - dot);
                        }
                    }
                }
                self.accumulate(grads, x, gx);
            }
            Op::NormalizeColumns { x, eps, ref norms } => {
                let (r, c) = y.dims2("l2_normalize_columns")?;
                let mut gx = Tensor::zeros(&[r, c]);
                for j in 0..c {
                    let n = norms[j].max(eps);
                    if norms[j] > eps {
                        let dot: T = (0..r).map(|i| y.at(i, j) * g.at(i, j)).sum();
                        for i in 0..r {
                            gx.set(i, j, (g.at(i, j) - y.at(i, j) * dot) / n);
                        }
                    } else {
                        for i in 0..r {
                            gx.set(i, j, g.at(i, j) / n);
                        }
                    }
                }
                self.accumulate(grads, x, gx);
            }
            Op::SumAxis { x, axis } => {
                let xv = self.value(x);
                let (outer, len, inner) = xv.axis_layout(axis)?;
                let mut gx = Tensor::zeros(xv.shape());
                let gd = g.data();
                let out = gx.data_mut();
                for o in 0..outer {
                    for k in 0..len {
                        for i in 0..inner {
                            out[(o * len + k) * inner + i] = gd[o * inner + i];
                        }
                    }
                }
                self.accumulate(grads, x, gx);
            }
            Op::Sum(x) => {
                let gv = g.item();
                self.accumulate(grads, x, Tensor::full(self.value(x).shape(), gv));
            }
            Op::Frobenius(x) => {
                let norm = y.item();
                let gv = g.item();
                let gx = if norm > T::zero() {
                    self.value(x).map(|v| gv * v / norm)
                } else {
                    Tensor::zeros(self.value(x).shape())
                };
                self.accumulate(grads, x, gx);
            }
            Op::CrossEntropy { logits, target } => {
                let l = self.value(logits);
                let lse = log_sum_exp(l.data());
                let gv = g.item();
                let mut gl = l.map(|v| gv * (v - lse).exp());
                gl.data_mut()[target] = gl.data()[target] - gv;
                self.accumulate(grads, logits, gl);
            }
        }
        Ok(())
    }
}

/// Max-subtracted softmax of `x` along `axis`, without recording.
pub fn softmax_values<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let (outer, len, inner) = x.axis_layout(axis)?;
    let mut out = x.clone();
    let d = out.data_mut();
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| (o * len + k) * inner + i;
            let max = (0..len).map(|k| d[at(k)]).fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for k in 0..len {
                let e = (d[at(k)] - max).exp();
                d[at(k)] = e;
                total = total + e;
            }
            for k in 0..len {
                d[at(k)] = d[at(k)] / total;
            }
        }
    }
    Ok(out)
}

pub(crate) fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    let total: T = xs.iter().map(|&v| (v - max).exp()).sum();
    max + total.ln()
}
