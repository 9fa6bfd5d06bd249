//! Tape-based reverse-mode differentiation over [`Matrix`] values.
//!
//! A [`Graph`] records every operation eagerly; [`Graph::backward`] walks the
//! tape in reverse and returns one gradient per parameter leaf. Graphs are
//! single-use and meant to live for one training step on one thread.

use std::collections::BTreeMap;

use super::matrix::{dot, norm, Matrix};
use super::ops::ZERO_NORM;
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Opaque handle to a trainable tensor in a [`Params`] store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Matrix)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }
}

/// `∂loss/∂p` for every parameter leaf recorded on the graph.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    grads: BTreeMap<ParamId, Matrix>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix)> {
        self.grads.iter().map(|(&id, g)| (id, g))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.grads.values().all(Matrix::is_finite)
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// `a + 1·b` with `b` a single row broadcast down the rows of `a`.
    AddRowBias(Var, Var),
    Relu(Var),
    SoftmaxRows(Var),
    MeanRows(Var),
    L2NormalizeRows(Var),
    /// `a / s` with `s` a 1×1 node.
    DivScalar(Var, Var),
    Sum(Var),
    ConcatRows(Vec<Var>),
    /// `-(1/B) Σ_i log softmax(row i)[i]` over a square logit matrix.
    DiagCrossEntropy(Var),
    StopGradient,
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    param: Option<ParamId>,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            op,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Leaf bound to a trainable parameter.
    pub fn param(&mut self, params: &Params, id: ParamId) -> Var {
        self.param_value(id, params.get(id).clone())
    }

    /// Leaf bound to `id` with an explicit value.
    pub fn param_value(&mut self, id: ParamId, value: Matrix) -> Var {
        let v = self.push(value, Op::Leaf);
        self.nodes[v.0].param = Some(id);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul_t(self.value(b))?;
        Ok(self.push(value, Op::MatMulT(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scale(c);
        self.push(value, Op::Scale(a, c))
    }

    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if self.shape(bias) != (1, cols) {
            let (br, bc) = self.shape(bias);
            return Err(Error::dims(format!("1x{cols} bias"), format!("{br}x{bc}")));
        }
        let b = self.value(bias).as_slice().to_vec();
        let value = Matrix::from_fn(rows, cols, |i, j| self.value(a)[(i, j)] + b[j]);
        Ok(self.push(value, Op::AddRowBias(a, bias)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = super::ops::softmax_rows(self.value(a));
        self.push(value, Op::SoftmaxRows(a))
    }

    /// Column means, as a `1 × cols` node.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let pooled = super::ops::mean_pool_rows(self.value(a))?;
        Ok(self.push(Matrix::row_vector(&pooled), Op::MeanRows(a)))
    }

    pub fn l2_normalize_rows(&mut self, a: Var) -> Result<Var> {
        let value = super::ops::l2_normalize_rows(self.value(a))?;
        Ok(self.push(value, Op::L2NormalizeRows(a)))
    }

    pub fn div_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.shape(s) != (1, 1) {
            let (r, c) = self.shape(s);
            return Err(Error::dims("1x1 divisor", format!("{r}x{c}")));
        }
        let d = self.value(s)[(0, 0)];
        let value = self.value(a).map(|x| x / d);
        Ok(self.push(value, Op::DivScalar(a, s)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::EmptyInput("concat of zero parts"));
        }
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::vstack(&mats)?;
        Ok(self.push(value, Op::ConcatRows(parts.to_vec())))
    }

    /// Mean cross-entropy of each row against its diagonal entry.
    pub fn diag_cross_entropy(&mut self, logits: Var) -> Result<Var> {
        let m = self.value(logits);
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(Error::NonSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::EmptyInput("cross-entropy over an empty batch"));
        }
        let loss = diag_cross_entropy_value(m);
        Ok(self.push(Matrix::scalar(loss), Op::DiagCrossEntropy(logits)))
    }

    /// Identity in the forward pass; blocks gradient flow in the backward pass.
    pub fn stop_gradient(&mut self, a: Var) -> Var {
        let value = self.value(a).clone();
        self.push(value, Op::StopGradient)
    }

    /// Reverse pass from a scalar node.
    ///
    /// Every parameter leaf recorded on the graph gets an entry; leaves the
    /// loss does not depend on get zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let (rows, cols) = self.shape(loss);
        if (rows, cols) != (1, 1) {
            return Err(Error::NotScalar { rows, cols });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));
        let mut out = Gradients::default();

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            let Some(g) = grads[i].take() else { continue };
            if let Some(id) = node.param {
                match out.grads.get_mut(&id) {
                    Some(acc) => acc.add_assign(&g)?,
                    None => {
                        out.grads.insert(id, g);
                    }
                }
                continue;
            }
            self.propagate(&node.op, &node.value, &g, &mut grads)?;
        }
        for node in &self.nodes {
            if let Some(id) = node.param {
                out.grads
                    .entry(id)
                    .or_insert_with(|| Matrix::zeros(node.value.rows(), node.value.cols()));
            }
        }
        Ok(out)
    }

    fn propagate(
        &self,
        op: &Op,
        out: &Matrix,
        g: &Matrix,
        grads: &mut [Option<Matrix>],
    ) -> Result<()> {
        let val = |v: Var| &self.nodes[v.0].value;
        match op {
            Op::Leaf | Op::StopGradient => {}
            Op::MatMul(a, b) => {
                accumulate(grads, *a, g.matmul_t(val(*b))?)?;
                accumulate(grads, *b, val(*a).t_matmul(g)?)?;
            }
            Op::MatMulT(a, b) => {
                accumulate(grads, *a, g.matmul(val(*b))?)?;
                accumulate(grads, *b, g.t_matmul(val(*a))?)?;
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transpose())?,
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone())?;
                accumulate(grads, *b, g.clone())?;
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, g.zip_map(val(*b), |x, y| x * y)?)?;
                accumulate(grads, *b, g.zip_map(val(*a), |x, y| x * y)?)?;
            }
            Op::Scale(a, c) => accumulate(grads, *a, g.scale(*c))?,
            Op::AddRowBias(a, b) => {
                accumulate(grads, *a, g.clone())?;
                accumulate(grads, *b, g.column_sums())?;
            }
            Op::Relu(a) => {
                let da = g.zip_map(val(*a), |gi, x| if x > 0.0 { gi } else { 0.0 })?;
                accumulate(grads, *a, da)?;
            }
            Op::SoftmaxRows(a) => {
                // dX = Y ⊙ (dY - rowsum(dY ⊙ Y))
                let mut da = Matrix::zeros(out.rows(), out.cols());
                for i in 0..out.rows() {
                    let (y, gy) = (out.row(i), g.row(i));
                    let inner = dot(y, gy);
                    for (d, (&yi, &gi)) in da.row_mut(i).iter_mut().zip(y.iter().zip(gy)) {
                        *d = yi * (gi - inner);
                    }
                }
                accumulate(grads, *a, da)?;
            }
            Op::MeanRows(a) => {
                let (n, cols) = val(*a).shape();
                let row = g.as_slice();
                let da = Matrix::from_fn(n, cols, |_, j| row[j] / n as f64);
                accumulate(grads, *a, da)?;
            }
            Op::L2NormalizeRows(a) => {
                // y = x/‖x‖  ⇒  dx = (dy - y (y·dy)) / ‖x‖
                let x = val(*a);
                let mut da = Matrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    let n = norm(x.row(i)).max(ZERO_NORM);
                    let (y, gy) = (out.row(i), g.row(i));
                    let inner = dot(y, gy);
                    for (d, (&yi, &gi)) in da.row_mut(i).iter_mut().zip(y.iter().zip(gy)) {
                        *d = (gi - yi * inner) / n;
                    }
                }
                accumulate(grads, *a, da)?;
            }
            Op::DivScalar(a, s) => {
                let d = val(*s)[(0, 0)];
                accumulate(grads, *a, g.scale(1.0 / d))?;
                let ds = -dot(g.as_slice(), val(*a).as_slice()) / (d * d);
                accumulate(grads, *s, Matrix::scalar(ds))?;
            }
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                accumulate(grads, *a, Matrix::filled(r, c, g[(0, 0)]))?;
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = val(p).shape();
                    let idx: Vec<usize> = (offset..offset + r).collect();
                    let slice = g.select_rows(&idx);
                    debug_assert_eq!(slice.cols(), c);
                    accumulate(grads, p, slice)?;
                    offset += r;
                }
            }
            Op::DiagCrossEntropy(a) => {
                // d/dX = (softmax(X) - I) / B
                let x = val(*a);
                let b = x.rows() as f64;
                let mut da = super::ops::softmax_rows(x);
                for i in 0..x.rows() {
                    da[(i, i)] -= 1.0;
                }
                accumulate(grads, *a, da.scale(g[(0, 0)] / b))?;
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) -> Result<()> {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

pub(crate) fn diag_cross_entropy_value(m: &Matrix) -> f64 {
    let n = m.rows();
    let total: f64 = (0..n)
        .map(|i| {
            let row = m.row(i);
            super::ops::log_sum_exp(row.iter().copied()) - row[i]
        })
        .sum();
    total / n as f64
}
