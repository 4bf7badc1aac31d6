//! Minimal reverse-mode gradient engine.
//!
//! A [`Tape`] records a Wengert list of primitive operations as they execute.
//! Node values are materialized eagerly, so [`Tape::backward`] is a single
//! reverse sweep that accumulates one cotangent slot per node. The primitive
//! set is exactly what the two estimator stages need: dense multiply, bias,
//! ReLU, bilinear 2x upsampling, batch normalization, and a squared-error
//! tail. All differentiation is over real values; complex quantities enter as
//! stacked re/im parts.
//!
//! Tapes are single-writer: build one per forward pass and discard it after
//! `backward`. Replaying a tape re-executes the recorded list with the same
//! kernels, which reproduces every value bit for bit.

use crate::error::{Error, Result};
use crate::numerics::tensor::{
    add_bias, batch_norm, matmul, matmul_at, matmul_bt, relu, sum_squared_diff, upsample2x,
    upsample2x_adjoint, Tensor,
};

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Param { name: String },
    Constant,
    MatMul(NodeId, NodeId),
    AddBias { x: NodeId, bias: NodeId },
    Relu(NodeId),
    Scale { x: NodeId, factor: f64 },
    Add(NodeId, NodeId),
    Upsample2x { x: NodeId, freq: usize, time: usize },
    BatchNorm { x: NodeId, scale: NodeId, shift: NodeId, eps: f64 },
    SumSquaredDiff { x: NodeId, target: NodeId },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn scalar_value(&self, id: NodeId) -> f64 {
        let v = &self.nodes[id].value;
        debug_assert!(v.is_scalar());
        v.data()[0]
    }

    /// Registers a trainable leaf. The name labels gradient diagnostics.
    pub fn param(&mut self, name: impl Into<String>, value: Tensor) -> NodeId {
        self.push(Op::Param { name: name.into() }, value)
    }

    /// Registers a non-trainable leaf.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = matmul(self.value(a), self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let v = add_bias(self.value(x), self.value(bias))?;
        Ok(self.push(Op::AddBias { x, bias }, v))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = relu(self.value(x));
        self.push(Op::Relu(x), v)
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let mut v = self.value(x).clone();
        for e in v.data_mut() {
            *e *= factor;
        }
        self.push(Op::Scale { x, factor }, v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.rows() != vb.rows() || va.cols() != vb.cols() {
            return Err(Error::DimMismatch(format!(
                "add {}x{} + {}x{}",
                va.rows(),
                va.cols(),
                vb.rows(),
                vb.cols()
            )));
        }
        let mut v = va.clone();
        for (e, o) in v.data_mut().iter_mut().zip(vb.data()) {
            *e += o;
        }
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn upsample2x(&mut self, x: NodeId, freq: usize, time: usize) -> Result<NodeId> {
        let v = upsample2x(self.value(x), freq, time)?;
        Ok(self.push(Op::Upsample2x { x, freq, time }, v))
    }

    pub fn batch_norm(
        &mut self,
        x: NodeId,
        scale: NodeId,
        shift: NodeId,
        eps: f64,
    ) -> Result<NodeId> {
        let v = batch_norm(self.value(x), self.value(scale), self.value(shift), eps)?;
        Ok(self.push(Op::BatchNorm { x, scale, shift, eps }, v))
    }

    /// Scalar node: sum of squared differences between `x` and `target`.
    pub fn sum_squared_diff(&mut self, x: NodeId, target: NodeId) -> Result<NodeId> {
        let v = sum_squared_diff(self.value(x), self.value(target))?;
        Ok(self.push(Op::SumSquaredDiff { x, target }, Tensor::scalar(v)))
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    fn needs_grad(&self, id: NodeId) -> bool {
        !matches!(self.nodes[id].op, Op::Constant)
    }

    /// Reverse sweep from a recorded scalar loss node. Every earlier node gets
    /// exactly one accumulated cotangent slot; parameters the loss does not
    /// depend on read back as zeros.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.nodes.is_empty() || loss >= self.nodes.len() {
            return Err(Error::NoRecordedLoss);
        }
        if !self.nodes[loss].value.is_scalar() {
            return Err(Error::NoRecordedLoss);
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss] = Some(Tensor::scalar(1.0));

        for id in (0..=loss).rev() {
            let Some(g) = grads[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Param { .. } | Op::Constant => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if self.needs_grad(*a) {
                        let da = matmul_bt(&g, self.value(*b))?;
                        self.accumulate(&mut grads, *a, da);
                    }
                    if self.needs_grad(*b) {
                        let db = matmul_at(self.value(*a), &g)?;
                        self.accumulate(&mut grads, *b, db);
                    }
                }
                Op::AddBias { x, bias } => {
                    if self.needs_grad(*bias) {
                        let mut db = Tensor::zeros(g.rows(), 1);
                        for r in 0..g.rows() {
                            db.data_mut()[r] = g.row(r).iter().sum();
                        }
                        self.accumulate(&mut grads, *bias, db);
                    }
                    if self.needs_grad(*x) {
                        self.accumulate(&mut grads, *x, g);
                    }
                }
                Op::Relu(x) => {
                    if self.needs_grad(*x) {
                        let mut dx = g;
                        let input = self.value(*x);
                        for (d, &v) in dx.data_mut().iter_mut().zip(input.data()) {
                            if v <= 0.0 {
                                *d = 0.0;
                            }
                        }
                        self.accumulate(&mut grads, *x, dx);
                    }
                }
                Op::Scale { x, factor } => {
                    if self.needs_grad(*x) {
                        let mut dx = g;
                        for d in dx.data_mut() {
                            *d *= factor;
                        }
                        self.accumulate(&mut grads, *x, dx);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs_grad(*a) {
                        self.accumulate(&mut grads, *a, g.clone());
                    }
                    if self.needs_grad(*b) {
                        self.accumulate(&mut grads, *b, g);
                    }
                }
                Op::Upsample2x { x, freq, time } => {
                    if self.needs_grad(*x) {
                        let dx = upsample2x_adjoint(&g, *freq, *time)?;
                        self.accumulate(&mut grads, *x, dx);
                    }
                }
                Op::BatchNorm { x, scale, shift, eps } => {
                    self.batch_norm_backward(&mut grads, g, *x, *scale, *shift, *eps);
                }
                Op::SumSquaredDiff { x, target } => {
                    let scale = 2.0 * g.data()[0];
                    let (vx, vt) = (self.value(*x), self.value(*target));
                    if self.needs_grad(*x) {
                        let mut dx = vx.clone();
                        for (d, &t) in dx.data_mut().iter_mut().zip(vt.data()) {
                            *d = scale * (*d - t);
                        }
                        self.accumulate(&mut grads, *x, dx);
                    }
                    if self.needs_grad(*target) {
                        let mut dt = vt.clone();
                        for (d, &v) in dt.data_mut().iter_mut().zip(vx.data()) {
                            *d = scale * (*d - v);
                        }
                        self.accumulate(&mut grads, *target, dt);
                    }
                }
            }
        }

        let shapes = self
            .nodes
            .iter()
            .map(|n| (n.value.rows(), n.value.cols()))
            .collect();
        Ok(Gradients { grads, shapes })
    }

    fn batch_norm_backward(
        &self,
        grads: &mut [Option<Tensor>],
        g: Tensor,
        x: NodeId,
        scale: NodeId,
        shift: NodeId,
        eps: f64,
    ) {
        let input = self.value(x);
        let gamma = self.value(scale);
        let n = input.cols();
        let nf = n as f64;

        let mut dx = Tensor::zeros(input.rows(), n);
        let mut dscale = Tensor::zeros(input.rows(), 1);
        let mut dshift = Tensor::zeros(input.rows(), 1);

        for r in 0..input.rows() {
            let row = input.row(r);
            let mean = row.iter().sum::<f64>() / nf;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
            let inv_std = 1.0 / (var + eps).sqrt();
            let gr = g.row(r);

            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for (c, &dy) in gr.iter().enumerate() {
                let xhat = (row[c] - mean) * inv_std;
                sum_dy += dy;
                sum_dy_xhat += dy * xhat;
            }
            dscale.data_mut()[r] = sum_dy_xhat;
            dshift.data_mut()[r] = sum_dy;

            let k = gamma.data()[r] * inv_std;
            let dxr = &mut dx.data_mut()[r * n..(r + 1) * n];
            for (c, &dy) in gr.iter().enumerate() {
                let xhat = (row[c] - mean) * inv_std;
                dxr[c] = k * (dy - sum_dy / nf - xhat * sum_dy_xhat / nf);
            }
        }

        if self.needs_grad(scale) {
            self.accumulate(grads, scale, dscale);
        }
        if self.needs_grad(shift) {
            self.accumulate(grads, shift, dshift);
        }
        if self.needs_grad(x) {
            self.accumulate(grads, x, dx);
        }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
        match &mut grads[id] {
            Some(existing) => {
                for (e, d) in existing.data_mut().iter_mut().zip(delta.data()) {
                    *e += d;
                }
            }
            slot @ None => *slot = Some(delta),
        }
    }

    /// Re-executes the recorded list from its leaves with the same kernels.
    pub fn replay(&self) -> Result<Vec<Tensor>> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match &node.op {
                Op::Param { .. } | Op::Constant => node.value.clone(),
                Op::MatMul(a, b) => matmul(&values[*a], &values[*b])?,
                Op::AddBias { x, bias } => add_bias(&values[*x], &values[*bias])?,
                Op::Relu(x) => relu(&values[*x]),
                Op::Scale { x, factor } => {
                    let mut v = values[*x].clone();
                    for e in v.data_mut() {
                        *e *= factor;
                    }
                    v
                }
                Op::Add(a, b) => {
                    let mut v = values[*a].clone();
                    for (e, o) in v.data_mut().iter_mut().zip(values[*b].data()) {
                        *e += o;
                    }
                    v
                }
                Op::Upsample2x { x, freq, time } => upsample2x(&values[*x], *freq, *time)?,
                Op::BatchNorm { x, scale, shift, eps } => {
                    batch_norm(&values[*x], &values[*scale], &values[*shift], *eps)?
                }
                Op::SumSquaredDiff { x, target } => {
                    Tensor::scalar(sum_squared_diff(&values[*x], &values[*target])?)
                }
            };
            values.push(v);
        }
        Ok(values)
    }

    /// True when a replay reproduces every recorded value bit for bit.
    pub fn replay_is_bit_identical(&self) -> Result<bool> {
        let replayed = self.replay()?;
        Ok(self
            .nodes
            .iter()
            .zip(&replayed)
            .all(|(n, r)| {
                n.value.data().len() == r.data().len()
                    && n.value
                        .data()
                        .iter()
                        .zip(r.data())
                        .all(|(a, b)| a.to_bits() == b.to_bits())
            }))
    }

    pub fn param_name(&self, id: NodeId) -> Option<&str> {
        match &self.nodes[id].op {
            Op::Param { name } => Some(name),
            _ => None,
        }
    }
}

/// Cotangents produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient with respect to a node; zeros when the loss does not reach it.
    pub fn wrt(&self, id: NodeId) -> Tensor {
        match &self.grads[id] {
            Some(t) => t.clone(),
            None => {
                let (r, c) = self.shapes[id];
                Tensor::zeros(r, c)
            }
        }
    }

    /// Borrowing accessor; `None` when no gradient flowed to the node.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id].as_ref()
    }
}
