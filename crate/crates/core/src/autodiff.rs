//! Record-on-forward reverse-mode differentiation.
//!
//! A [`Graph`] owns every tensor produced during a forward pass. Nodes are
//! appended in evaluation order, so insertion order is a topological order and
//! [`Graph::backward`] simply walks the node list in reverse.
//!
//! Broadcasting is limited to equal shapes and scalar-with-tensor.

use crate::tensor::{gemm, strides, Tensor, TensorError};

pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;

/// Probability clamp used by [`Graph::weighted_bce`].
pub const BCE_CLAMP: f64 = 1e-12;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul,
    BatchMatMul,
    Add,
    Sub,
    Mul,
    Scale(f64),
    Sigmoid,
    Relu,
    Selu,
    Softplus,
    Softmax { axis: usize },
    Concat { axis: usize },
    Reshape,
    Transpose,
    Permute(Vec<usize>),
    Sum,
    Mean,
    WeightedBce { targets: Vec<f64>, weights: Vec<f64> },
    Mse { targets: Vec<f64> },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul => "matmul",
            Op::BatchMatMul => "bmm",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Scale(_) => "scale",
            Op::Sigmoid => "sigmoid",
            Op::Relu => "relu",
            Op::Selu => "selu",
            Op::Softplus => "softplus",
            Op::Softmax { .. } => "softmax",
            Op::Concat { .. } => "concat",
            Op::Reshape => "reshape",
            Op::Transpose => "transpose",
            Op::Permute(_) => "permute",
            Op::Sum => "sum",
            Op::Mean => "mean",
            Op::WeightedBce { .. } => "weighted_bce",
            Op::Mse { .. } => "mse",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    inputs: Vec<Var>,
    value: Tensor,
    needs_grad: bool,
}

/// Computation graph recorded during a forward pass.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
    backward_done: bool,
}

type Result<T> = std::result::Result<T, TensorError>;

#[derive(Clone, Copy)]
enum Pairing {
    Same,
    LeftScalar,
    RightScalar,
}

fn pairing(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Pairing> {
    if a.shape() == b.shape() {
        Ok(Pairing::Same)
    } else if a.numel() == 1 {
        Ok(Pairing::LeftScalar)
    } else if b.numel() == 1 {
        Ok(Pairing::RightScalar)
    } else {
        Err(TensorError::Shape {
            op,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        })
    }
}

fn zip_with(a: &Tensor, b: &Tensor, pairing: Pairing, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data: Vec<f64> = match pairing {
        Pairing::Same => a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
        Pairing::LeftScalar => {
            let x = a.data()[0];
            b.data().iter().map(|&y| f(x, y)).collect()
        }
        Pairing::RightScalar => {
            let y = b.data()[0];
            a.data().iter().map(|&x| f(x, y)).collect()
        }
    };
    let shape = match pairing {
        Pairing::LeftScalar => b.shape(),
        _ => a.shape(),
    };
    Tensor::new(shape, data).expect("shape preserved")
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(a.shape(), a.data().iter().map(|&x| f(x)).collect()).expect("shape preserved")
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    // ln(1 + e^x) = max(x, 0) + ln(1 + e^{-|x|})
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn selu(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA * x
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
    }
}

fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn permute_data(data: &[f64], shape: &[usize], axes: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let src_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let n = data.len();
    let mut out = Vec::with_capacity(n);
    let rank = out_shape.len();
    let mut idx = vec![0usize; rank];
    let mut offset = 0usize;
    for _ in 0..n {
        out.push(data[offset]);
        // odometer increment over the output index
        for d in (0..rank).rev() {
            idx[d] += 1;
            offset += src_strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            offset -= src_strides[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    (out_shape, out)
}

fn accumulate(slot: &mut Option<Vec<f64>>, delta: Vec<f64>) {
    match slot {
        Some(g) => g.iter_mut().zip(&delta).for_each(|(a, b)| *a += b),
        None => *slot = Some(delta),
    }
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

    /// Operation tags in recording order.
    pub fn op_names(&self) -> Vec<&'static str> {
        self.nodes.iter().map(|n| n.op.name()).collect()
    }

    /// Input ids of a node.
    pub fn inputs_of(&self, v: Var) -> Vec<Var> {
        self.nodes[v.0].inputs.clone()
    }

    /// Smallest `|input|` reaching a ReLU or SELU node, i.e. how far the
    /// recorded point sits from a kink. Infinite when there are none.
    pub fn kink_distance(&self) -> f64 {
        self.nodes
            .iter()
            .filter(|n| matches!(n.op, Op::Relu | Op::Selu))
            .flat_map(|n| self.nodes[n.inputs[0].0].value.data().iter().map(|x| x.abs()))
            .fold(f64::INFINITY, f64::min)
    }

    fn push(&mut self, op: Op, inputs: Vec<Var>, value: Tensor) -> Var {
        let needs_grad = match op {
            Op::Leaf => value.requires_grad(),
            _ => inputs.iter().any(|v| self.nodes[v.0].needs_grad),
        };
        self.nodes.push(Node {
            op,
            inputs,
            value,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Adds a leaf; gradients are tracked iff `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        self.push(Op::Leaf, Vec::new(), tensor)
    }

    /// Adds a trainable leaf.
    pub fn param(&mut self, tensor: Tensor) -> Var {
        self.leaf(tensor.with_requires_grad(true))
    }

    /// Adds a leaf that never receives a gradient.
    pub fn constant(&mut self, tensor: Tensor) -> Var {
        self.leaf(tensor.with_requires_grad(false))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::Shape {
                op: "matmul",
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        let (p, q, r) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; p * r];
        gemm(p, q, r, ta.data(), (q, 1), tb.data(), (r, 1), 0.0, &mut out);
        let value = Tensor::new(&[p, r], out)?;
        Ok(self.push(Op::MatMul, vec![a, b], value))
    }

    /// Batched product `[n,p,q] x [n,q,r] -> [n,p,r]`.
    pub fn bmm(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
            return Err(TensorError::Shape {
                op: "bmm",
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        let (n, p, q, r) = (sa[0], sa[1], sa[2], sb[2]);
        let mut out = vec![0.0; n * p * r];
        for i in 0..n {
            gemm(
                p,
                q,
                r,
                &ta.data()[i * p * q..(i + 1) * p * q],
                (q, 1),
                &tb.data()[i * q * r..(i + 1) * q * r],
                (r, 1),
                0.0,
                &mut out[i * p * r..(i + 1) * p * r],
            );
        }
        let value = Tensor::new(&[n, p, r], out)?;
        Ok(self.push(Op::BatchMatMul, vec![a, b], value))
    }

    fn binary(&mut self, op: Op, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let p = pairing(name, ta, tb)?;
        let value = zip_with(ta, tb, p, f);
        Ok(self.push(op, vec![a, b], value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Op::Add, "add", a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Op::Sub, "sub", a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Op::Mul, "mul", a, b, |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = map(self.value(a), |x| x * factor);
        self.push(Op::Scale(factor), vec![a], value)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = map(self.value(a), sigmoid);
        self.push(Op::Sigmoid, vec![a], value)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = map(self.value(a), |x| if x < 0.0 { 0.0 } else { x });
        self.push(Op::Relu, vec![a], value)
    }

    pub fn selu(&mut self, a: Var) -> Var {
        let value = map(self.value(a), selu);
        self.push(Op::Selu, vec![a], value)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let value = map(self.value(a), softplus);
        self.push(Op::Softplus, vec![a], value)
    }

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.value(a);
        let shape = t.shape().to_vec();
        if axis >= shape.len() {
            return Err(TensorError::Axis { axis, shape });
        }
        let (outer, len, inner) = axis_split(&shape, axis);
        let x = t.data();
        let mut out = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| o * len * inner + j * inner + i;
                let max = (0..len).map(|j| x[at(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..len {
                    let e = (x[at(j)] - max).exp();
                    out[at(j)] = e;
                    total += e;
                }
                for j in 0..len {
                    out[at(j)] /= total;
                }
            }
        }
        let value = Tensor::new(&shape, out)?;
        Ok(self.push(Op::Softmax { axis }, vec![a], value))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = self
            .value(*parts.first().ok_or_else(|| TensorError::Invalid("concat of nothing".into()))?)
            .shape()
            .to_vec();
        if axis >= first.len() {
            return Err(TensorError::Axis { axis, shape: first });
        }
        let mut axis_total = 0;
        for &p in parts {
            let s = self.shape(p);
            let compatible = s.len() == first.len()
                && s.iter().zip(&first).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(TensorError::Shape {
                    op: "concat",
                    left: first.clone(),
                    right: s.to_vec(),
                });
            }
            axis_total += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = axis_total;
        let (outer, _, inner) = axis_split(&out_shape, axis);
        let mut out = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for &p in parts {
                let chunk = self.shape(p)[axis] * inner;
                out.extend_from_slice(&self.value(p).data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let value = Tensor::new(&out_shape, out)?;
        Ok(self.push(Op::Concat { axis }, parts.to_vec(), value))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let numel: usize = shape.iter().product();
        if numel != t.numel() {
            return Err(TensorError::Shape {
                op: "reshape",
                left: t.shape().to_vec(),
                right: shape.to_vec(),
            });
        }
        let value = Tensor::new(shape, t.data().to_vec())?;
        Ok(self.push(Op::Reshape, vec![a], value))
    }

    /// 2-D transpose.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.shape().len() != 2 {
            return Err(TensorError::Shape {
                op: "transpose",
                left: t.shape().to_vec(),
                right: vec![],
            });
        }
        let (shape, data) = permute_data(t.data(), t.shape(), &[1, 0]);
        let value = Tensor::new(&shape, data)?;
        Ok(self.push(Op::Transpose, vec![a], value))
    }

    /// Reorders axes: output axis `k` is input axis `axes[k]`.
    pub fn permute(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let rank = t.shape().len();
        let mut seen = vec![false; rank];
        let valid = axes.len() == rank
            && axes.iter().all(|&x| x < rank && !std::mem::replace(&mut seen[x], true));
        if !valid {
            return Err(TensorError::Invalid(format!(
                "permutation {axes:?} invalid for shape {:?}",
                t.shape()
            )));
        }
        let (shape, data) = permute_data(t.data(), t.shape(), axes);
        let value = Tensor::new(&shape, data)?;
        Ok(self.push(Op::Permute(axes.to_vec()), vec![a], value))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        self.push(Op::Sum, vec![a], Tensor::scalar(total))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let m = t.data().iter().sum::<f64>() / t.numel() as f64;
        self.push(Op::Mean, vec![a], Tensor::scalar(m))
    }

    /// Mean over rows of `-w_i [y_i ln p_i + (1 - y_i) ln(1 - p_i)]`, with
    /// `p` clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]`.
    pub fn weighted_bce(&mut self, predictions: Var, targets: &[f64], weights: &[f64]) -> Result<Var> {
        let p = self.value(predictions);
        if p.numel() != targets.len() || targets.len() != weights.len() || targets.is_empty() {
            return Err(TensorError::Shape {
                op: "weighted_bce",
                left: p.shape().to_vec(),
                right: vec![targets.len(), weights.len()],
            });
        }
        let n = targets.len() as f64;
        let loss = p
            .data()
            .iter()
            .zip(targets)
            .zip(weights)
            .map(|((&p, &y), &w)| {
                let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                -w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / n;
        let op = Op::WeightedBce {
            targets: targets.to_vec(),
            weights: weights.to_vec(),
        };
        Ok(self.push(op, vec![predictions], Tensor::scalar(loss)))
    }

    /// Mean squared error against fixed targets.
    pub fn mse(&mut self, predictions: Var, targets: &[f64]) -> Result<Var> {
        let p = self.value(predictions);
        if p.numel() != targets.len() || targets.is_empty() {
            return Err(TensorError::Shape {
                op: "mse",
                left: p.shape().to_vec(),
                right: vec![targets.len()],
            });
        }
        let loss = p
            .data()
            .iter()
            .zip(targets)
            .map(|(p, t)| (p - t).powi(2))
            .sum::<f64>()
            / targets.len() as f64;
        let op = Op::Mse {
            targets: targets.to_vec(),
        };
        Ok(self.push(op, vec![predictions], Tensor::scalar(loss)))
    }

    /// Clears all gradients so `backward` may run again.
    pub fn reset_grads(&mut self) {
        for n in &mut self.nodes {
            n.value.set_grad(None);
        }
        self.backward_done = false;
    }

    /// Populates `grad` on every leaf that requires it.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(TensorError::BackwardTwice);
        }
        let shape = self.shape(loss);
        if self.value(loss).numel() != 1 {
            return Err(TensorError::NonScalarLoss(shape.to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            if matches!(self.nodes[i].op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            let deltas = self.input_grads(i, &g);
            let inputs = self.nodes[i].inputs.clone();
            for (input, delta) in inputs.into_iter().zip(deltas) {
                if let Some(d) = delta {
                    accumulate(&mut grads[input.0], d);
                }
            }
        }
        for (i, g) in grads.into_iter().enumerate() {
            let node = &mut self.nodes[i];
            if matches!(node.op, Op::Leaf) && node.value.requires_grad() {
                let len = node.value.numel();
                node.value.set_grad(Some(g.unwrap_or_else(|| vec![0.0; len])));
            }
        }
        self.backward_done = true;
        Ok(())
    }

    /// Vector-Jacobian products of node `i` for each of its inputs.
    fn input_grads(&self, i: usize, g: &[f64]) -> Vec<Option<Vec<f64>>> {
        let node = &self.nodes[i];
        let wants: Vec<bool> = node.inputs.iter().map(|v| self.nodes[v.0].needs_grad).collect();
        let input = |k: usize| &self.nodes[node.inputs[k].0].value;
        let out = &node.value;
        match &node.op {
            Op::Leaf => vec![],
            Op::MatMul => {
                let (a, b) = (input(0), input(1));
                let (p, q, r) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                let da = wants[0].then(|| {
                    let mut d = vec![0.0; p * q];
                    gemm(p, r, q, g, (r, 1), b.data(), (1, r), 0.0, &mut d);
                    d
                });
                let db = wants[1].then(|| {
                    let mut d = vec![0.0; q * r];
                    gemm(q, p, r, a.data(), (1, q), g, (r, 1), 0.0, &mut d);
                    d
                });
                vec![da, db]
            }
            Op::BatchMatMul => {
                let (a, b) = (input(0), input(1));
                let (n, p, q, r) = (a.shape()[0], a.shape()[1], a.shape()[2], b.shape()[2]);
                let da = wants[0].then(|| {
                    let mut d = vec![0.0; n * p * q];
                    for k in 0..n {
                        gemm(
                            p,
                            r,
                            q,
                            &g[k * p * r..(k + 1) * p * r],
                            (r, 1),
                            &b.data()[k * q * r..(k + 1) * q * r],
                            (1, r),
                            0.0,
                            &mut d[k * p * q..(k + 1) * p * q],
                        );
                    }
                    d
                });
                let db = wants[1].then(|| {
                    let mut d = vec![0.0; n * q * r];
                    for k in 0..n {
                        gemm(
                            q,
                            p,
                            r,
                            &a.data()[k * p * q..(k + 1) * p * q],
                            (1, q),
                            &g[k * p * r..(k + 1) * p * r],
                            (r, 1),
                            0.0,
                            &mut d[k * q * r..(k + 1) * q * r],
                        );
                    }
                    d
                });
                vec![da, db]
            }
            Op::Add | Op::Sub | Op::Mul => {
                let (a, b) = (input(0), input(1));
                let p = pairing("", a, b).expect("checked in forward");
                // gradient w.r.t. a tensor acting elementwise as `other`
                let reduce = |full: Vec<f64>, scalar_side: bool| -> Vec<f64> {
                    if scalar_side {
                        vec![full.iter().sum()]
                    } else {
                        full
                    }
                };
                let other_at = |t: &Tensor, idx: usize| -> f64 {
                    if t.numel() == 1 {
                        t.data()[0]
                    } else {
                        t.data()[idx]
                    }
                };
                let left_scalar = matches!(p, Pairing::LeftScalar);
                let right_scalar = matches!(p, Pairing::RightScalar);
                let (ga, gb): (Vec<f64>, Vec<f64>) = match node.op {
                    Op::Add => (g.to_vec(), g.to_vec()),
                    Op::Sub => (g.to_vec(), g.iter().map(|x| -x).collect()),
                    _ => (
                        g.iter().enumerate().map(|(k, x)| x * other_at(b, k)).collect(),
                        g.iter().enumerate().map(|(k, x)| x * other_at(a, k)).collect(),
                    ),
                };
                vec![
                    wants[0].then(|| reduce(ga, left_scalar)),
                    wants[1].then(|| reduce(gb, right_scalar)),
                ]
            }
            Op::Scale(c) => vec![Some(g.iter().map(|x| x * c).collect())],
            Op::Sigmoid => vec![Some(
                g.iter().zip(out.data()).map(|(g, y)| g * y * (1.0 - y)).collect(),
            )],
            Op::Relu => vec![Some(
                g.iter()
                    .zip(input(0).data())
                    .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                    .collect(),
            )],
            Op::Selu => vec![Some(
                g.iter()
                    .zip(input(0).data())
                    .zip(out.data())
                    .map(|((g, &x), &y)| {
                        if x > 0.0 {
                            g * SELU_LAMBDA
                        } else {
                            g * (y + SELU_LAMBDA * SELU_ALPHA)
                        }
                    })
                    .collect(),
            )],
            Op::Softplus => vec![Some(
                g.iter().zip(input(0).data()).map(|(g, &x)| g * sigmoid(x)).collect(),
            )],
            Op::Softmax { axis } => {
                let (outer, len, inner) = axis_split(out.shape(), *axis);
                let y = out.data();
                let mut d = vec![0.0; y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| o * len * inner + j * inner + i;
                        let dot: f64 = (0..len).map(|j| g[at(j)] * y[at(j)]).sum();
                        for j in 0..len {
                            d[at(j)] = y[at(j)] * (g[at(j)] - dot);
                        }
                    }
                }
                vec![Some(d)]
            }
            Op::Concat { axis } => {
                let (outer, _, inner) = axis_split(out.shape(), *axis);
                let chunks: Vec<usize> = node
                    .inputs
                    .iter()
                    .map(|v| self.nodes[v.0].value.shape()[*axis] * inner)
                    .collect();
                let total: usize = chunks.iter().sum();
                let mut parts: Vec<Vec<f64>> =
                    chunks.iter().map(|c| Vec::with_capacity(c * outer)).collect();
                for o in 0..outer {
                    let mut offset = o * total;
                    for (k, &c) in chunks.iter().enumerate() {
                        parts[k].extend_from_slice(&g[offset..offset + c]);
                        offset += c;
                    }
                }
                parts.into_iter().zip(wants).map(|(p, w)| w.then_some(p)).collect()
            }
            Op::Reshape => vec![Some(g.to_vec())],
            Op::Transpose => {
                let (_, d) = permute_data(g, out.shape(), &[1, 0]);
                vec![Some(d)]
            }
            Op::Permute(axes) => {
                let mut inverse = vec![0; axes.len()];
                for (k, &a) in axes.iter().enumerate() {
                    inverse[a] = k;
                }
                let (_, d) = permute_data(g, out.shape(), &inverse);
                vec![Some(d)]
            }
            Op::Sum => vec![Some(vec![g[0]; input(0).numel()])],
            Op::Mean => {
                let n = input(0).numel();
                vec![Some(vec![g[0] / n as f64; n])]
            }
            Op::WeightedBce { targets, weights } => {
                let n = targets.len() as f64;
                let d = input(0)
                    .data()
                    .iter()
                    .zip(targets)
                    .zip(weights)
                    .map(|((&p, &y), &w)| {
                        if !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&p) {
                            return 0.0;
                        }
                        -w * (y / p - (1.0 - y) / (1.0 - p)) / n * g[0]
                    })
                    .collect();
                vec![Some(d)]
            }
            Op::Mse { targets } => {
                let n = targets.len() as f64;
                let d = input(0)
                    .data()
                    .iter()
                    .zip(targets)
                    .map(|(p, t)| 2.0 * (p - t) / n * g[0])
                    .collect();
                vec![Some(d)]
            }
        }
    }
}
