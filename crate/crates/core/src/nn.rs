//! Parameter storage and the dense layers shared by every model.

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::tensor::{Tensor, TensorError};

/// Index of a tensor inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

/// Flat, ordered collection of trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
}

/// Graph handles for every parameter of a [`ParamSet`], same order.
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    /// Wraps handles given in parameter order.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Self(vars)
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            value,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Euclidean norm over the parameters whose name starts with `prefix`.
    pub fn norm_with_prefix(&self, prefix: &str) -> f64 {
        self.params
            .iter()
            .filter(|p| p.name.starts_with(prefix))
            .flat_map(|p| p.value.data())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Registers every tensor as a trainable leaf.
    pub fn bind(&self, graph: &mut Graph) -> Bound {
        Bound(self.params.iter().map(|p| graph.param(p.value.clone())).collect())
    }

    /// Registers every tensor as a constant (evaluation only).
    pub fn bind_frozen(&self, graph: &mut Graph) -> Bound {
        Bound(self.params.iter().map(|p| graph.constant(p.value.clone())).collect())
    }

    /// Gradients of a bound set after `graph.backward`.
    pub fn grads(&self, graph: &Graph, bound: &Bound) -> Vec<Vec<f64>> {
        bound
            .0
            .iter()
            .zip(&self.params)
            .map(|(&v, p)| {
                graph
                    .grad(v)
                    .map_or_else(|| vec![0.0; p.value.numel()], <[f64]>::to_vec)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Selu,
    Sigmoid,
    Softplus,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => g.relu(x),
            Activation::Selu => g.selu(x),
            Activation::Sigmoid => g.sigmoid(x),
            Activation::Softplus => g.softplus(x),
        }
    }
}

/// Fan-in scaled uniform init with unit-variance preserving bound `sqrt(3 / fan_in)`.
pub fn fan_in_uniform(rng: &mut impl Rng, fan_in: usize, shape: &[usize]) -> Tensor {
    let bound = (3.0 / fan_in.max(1) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("shape matches")
}

/// Affine map `x W + b` applied row-wise to an `[n, in]` input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(params: &mut ParamSet, name: &str, in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let weight = params.add(format!("{name}.weight"), fan_in_uniform(rng, in_dim, &[in_dim, out_dim]));
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(&[1, out_dim]));
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, g: &mut Graph, bound: &Bound, x: Var) -> Result<Var, TensorError> {
        let rows = g.shape(x)[0];
        let xw = g.matmul(x, bound.var(self.weight))?;
        // bias broadcast over rows as ones[n,1] x b[1,out]
        let ones = g.constant(Tensor::ones(&[rows, 1]));
        let b = g.matmul(ones, bound.var(self.bias))?;
        g.add(xw, b)
    }
}

/// Stack of [`Linear`] layers with one activation between hidden layers and an
/// optional output activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub hidden: Activation,
    pub output: Activation,
}

impl Mlp {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(params, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers, hidden, output }
    }

    pub fn forward(&self, g: &mut Graph, bound: &Bound, mut x: Var) -> Result<Var, TensorError> {
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(g, bound, x)?;
            let act = if i == last { self.output } else { self.hidden };
            x = act.apply(g, x);
        }
        Ok(x)
    }
}
