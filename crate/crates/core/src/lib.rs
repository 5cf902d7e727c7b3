//! Missing-data imputation front-ends trained jointly with a downstream
//! predictor.
//!
//! The attention front-end ([`main_layer`]) encodes every feature as a
//! positional encoded vector ([`pev`]), lets features attend over one another
//! with multi-head self-attention and blends the result through a trainable
//! opacity gate. Zero impute with mask concat, sparsity normalization and FiLM
//! ([`baselines`]) expose the same batched interface through [`frontend`].
//!
//! Everything runs on a small reverse-mode differentiation core
//! ([`autodiff`]) over dense `f64` tensors.

pub mod autodiff;
pub mod baselines;
pub mod dataset;
pub mod experiment;
pub mod frontend;
pub mod gradcheck;
pub mod main_layer;
pub mod metrics;
pub mod missingness;
pub mod nn;
pub mod pev;
pub mod synthetic;
pub mod tensor;
pub mod theory;
pub mod train;

pub use autodiff::{Graph, Var};
pub use frontend::{FrontEnd, InputBatch, Method};
pub use tensor::{Tensor, TensorError};
