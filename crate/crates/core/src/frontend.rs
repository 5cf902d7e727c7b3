//! Interchangeable imputation front-ends sharing one batched interface.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Graph, Var};
use crate::baselines::{self, FilmLayer, SnScaling};
use crate::main_layer::{MainLayer, MainLayerConfig, MainLayerError};
use crate::nn::{Bound, ParamSet};
use crate::pev::{self, PevError};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum FrontEndError {
    #[error("unknown method `{0}`; valid methods are zimc, sn, film, main")]
    UnknownMethod(String),
    #[error(transparent)]
    Main(#[from] MainLayerError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Pev(#[from] PevError),
    #[error("batch has {got} features, front-end expects {expected}")]
    Width { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Zimc,
    Sn,
    Film,
    Main,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Zimc, Method::Sn, Method::Film, Method::Main];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Zimc => "zimc",
            Method::Sn => "sn",
            Method::Film => "film",
            Method::Main => "main",
        }
    }

    /// Display label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Zimc => "ZIMC",
            Method::Sn => "SN",
            Method::Film => "FiLM",
            Method::Main => "MAIN",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = FrontEndError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zimc" => Ok(Method::Zimc),
            "sn" => Ok(Method::Sn),
            "film" => Ok(Method::Film),
            "main" => Ok(Method::Main),
            _ => Err(FrontEndError::UnknownMethod(s.to_string())),
        }
    }
}

/// Row-major batch of instances. `values` are zero wherever `mask` is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBatch {
    pub rows: usize,
    pub n_features: usize,
    pub values: Vec<f64>,
    /// 1 = observed.
    pub mask: Vec<u8>,
}

impl InputBatch {
    pub fn new(n_features: usize) -> Self {
        Self {
            rows: 0,
            n_features,
            values: Vec::new(),
            mask: Vec::new(),
        }
    }

    /// Appends one instance, zeroing values under missing cells.
    pub fn push(&mut self, values: &[f64], mask: &[u8]) {
        assert_eq!(values.len(), self.n_features);
        assert_eq!(mask.len(), self.n_features);
        self.values
            .extend(values.iter().zip(mask).map(|(&v, &m)| if m != 0 { v } else { 0.0 }));
        self.mask.extend_from_slice(mask);
        self.rows += 1;
    }

    pub fn row(&self, i: usize) -> (&[f64], &[u8]) {
        let n = self.n_features;
        (&self.values[i * n..(i + 1) * n], &self.mask[i * n..(i + 1) * n])
    }

    pub fn mask_tensor(&self) -> Tensor {
        Tensor::new(
            &[self.rows, self.n_features],
            self.mask.iter().map(|&m| f64::from(m)).collect(),
        )
        .expect("consistent batch")
    }

    pub fn values_tensor(&self) -> Tensor {
        Tensor::new(&[self.rows, self.n_features], self.values.clone()).expect("consistent batch")
    }

    /// `[rows * n, 2 + bw]` PEV rows.
    pub fn augmented(&self) -> Result<Tensor, PevError> {
        let n = self.n_features;
        let width = 2 + pev::bit_width(n);
        let mut data = Vec::with_capacity(self.rows * n * width);
        for i in 0..self.rows {
            let (v, m) = self.row(i);
            data.extend_from_slice(&pev::pev_from_masked(v, m)?.augmented);
        }
        Ok(Tensor::new(&[self.rows * n, width], data).expect("consistent batch"))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontEndOptions {
    pub main: MainLayerConfig,
    pub sn_scaling: SnScaling,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrontEnd {
    Zimc { n_features: usize },
    Sn { n_features: usize, scaling: SnScaling },
    Film(FilmLayer),
    Main(MainLayer),
}

impl FrontEnd {
    /// Adds the front-end's parameters (if any) to `params` under the `fe.` prefix.
    pub fn build(
        method: Method,
        n_features: usize,
        options: &FrontEndOptions,
        params: &mut ParamSet,
        rng: &mut impl Rng,
    ) -> Result<Self, FrontEndError> {
        Ok(match method {
            Method::Zimc => FrontEnd::Zimc { n_features },
            Method::Sn => FrontEnd::Sn {
                n_features,
                scaling: options.sn_scaling,
            },
            Method::Film => FrontEnd::Film(FilmLayer::new(params, "fe.film", n_features, rng)),
            Method::Main => FrontEnd::Main(MainLayer::new(params, "fe.main", n_features, options.main.clone(), rng)?),
        })
    }

    pub fn method(&self) -> Method {
        match self {
            FrontEnd::Zimc { .. } => Method::Zimc,
            FrontEnd::Sn { .. } => Method::Sn,
            FrontEnd::Film(_) => Method::Film,
            FrontEnd::Main(_) => Method::Main,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            FrontEnd::Zimc { n_features } | FrontEnd::Sn { n_features, .. } => *n_features,
            FrontEnd::Film(l) => l.n_features,
            FrontEnd::Main(l) => l.n_features,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FrontEnd::Zimc { n_features } => 2 * n_features,
            FrontEnd::Sn { n_features, .. } | FrontEnd::Film(FilmLayer { n_features, .. }) => *n_features,
            FrontEnd::Main(l) => l.output_dim(),
        }
    }

    /// Opacity gate value for the attention front-end.
    pub fn gate(&self, params: &ParamSet) -> Option<f64> {
        match self {
            FrontEnd::Main(l) => Some(l.gate_value(params)),
            _ => None,
        }
    }

    /// Maps a batch to the `[rows, output_dim]` downstream input.
    pub fn forward(&self, g: &mut Graph, bound: &Bound, batch: &InputBatch) -> Result<Var, FrontEndError> {
        if batch.n_features != self.n_features() {
            return Err(FrontEndError::Width {
                got: batch.n_features,
                expected: self.n_features(),
            });
        }
        let (rows, n) = (batch.rows, batch.n_features);
        match self {
            FrontEnd::Zimc { .. } => {
                let mut data = Vec::with_capacity(rows * 2 * n);
                for i in 0..rows {
                    let (v, m) = batch.row(i);
                    data.extend(baselines::zimc(v, m).expect("row lengths match"));
                }
                Ok(g.constant(Tensor::new(&[rows, 2 * n], data)?))
            }
            FrontEnd::Sn { scaling, .. } => {
                let mut data = Vec::with_capacity(rows * n);
                for i in 0..rows {
                    let (v, m) = batch.row(i);
                    data.extend(baselines::sparsity_normalize(v, m, *scaling).expect("row lengths match").values);
                }
                Ok(g.constant(Tensor::new(&[rows, n], data)?))
            }
            FrontEnd::Film(layer) => {
                let masked = g.constant(batch.values_tensor());
                let mask = g.constant(batch.mask_tensor());
                Ok(layer.forward(g, bound, masked, mask)?.output)
            }
            FrontEnd::Main(layer) => {
                let aug = g.constant(batch.augmented()?);
                Ok(layer.forward(g, bound, aug, rows)?.output)
            }
        }
    }
}
