//! Positional encoded vectors.
//!
//! Every feature of an instance becomes one row `[value, existence, position bits]`
//! so that a scalar feature turns into a vector that attention can query.
//! The existence bit is 1 when the feature is observed. Position bits are the
//! big-endian binary code of the zero-based feature index at width
//! `bit_width(n)`.

use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PevError {
    #[error("cannot encode an empty feature vector")]
    Empty,
    #[error("values and mask lengths differ ({values} vs {mask})")]
    Length { values: usize, mask: usize },
}

/// Number of position bits for `n` features: `ceil(log2 n)`, at least 1.
pub fn bit_width(n: usize) -> usize {
    if n <= 2 {
        1
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Fixed-width big-endian code of `index`.
pub fn position_code(index: usize, width: usize) -> Vec<u8> {
    assert!(
        width >= usize::BITS as usize || index >> width == 0,
        "index {index} does not fit in {width} bits"
    );
    (0..width).rev().map(|b| ((index >> b) & 1) as u8).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PevMatrix {
    pub rows: usize,
    pub bw: usize,
    /// 1 = observed.
    pub existence: Vec<u8>,
    /// `rows x bw`, row-major.
    pub position_codes: Vec<Vec<u8>>,
    /// `rows x (2 + bw)` row-major: `[value_filled, existence, bits...]`.
    pub augmented: Vec<f64>,
}

impl PevMatrix {
    pub fn width(&self) -> usize {
        2 + self.bw
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.augmented[i * w..(i + 1) * w]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(&[self.rows, self.width()], self.augmented.clone()).expect("consistent width")
    }

    /// Value column with missing entries zeroed, i.e. `x ⊙ m`.
    pub fn masked_values(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i)[0]).collect()
    }
}

/// Builds the PEV matrix and existence mask of one instance; `None` marks a
/// missing feature.
pub fn pev_mask_generator(x: &[Option<f64>]) -> Result<(PevMatrix, Vec<u8>), PevError> {
    let n = x.len();
    if n == 0 {
        return Err(PevError::Empty);
    }
    let bw = bit_width(n);
    let mut existence = Vec::with_capacity(n);
    let mut position_codes = Vec::with_capacity(n);
    let mut augmented = Vec::with_capacity(n * (2 + bw));
    for (i, value) in x.iter().enumerate() {
        let code = position_code(i, bw);
        let m = u8::from(value.is_some());
        augmented.push(value.unwrap_or(0.0));
        augmented.push(f64::from(m));
        augmented.extend(code.iter().map(|&b| f64::from(b)));
        existence.push(m);
        position_codes.push(code);
    }
    let pev = PevMatrix {
        rows: n,
        bw,
        existence: existence.clone(),
        position_codes,
        augmented,
    };
    Ok((pev, existence))
}

/// Same as [`pev_mask_generator`] for a dense value row plus existence mask.
pub fn pev_from_masked(values: &[f64], mask: &[u8]) -> Result<PevMatrix, PevError> {
    if values.len() != mask.len() {
        return Err(PevError::Length {
            values: values.len(),
            mask: mask.len(),
        });
    }
    let x: Vec<Option<f64>> = values
        .iter()
        .zip(mask)
        .map(|(&v, &m)| (m != 0).then_some(v))
        .collect();
    pev_mask_generator(&x).map(|(p, _)| p)
}

/// Stacks PEV rows for a batch into a `[batch * n, 2 + bw]` tensor.
pub fn batch_augmented(values: &[Vec<f64>], masks: &[Vec<u8>]) -> Result<Tensor, PevError> {
    let first = values.first().ok_or(PevError::Empty)?;
    let n = first.len();
    let width = 2 + bit_width(n.max(1));
    let mut data = Vec::with_capacity(values.len() * n * width);
    for (v, m) in values.iter().zip(masks) {
        let pev = pev_from_masked(v, m)?;
        if pev.rows != n {
            return Err(PevError::Length { values: pev.rows, mask: n });
        }
        data.extend_from_slice(&pev.augmented);
    }
    Ok(Tensor::new(&[values.len() * n, width], data).expect("consistent shape"))
}
