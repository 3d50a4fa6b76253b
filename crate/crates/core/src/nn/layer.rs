use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, NnError};

/// Probability clamp used by [`bce_loss`].
pub const BCE_EPS: f64 = 1e-12;

/// Fully connected layer computing `W x + b`, with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayer")]
pub struct LinearLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Deserialize)]
struct RawLayer {
    weight: Matrix,
    bias: Vec<f64>,
}

impl TryFrom<RawLayer> for LinearLayer {
    type Error = NnError;

    fn try_from(raw: RawLayer) -> Result<Self, Self::Error> {
        LinearLayer::new(raw.weight, raw.bias)
    }
}

impl LinearLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self, NnError> {
        if bias.len() != weight.rows() {
            return Err(NnError::ShapeMismatch {
                expected: weight.rows(),
                found: bias.len(),
            });
        }
        if let Some(index) = bias.iter().position(|b| !b.is_finite()) {
            return Err(NnError::NonFinite { index });
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (in + out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        let bound = glorot_bound(out_dim, in_dim);
        let mut layer = Self::zeros(out_dim, in_dim);
        for w in layer.weight.as_mut_slice() {
            *w = rng.random_range(-bound..=bound);
        }
        layer
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.in_dim() {
            return Err(NnError::ShapeMismatch {
                expected: self.in_dim(),
                found: x.len(),
            });
        }
        let mut out = vec![0.0; self.out_dim()];
        self.forward_into(x, &mut out);
        Ok(out)
    }

    #[inline]
    pub(crate) fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        self.weight.mul_vec_cols_into(0, x, out);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
    }
}

pub fn glorot_bound(out_dim: usize, in_dim: usize) -> f64 {
    (6.0 / (in_dim + out_dim) as f64).sqrt()
}

pub fn linear_forward(layer: &LinearLayer, x: &[f64]) -> Result<Vec<f64>, NnError> {
    layer.forward(x)
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

#[inline]
pub fn relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Logistic sigmoid, evaluated so that neither branch overflows.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_vec(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| sigmoid(v)).collect()
}

/// Binary cross-entropy of probability `p` against label `y ∈ {0, 1}`, with
/// `p` clamped to `[BCE_EPS, 1 - BCE_EPS]`.
pub fn bce_loss(p: f64, y: f64) -> Result<f64, NnError> {
    if y != 0.0 && y != 1.0 {
        return Err(NnError::BadLabel(y));
    }
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    Ok(loss.max(0.0))
}
