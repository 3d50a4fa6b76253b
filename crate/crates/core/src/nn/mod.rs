//! Dense neural-network engine: matrices, linear layers, activations,
//! binary cross-entropy, Adam and a finite-difference gradient checker.
//!
//! Only the two fixed link-prediction architectures are differentiated; their
//! reverse passes live next to the models in [`crate::models`].

mod adam;
mod gradcheck;
mod layer;
mod matrix;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, FD_STEP};
pub use layer::{bce_loss, glorot_bound, linear_forward, relu, relu_in_place, sigmoid, sigmoid_vec, LinearLayer, BCE_EPS};
pub use matrix::{dot, Matrix};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("label must be 0 or 1, got {0}")]
    BadLabel(f64),
    #[error("backward called without a recorded forward pass")]
    NoForwardRecorded,
}

/// A set of trainable tensors, visited in a fixed order.
///
/// Gradients use the same type as the parameters they belong to, so an
/// optimizer can zip the two visitations together.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Overwrites every parameter with zero.
    fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }
}

impl Parameters for Vec<f64> {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

impl Parameters for LinearLayer {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.weight.as_slice(), &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.as_mut_slice(), &mut self.bias]
    }
}

pub(crate) fn check_same_layout<P: Parameters>(a: &P, b: &P) -> Result<(), NnError> {
    let (ta, tb) = (a.tensors(), b.tensors());
    if ta.len() != tb.len() {
        return Err(NnError::ShapeMismatch {
            expected: ta.len(),
            found: tb.len(),
        });
    }
    for (x, y) in ta.iter().zip(&tb) {
        if x.len() != y.len() {
            return Err(NnError::ShapeMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
    }
    Ok(())
}
