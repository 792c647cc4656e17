//! Minimal numerical core: dense layers, LSTM cells, dropout, MSE loss,
//! exact analytic gradients and the Adam optimizer.
//!
//! Everything is double precision. Ops validate dimensions up front and check
//! their outputs for NaN/Inf; the first op that observes a non-finite value
//! reports it instead of letting it propagate.

mod adam;
mod dense;
mod dropout;
pub mod gradcheck;
mod init;
mod loss;
mod lstm;

pub use adam::{adam_step, AdamState};
pub use dense::{dense_backward, dense_forward, DenseCache, DenseGrads, DenseLayerParams};
pub use dropout::{dropout, dropout_backward, DropoutMask};
pub use init::{glorot_uniform, glorot_vec};
pub use loss::mse_loss;
pub use lstm::{
    lstm_step, lstm_step_backward, LstmCellParams, LstmGrads, LstmStepCache,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{op}: dimension mismatch, expected {expected:?} got {got:?}")]
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("{op}: non-finite value produced")]
    NonFinite { op: &'static str },
    #[error("keep probability {0} outside (0, 1]")]
    BadProbability(f64),
}

/// Elementwise activation applied after the affine map of a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed in terms of the activation output.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn check_finite(t: &crate::Tensor2, op: &'static str) -> Result<(), NnError> {
    if t.is_all_finite() {
        Ok(())
    } else {
        Err(NnError::NonFinite { op })
    }
}
