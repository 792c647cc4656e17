//! The two reconstruction networks and their training loop.
//!
//! The window model is a fully connected net mapping a flattened window of
//! corrupted poses to the corresponding clean window (tanh hidden layers,
//! identity output). The LSTM model is a stack of LSTM cells with a dense
//! readout emitting one reconstructed pose per incoming frame, online.
//!
//! Reconstructed sequences are composited: observed markers pass through
//! from the input, network output is used only where markers are missing.

mod lstm_model;
mod store;
mod train;
mod window_model;

pub use lstm_model::{
    lstm_seq_backward, lstm_seq_forward, reconstruct_stream, LstmModelGrads, LstmModelParams,
    LstmSeqForward, LstmStream,
};
pub use store::{config_hash, load_model, save_model, ModelFile};
pub use train::{train, TrainConfig, TrainLog};
pub use window_model::{
    reconstruct_window, window_backward, window_forward, WindowForward, WindowModelParams,
};

use crate::corruption::{CorruptionError, MaskSequence};
use crate::nn::NnError;
use crate::pipeline::PipelineError;
use crate::Tensor2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("config error: {0}")]
    Config(String),
    #[error("non-finite value at training step {step}")]
    NonFinite { step: usize },
    #[error("model file is corrupt: {0}")]
    CorruptFile(String),
    #[error("model mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Corruption(#[from] CorruptionError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which reconstruction network a config or model file refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Window,
    Lstm,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Window => "window",
            Architecture::Lstm => "lstm",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "window" => Ok(Architecture::Window),
            "lstm" => Ok(Architecture::Lstm),
            other => Err(ModelError::Config(format!(
                "unknown architecture `{other}`; expected `window` or `lstm`"
            ))),
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Learnable parameters of either architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Window(WindowModelParams),
    Lstm(LstmModelParams),
}

impl ModelParams {
    pub fn architecture(&self) -> Architecture {
        match self {
            ModelParams::Window(_) => Architecture::Window,
            ModelParams::Lstm(_) => Architecture::Lstm,
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            ModelParams::Window(p) => p.dims,
            ModelParams::Lstm(p) => p.dims,
        }
    }
}

/// Observed-marker passthrough: take network output only at missing cells.
pub fn composite(corrupted: &Tensor2, raw: &Tensor2, mask: &MaskSequence) -> Tensor2 {
    assert_eq!(corrupted.rows(), raw.rows());
    assert_eq!(corrupted.cols(), raw.cols());
    let mut out = corrupted.clone();
    for f in 0..mask.frames() {
        for m in 0..mask.markers() {
            if !mask.is_present(f, m) {
                for k in 0..3 {
                    out.set(f, 3 * m + k, raw.get(f, 3 * m + k));
                }
            }
        }
    }
    out
}

/// Reconstruct a full normalized sequence with either architecture, applying
/// observed-marker passthrough.
///
/// The window model slides one frame at a time: the reconstruction of frame
/// t comes from the window whose last frame is t (frames before the first
/// full window come from the first window's per-frame outputs). The LSTM
/// streams the sequence with hidden state carried across all frames.
pub fn reconstruct_sequence(
    params: &ModelParams,
    corrupted: &Tensor2,
    mask: &MaskSequence,
) -> Result<Tensor2, ModelError> {
    let raw = match params {
        ModelParams::Lstm(p) => reconstruct_stream(p, corrupted)?,
        ModelParams::Window(p) => window_model::reconstruct_sliding(p, corrupted)?,
    };
    Ok(composite(corrupted, &raw, mask))
}
