//! Reconstruction of missing markers in optical motion-capture sequences.
//!
//! The crate covers the full path from raw BVH files to experiment reports:
//!
//! * [`bvh`] — parsing, forward kinematics and serialization of BVH documents
//! * [`pipeline`] — hip-centering, normalization, dataset splits and sliding windows
//! * [`corruption`] — missing-marker mask sampling and the train-time corruption map
//! * [`nn`] — dense/LSTM layers with analytic gradients, dropout, MSE and Adam
//! * [`model`] — the window-based and LSTM reconstruction networks, training and persistence
//! * [`baselines`] — linear interpolation and mean-pose fill reference reconstructors
//! * [`eval`] — the RMSE-over-missing-markers metric and experiment drivers
//! * [`synth`] — a deterministic synthetic mocap dataset generator for tests and demos
//!
//! All numeric kernels are data-parallel over rows/frames/cells when the
//! `parallel` feature (default) is enabled, with a sequential fallback when it
//! is disabled. Both paths perform floating-point operations in the same
//! order, so results are bit-identical regardless of thread count.

pub mod baselines;
pub mod bvh;
pub mod corruption;
pub mod eval;
pub mod files;
pub mod model;
pub mod nn;
pub mod parallel;
pub mod pipeline;
pub mod synth;
pub mod tensor;

pub use tensor::Tensor2;
