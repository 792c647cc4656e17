//! Weight initialization.

use crate::Tensor2;
use rand::Rng;

/// Uniform Glorot initialization in ±sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<R: Rng>(
    rows: usize,
    cols: usize,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor2 {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    Tensor2::from_vec(rows, cols, data)
}

/// Constant-filled bias vector.
pub fn glorot_vec(len: usize, value: f64) -> Vec<f64> {
    vec![value; len]
}
