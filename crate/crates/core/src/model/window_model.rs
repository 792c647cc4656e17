//! Window-based reconstruction network: a fully connected net over a
//! flattened window of poses, tanh hidden layers, identity output, no
//! bottleneck.

use super::ModelError;
use crate::nn::{
    dense_backward, dense_forward, dropout, dropout_backward, glorot_uniform, Activation,
    DenseCache, DenseGrads, DenseLayerParams, DropoutMask, NnError,
};
use crate::Tensor2;
use rand::{Rng, SeedableRng};

/// RNG for inference paths; dropout is off there, so it is never sampled.
fn inference_rng() -> rand_chacha::ChaCha8Rng {
    rand_chacha::ChaCha8Rng::seed_from_u64(0)
}

/// Dense layers of the window net. Input and output width are both
/// `window_len * dims`; hidden layers share `width`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowModelParams {
    pub layers: Vec<DenseLayerParams>,
    pub window_len: usize,
    /// Pose dimensionality 3n.
    pub dims: usize,
}

impl WindowModelParams {
    /// `depth` hidden layers of `width` units plus the output layer.
    pub fn init<R: Rng>(
        width: usize,
        depth: usize,
        window_len: usize,
        dims: usize,
        rng: &mut R,
    ) -> Self {
        let io = window_len * dims;
        let mut sizes = Vec::with_capacity(depth + 1);
        let mut prev = io;
        for _ in 0..depth {
            sizes.push((width, prev));
            prev = width;
        }
        sizes.push((io, prev));
        let layers = sizes
            .into_iter()
            .map(|(out, inp)| {
                DenseLayerParams::new(glorot_uniform(out, inp, inp, out, rng), vec![0.0; out])
            })
            .collect();
        WindowModelParams {
            layers,
            window_len,
            dims,
        }
    }

    pub fn io_dim(&self) -> usize {
        self.window_len * self.dims
    }

    /// Activation per layer position: tanh on hidden, identity on output.
    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            Activation::Identity
        } else {
            Activation::Tanh
        }
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            let DenseLayerParams { w, b } = l;
            out.push(w.data_mut());
            out.push(b.as_mut_slice());
        }
        out
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.w.len(), l.b.len()])
            .collect()
    }
}

/// Forward-pass record for one batch.
pub struct WindowForward {
    caches: Vec<DenseCache>,
    masks: Vec<DropoutMask>,
    pub output: Tensor2,
}

/// Batched forward pass over flattened windows (B × window_len·dims).
/// Dropout is applied to hidden activations at training time only.
pub fn window_forward<R: Rng>(
    p: &WindowModelParams,
    x: &Tensor2,
    keep_prob: f64,
    rng: &mut R,
    training: bool,
) -> Result<WindowForward, ModelError> {
    if x.cols() != p.io_dim() {
        return Err(ModelError::Nn(NnError::DimensionMismatch {
            op: "window_forward",
            expected: (x.rows(), p.io_dim()),
            got: (x.rows(), x.cols()),
        }));
    }
    let mut caches = Vec::with_capacity(p.layers.len());
    let mut masks = Vec::with_capacity(p.layers.len());
    let mut cur = x.clone();
    for (i, layer) in p.layers.iter().enumerate() {
        let (mut y, cache) = dense_forward(layer, &cur, p.activation(i))?;
        caches.push(cache);
        if i + 1 < p.layers.len() {
            let (dropped, mask) = dropout(&y, keep_prob, rng, training)?;
            masks.push(mask);
            y = dropped;
        }
        cur = y;
    }
    Ok(WindowForward {
        caches,
        masks,
        output: cur,
    })
}

/// Gradients for every layer given dL/doutput, in layer order.
pub fn window_backward(
    p: &WindowModelParams,
    fwd: &WindowForward,
    d_out: &Tensor2,
) -> Result<Vec<DenseGrads>, ModelError> {
    let mut grads: Vec<Option<DenseGrads>> = (0..p.layers.len()).map(|_| None).collect();
    let mut dy = d_out.clone();
    for i in (0..p.layers.len()).rev() {
        let (g, dx) = dense_backward(&p.layers[i], &fwd.caches[i], p.activation(i), &dy)?;
        grads[i] = Some(g);
        dy = if i > 0 {
            dropout_backward(&dx, &fwd.masks[i - 1])
        } else {
            dx
        };
    }
    Ok(grads.into_iter().map(|g| g.unwrap()).collect())
}

/// Inference on a single window (window_len × dims in, same shape out).
pub fn reconstruct_window(
    p: &WindowModelParams,
    corrupted_window: &Tensor2,
) -> Result<Tensor2, ModelError> {
    if corrupted_window.rows() != p.window_len || corrupted_window.cols() != p.dims {
        return Err(ModelError::Nn(NnError::DimensionMismatch {
            op: "reconstruct_window",
            expected: (p.window_len, p.dims),
            got: (corrupted_window.rows(), corrupted_window.cols()),
        }));
    }
    let flat = Tensor2::from_vec(1, p.io_dim(), corrupted_window.data().to_vec());
    let mut dummy = inference_rng();
    let fwd = window_forward(p, &flat, 1.0, &mut dummy, false)?;
    Ok(Tensor2::from_vec(
        p.window_len,
        p.dims,
        fwd.output.data().to_vec(),
    ))
}

/// Apply the window net over a whole sequence, one frame at a time.
///
/// Frame t of the result is the last frame of the net's output on the window
/// ending at t; the first window additionally provides frames 0..len−1.
pub(super) fn reconstruct_sliding(
    p: &WindowModelParams,
    corrupted: &Tensor2,
) -> Result<Tensor2, ModelError> {
    let frames = corrupted.rows();
    let dims = corrupted.cols();
    if dims != p.dims {
        return Err(ModelError::Nn(NnError::DimensionMismatch {
            op: "reconstruct_sliding",
            expected: (p.window_len, p.dims),
            got: (frames, dims),
        }));
    }
    let len = p.window_len;
    if frames < len {
        return Err(ModelError::Pipeline(
            crate::pipeline::PipelineError::SequenceTooShort {
                frames,
                window: len,
            },
        ));
    }
    let starts: Vec<usize> = (0..=frames - len).collect();
    let mut out = Tensor2::zeros(frames, dims);
    let mut dummy = inference_rng();
    // Batch the windows in chunks to bound memory.
    const CHUNK: usize = 256;
    for chunk in starts.chunks(CHUNK) {
        let mut batch = Tensor2::zeros(chunk.len(), len * dims);
        for (r, &s) in chunk.iter().enumerate() {
            let row = batch.row_mut(r);
            for t in 0..len {
                row[t * dims..(t + 1) * dims].copy_from_slice(corrupted.row(s + t));
            }
        }
        let fwd = window_forward(p, &batch, 1.0, &mut dummy, false)?;
        for (r, &s) in chunk.iter().enumerate() {
            let yrow = fwd.output.row(r);
            if s == 0 {
                for t in 0..len {
                    out.row_mut(t).copy_from_slice(&yrow[t * dims..(t + 1) * dims]);
                }
            } else {
                let t = s + len - 1;
                out.row_mut(t)
                    .copy_from_slice(&yrow[(len - 1) * dims..len * dims]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{gradcheck, mse_loss};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shape_contract_window_in_window_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = WindowModelParams::init(16, 2, 10, 123, &mut rng);
        assert_eq!(p.io_dim(), 1230);
        let window = Tensor2::zeros(10, 123);
        let y = reconstruct_window(&p, &window).unwrap();
        assert_eq!((y.rows(), y.cols()), (10, 123));
        assert!(y.is_all_finite());
    }

    #[test]
    fn all_missing_input_stays_finite_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = WindowModelParams::init(32, 2, 4, 6, &mut rng);
        let window = Tensor2::zeros(4, 6); // everything nullified
        let y = reconstruct_window(&p, &window).unwrap();
        assert!(y.is_all_finite());
        // Output layer is affine over tanh activations with zero biases and
        // Glorot weights; magnitudes stay small.
        assert!(y.data().iter().all(|v| v.abs() < 10.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = WindowModelParams::init(5, 2, 3, 2, &mut rng);
        let x = glorot_uniform(4, 6, 2, 2, &mut rng);
        let target = glorot_uniform(4, 6, 2, 2, &mut rng);

        let loss_of = |p: &WindowModelParams| {
            let mut dummy = inference_rng();
            let fwd = window_forward(p, &x, 1.0, &mut dummy, false).unwrap();
            mse_loss(&fwd.output, &target).unwrap().0
        };

        let mut dummy = inference_rng();
        let fwd = window_forward(&p, &x, 1.0, &mut dummy, false).unwrap();
        let (_, dy) = mse_loss(&fwd.output, &target).unwrap();
        let grads = window_backward(&p, &fwd, &dy).unwrap();

        for (li, g) in grads.iter().enumerate() {
            let mut flat = p.layers[li].w.data().to_vec();
            let fd = gradcheck::central_diff(
                |ws| {
                    let mut p2 = p.clone();
                    p2.layers[li].w = Tensor2::from_vec(
                        p.layers[li].w.rows(),
                        p.layers[li].w.cols(),
                        ws.to_vec(),
                    );
                    loss_of(&p2)
                },
                &mut flat,
                1e-6,
            );
            let err = gradcheck::rel_error(g.dw.data(), &fd);
            assert!(err < 1e-6, "layer {li} dW error {err}");
        }
    }

    #[test]
    fn sliding_reconstruction_covers_every_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = WindowModelParams::init(8, 1, 3, 4, &mut rng);
        let seq = glorot_uniform(10, 4, 2, 2, &mut rng);
        let out = reconstruct_sliding(&p, &seq).unwrap();
        assert_eq!(out.rows(), 10);
        assert!(out.is_all_finite());
        // One output per input frame; frame t ≥ len−1 must equal the last
        // frame of the forward pass on the window ending at t.
        let window = seq.rows_slice(5, 3);
        let y = reconstruct_window(&p, &window).unwrap();
        for c in 0..4 {
            assert!((out.get(7, c) - y.get(2, c)).abs() < 1e-12);
        }
    }
}
