//! LSTM-based reconstruction network: stacked LSTM cells with a dense
//! readout, emitting one reconstructed pose per incoming corrupted pose
//! using only past and current inputs.

use super::ModelError;
use crate::nn::{
    dense_backward, dense_forward, dropout, dropout_backward, glorot_uniform, lstm_step,
    lstm_step_backward, Activation, DenseCache, DenseGrads, DenseLayerParams, DropoutMask,
    LstmCellParams, LstmGrads, LstmStepCache, NnError,
};
use crate::Tensor2;
use rand::Rng;

/// Stacked cells plus the readout mapping the top hidden state to a pose.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModelParams {
    pub cells: Vec<LstmCellParams>,
    pub readout: DenseLayerParams,
    /// Pose dimensionality 3n.
    pub dims: usize,
}

impl LstmModelParams {
    pub fn init<R: Rng>(width: usize, depth: usize, dims: usize, rng: &mut R) -> Self {
        let mut cells = Vec::with_capacity(depth);
        let mut input = dims;
        for _ in 0..depth {
            cells.push(LstmCellParams::init(input, width, rng));
            input = width;
        }
        let readout =
            DenseLayerParams::new(glorot_uniform(dims, width, width, dims, rng), vec![0.0; dims]);
        LstmModelParams {
            cells,
            readout,
            dims,
        }
    }

    pub fn hidden(&self) -> usize {
        self.cells[0].hidden()
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for c in &mut self.cells {
            let LstmCellParams {
                w_input,
                w_forget,
                w_output,
                w_candidate,
                b_input,
                b_forget,
                b_output,
                b_candidate,
            } = c;
            out.push(w_input.data_mut());
            out.push(b_input.as_mut_slice());
            out.push(w_forget.data_mut());
            out.push(b_forget.as_mut_slice());
            out.push(w_output.data_mut());
            out.push(b_output.as_mut_slice());
            out.push(w_candidate.data_mut());
            out.push(b_candidate.as_mut_slice());
        }
        let DenseLayerParams { w, b } = &mut self.readout;
        out.push(w.data_mut());
        out.push(b.as_mut_slice());
        out
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for c in &self.cells {
            out.extend([
                c.w_input.len(),
                c.b_input.len(),
                c.w_forget.len(),
                c.b_forget.len(),
                c.w_output.len(),
                c.b_output.len(),
                c.w_candidate.len(),
                c.b_candidate.len(),
            ]);
        }
        out.extend([self.readout.w.len(), self.readout.b.len()]);
        out
    }
}

/// Per-step records of an unrolled forward pass.
pub struct LstmSeqForward {
    /// step_caches[t][layer]
    step_caches: Vec<Vec<LstmStepCache>>,
    /// dropout_masks[t][layer] applied to that layer's upward output
    dropout_masks: Vec<Vec<DropoutMask>>,
    readout_caches: Vec<DenseCache>,
    /// One B × dims output per timestep.
    pub outputs: Vec<Tensor2>,
}

/// Unrolled forward over `inputs[t]` (each B × dims). Dropout applies to the
/// upward connections only; the recurrent state is never dropped.
pub fn lstm_seq_forward<R: Rng>(
    p: &LstmModelParams,
    inputs: &[Tensor2],
    keep_prob: f64,
    rng: &mut R,
    training: bool,
) -> Result<LstmSeqForward, ModelError> {
    let depth = p.cells.len();
    let batch = inputs.first().map_or(0, |x| x.rows());
    let hidden = p.hidden();
    let mut h: Vec<Tensor2> = (0..depth).map(|_| Tensor2::zeros(batch, hidden)).collect();
    let mut c: Vec<Tensor2> = (0..depth).map(|_| Tensor2::zeros(batch, hidden)).collect();
    let mut fwd = LstmSeqForward {
        step_caches: Vec::with_capacity(inputs.len()),
        dropout_masks: Vec::with_capacity(inputs.len()),
        readout_caches: Vec::with_capacity(inputs.len()),
        outputs: Vec::with_capacity(inputs.len()),
    };
    for x in inputs {
        if x.cols() != p.dims || x.rows() != batch {
            return Err(ModelError::Nn(NnError::DimensionMismatch {
                op: "lstm_seq_forward",
                expected: (batch, p.dims),
                got: (x.rows(), x.cols()),
            }));
        }
        let mut caches = Vec::with_capacity(depth);
        let mut masks = Vec::with_capacity(depth);
        let mut up = x.clone();
        for (l, cell) in p.cells.iter().enumerate() {
            let (h_new, c_new, cache) = lstm_step(cell, &up, &h[l], &c[l])?;
            caches.push(cache);
            let (dropped, mask) = dropout(&h_new, keep_prob, rng, training)?;
            masks.push(mask);
            up = dropped;
            h[l] = h_new;
            c[l] = c_new;
        }
        let (y, rc) = dense_forward(&p.readout, &up, Activation::Identity)?;
        fwd.step_caches.push(caches);
        fwd.dropout_masks.push(masks);
        fwd.readout_caches.push(rc);
        fwd.outputs.push(y);
    }
    Ok(fwd)
}

/// Accumulated gradients for the whole model.
pub struct LstmModelGrads {
    pub cells: Vec<LstmGrads>,
    pub readout: DenseGrads,
}

impl LstmModelGrads {
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for g in &self.cells {
            out.push(g.dw_input.data());
            out.push(g.db_input.as_slice());
            out.push(g.dw_forget.data());
            out.push(g.db_forget.as_slice());
            out.push(g.dw_output.data());
            out.push(g.db_output.as_slice());
            out.push(g.dw_candidate.data());
            out.push(g.db_candidate.as_slice());
        }
        out.push(self.readout.dw.data());
        out.push(self.readout.db.as_slice());
        out
    }
}

/// Backpropagation through time given per-step output gradients.
pub fn lstm_seq_backward(
    p: &LstmModelParams,
    fwd: &LstmSeqForward,
    d_outputs: &[Tensor2],
) -> Result<LstmModelGrads, ModelError> {
    let depth = p.cells.len();
    let steps = fwd.outputs.len();
    assert_eq!(d_outputs.len(), steps, "one output gradient per step");
    let batch = fwd.outputs.first().map_or(0, |o| o.rows());
    let hidden = p.hidden();
    let mut cell_grads: Vec<LstmGrads> =
        p.cells.iter().map(LstmGrads::zeros_like).collect();
    let mut readout_grads = DenseGrads {
        dw: Tensor2::zeros(p.readout.w.rows(), p.readout.w.cols()),
        db: vec![0.0; p.readout.b.len()],
    };
    // Carried recurrent gradients per layer.
    let mut dh: Vec<Tensor2> = (0..depth).map(|_| Tensor2::zeros(batch, hidden)).collect();
    let mut dc: Vec<Tensor2> = (0..depth).map(|_| Tensor2::zeros(batch, hidden)).collect();
    for t in (0..steps).rev() {
        let (rg, dx_top) = dense_backward(
            &p.readout,
            &fwd.readout_caches[t],
            Activation::Identity,
            &d_outputs[t],
        )?;
        readout_grads.dw.add_assign(&rg.dw);
        for (a, b) in readout_grads.db.iter_mut().zip(&rg.db) {
            *a += b;
        }
        // Into the top cell: readout gradient through its dropout mask,
        // plus the recurrent gradient from step t+1.
        let top = depth - 1;
        dh[top].add_assign(&dropout_backward(&dx_top, &fwd.dropout_masks[t][top]));
        for l in (0..depth).rev() {
            let (g, dx, dh_prev, dc_prev) =
                lstm_step_backward(&p.cells[l], &fwd.step_caches[t][l], &dh[l], &dc[l])?;
            cell_grads[l].accumulate(&g);
            dh[l] = dh_prev;
            dc[l] = dc_prev;
            if l > 0 {
                dh[l - 1].add_assign(&dropout_backward(&dx, &fwd.dropout_masks[t][l - 1]));
            }
        }
    }
    Ok(LstmModelGrads {
        cells: cell_grads,
        readout: readout_grads,
    })
}

/// Online reconstruction state: hidden and cell state per layer for one
/// stream. Feed frames in order; each call emits exactly one output frame
/// computed from past and current inputs only.
pub struct LstmStream<'a> {
    params: &'a LstmModelParams,
    h: Vec<Tensor2>,
    c: Vec<Tensor2>,
}

impl<'a> LstmStream<'a> {
    pub fn new(params: &'a LstmModelParams) -> Self {
        let depth = params.cells.len();
        let hidden = params.hidden();
        LstmStream {
            params,
            h: (0..depth).map(|_| Tensor2::zeros(1, hidden)).collect(),
            c: (0..depth).map(|_| Tensor2::zeros(1, hidden)).collect(),
        }
    }

    /// Advance one frame and return the reconstructed pose.
    pub fn push(&mut self, frame: &[f64]) -> Result<Vec<f64>, ModelError> {
        if frame.len() != self.params.dims {
            return Err(ModelError::Nn(NnError::DimensionMismatch {
                op: "lstm_stream_push",
                expected: (1, self.params.dims),
                got: (1, frame.len()),
            }));
        }
        let mut up = Tensor2::from_vec(1, frame.len(), frame.to_vec());
        for (l, cell) in self.params.cells.iter().enumerate() {
            let (h_new, c_new, _) = lstm_step(cell, &up, &self.h[l], &self.c[l])?;
            up = h_new.clone();
            self.h[l] = h_new;
            self.c[l] = c_new;
        }
        let (y, _) = dense_forward(&self.params.readout, &up, Activation::Identity)?;
        Ok(y.data().to_vec())
    }
}

/// Stream a whole sequence of corrupted poses (F × dims) through the model.
/// Hidden state is carried across the entire sequence; an empty input yields
/// an empty output.
pub fn reconstruct_stream(
    p: &LstmModelParams,
    frames: &Tensor2,
) -> Result<Tensor2, ModelError> {
    let mut stream = LstmStream::new(p);
    let mut out = Tensor2::zeros(frames.rows(), frames.cols());
    for f in 0..frames.rows() {
        let y = stream.push(frames.row(f))?;
        out.row_mut(f).copy_from_slice(&y);
    }
    Ok(out)
}
