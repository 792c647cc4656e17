//! Standard LSTM cell: gates over the concatenated `[x, h_prev]` vector,
//! with exact gradients for backpropagation through time.

use super::{check_finite, sigmoid, NnError};
use crate::nn::glorot_uniform;
use crate::Tensor2;
use rand::Rng;

/// Gate weights are hidden × (input + hidden); biases are hidden-vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub w_input: Tensor2,
    pub w_forget: Tensor2,
    pub w_output: Tensor2,
    pub w_candidate: Tensor2,
    pub b_input: Vec<f64>,
    pub b_forget: Vec<f64>,
    pub b_output: Vec<f64>,
    pub b_candidate: Vec<f64>,
}

impl LstmCellParams {
    /// Glorot-uniform weights; forget-gate bias 1, other biases 0.
    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let fan_in = input_dim + hidden;
        let gate = |rng: &mut R| glorot_uniform(hidden, fan_in, fan_in, hidden, rng);
        LstmCellParams {
            w_input: gate(rng),
            w_forget: gate(rng),
            w_output: gate(rng),
            w_candidate: gate(rng),
            b_input: vec![0.0; hidden],
            b_forget: vec![1.0; hidden],
            b_output: vec![0.0; hidden],
            b_candidate: vec![0.0; hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_input.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.cols() - self.hidden()
    }

    fn dims_consistent(&self) -> bool {
        let (h, z) = (self.w_input.rows(), self.w_input.cols());
        [&self.w_forget, &self.w_output, &self.w_candidate]
            .iter()
            .all(|w| w.rows() == h && w.cols() == z)
            && [&self.b_input, &self.b_forget, &self.b_output, &self.b_candidate]
                .iter()
                .all(|b| b.len() == h)
    }
}

/// Per-step activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    z: Tensor2,       // [x, h_prev], B × (in + hidden)
    gate_i: Tensor2,  // sigmoid outputs
    gate_f: Tensor2,
    gate_o: Tensor2,
    cand: Tensor2,    // tanh output
    c_prev: Tensor2,
    tanh_c: Tensor2,
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub dw_input: Tensor2,
    pub dw_forget: Tensor2,
    pub dw_output: Tensor2,
    pub dw_candidate: Tensor2,
    pub db_input: Vec<f64>,
    pub db_forget: Vec<f64>,
    pub db_output: Vec<f64>,
    pub db_candidate: Vec<f64>,
}

impl LstmGrads {
    pub fn zeros_like(p: &LstmCellParams) -> Self {
        let h = p.hidden();
        let z = p.w_input.cols();
        LstmGrads {
            dw_input: Tensor2::zeros(h, z),
            dw_forget: Tensor2::zeros(h, z),
            dw_output: Tensor2::zeros(h, z),
            dw_candidate: Tensor2::zeros(h, z),
            db_input: vec![0.0; h],
            db_forget: vec![0.0; h],
            db_output: vec![0.0; h],
            db_candidate: vec![0.0; h],
        }
    }

    pub fn accumulate(&mut self, other: &LstmGrads) {
        self.dw_input.add_assign(&other.dw_input);
        self.dw_forget.add_assign(&other.dw_forget);
        self.dw_output.add_assign(&other.dw_output);
        self.dw_candidate.add_assign(&other.dw_candidate);
        for (a, b) in self.db_input.iter_mut().zip(&other.db_input) {
            *a += b;
        }
        for (a, b) in self.db_forget.iter_mut().zip(&other.db_forget) {
            *a += b;
        }
        for (a, b) in self.db_output.iter_mut().zip(&other.db_output) {
            *a += b;
        }
        for (a, b) in self.db_candidate.iter_mut().zip(&other.db_candidate) {
            *a += b;
        }
    }
}

fn gate_preact(z: &Tensor2, w: &Tensor2, b: &[f64]) -> Tensor2 {
    let mut a = z.matmul_nt(w);
    a.add_row_vec(b);
    a
}

/// One LSTM recurrence step over a batch:
/// c = f ⊙ c_prev + i ⊙ g, h = o ⊙ tanh(c).
pub fn lstm_step(
    p: &LstmCellParams,
    x: &Tensor2,
    h_prev: &Tensor2,
    c_prev: &Tensor2,
) -> Result<(Tensor2, Tensor2, LstmStepCache), NnError> {
    let hid = p.hidden();
    if !p.dims_consistent() {
        return Err(NnError::DimensionMismatch {
            op: "lstm_step",
            expected: (hid, p.w_input.cols()),
            got: (p.w_forget.rows(), p.w_forget.cols()),
        });
    }
    if x.cols() != p.input_dim()
        || h_prev.cols() != hid
        || c_prev.cols() != hid
        || x.rows() != h_prev.rows()
        || x.rows() != c_prev.rows()
    {
        return Err(NnError::DimensionMismatch {
            op: "lstm_step",
            expected: (x.rows(), p.input_dim()),
            got: (x.rows(), x.cols()),
        });
    }
    let z = x.hcat(h_prev);
    let gate_i = {
        let mut a = gate_preact(&z, &p.w_input, &p.b_input);
        a.map_inplace(sigmoid);
        a
    };
    let gate_f = {
        let mut a = gate_preact(&z, &p.w_forget, &p.b_forget);
        a.map_inplace(sigmoid);
        a
    };
    let gate_o = {
        let mut a = gate_preact(&z, &p.w_output, &p.b_output);
        a.map_inplace(sigmoid);
        a
    };
    let cand = {
        let mut a = gate_preact(&z, &p.w_candidate, &p.b_candidate);
        a.map_inplace(f64::tanh);
        a
    };
    let mut c = gate_f.zip_map(c_prev, |f, cp| f * cp);
    let ig = gate_i.zip_map(&cand, |i, g| i * g);
    c.add_assign(&ig);
    let tanh_c = c.map(f64::tanh);
    let h = gate_o.zip_map(&tanh_c, |o, tc| o * tc);
    check_finite(&h, "lstm_step")?;
    check_finite(&c, "lstm_step")?;
    let cache = LstmStepCache {
        z,
        gate_i,
        gate_f,
        gate_o,
        cand,
        c_prev: c_prev.clone(),
        tanh_c,
    };
    Ok((h, c, cache))
}

/// Backward through one step. `dh` and `dc_next` are the loss gradients
/// flowing into h_t and c_t; returns parameter gradients plus the gradients
/// w.r.t. x_t, h_{t-1}, c_{t-1}.
pub fn lstm_step_backward(
    p: &LstmCellParams,
    cache: &LstmStepCache,
    dh: &Tensor2,
    dc_next: &Tensor2,
) -> Result<(LstmGrads, Tensor2, Tensor2, Tensor2), NnError> {
    let hid = p.hidden();
    let in_dim = p.input_dim();
    if dh.cols() != hid || dc_next.cols() != hid || dh.rows() != cache.z.rows() {
        return Err(NnError::DimensionMismatch {
            op: "lstm_step_backward",
            expected: (cache.z.rows(), hid),
            got: (dh.rows(), dh.cols()),
        });
    }
    let d_o = dh.zip_map(&cache.tanh_c, |g, tc| g * tc);
    let mut dc = dh.zip_map(&cache.gate_o, |g, o| g * o);
    dc = dc.zip_map(&cache.tanh_c, |g, tc| g * (1.0 - tc * tc));
    dc.add_assign(dc_next);

    let d_i = dc.zip_map(&cache.cand, |g, cd| g * cd);
    let d_g = dc.zip_map(&cache.gate_i, |g, i| g * i);
    let d_f = dc.zip_map(&cache.c_prev, |g, cp| g * cp);
    let dc_prev = dc.zip_map(&cache.gate_f, |g, f| g * f);

    // Pre-activation gradients.
    let da_i = d_i.zip_map(&cache.gate_i, |g, s| g * s * (1.0 - s));
    let da_f = d_f.zip_map(&cache.gate_f, |g, s| g * s * (1.0 - s));
    let da_o = d_o.zip_map(&cache.gate_o, |g, s| g * s * (1.0 - s));
    let da_g = d_g.zip_map(&cache.cand, |g, t| g * (1.0 - t * t));

    let grads = LstmGrads {
        dw_input: da_i.matmul_tn(&cache.z),
        dw_forget: da_f.matmul_tn(&cache.z),
        dw_output: da_o.matmul_tn(&cache.z),
        dw_candidate: da_g.matmul_tn(&cache.z),
        db_input: da_i.col_sums(),
        db_forget: da_f.col_sums(),
        db_output: da_o.col_sums(),
        db_candidate: da_g.col_sums(),
    };

    let mut dz = da_i.matmul(&p.w_input);
    dz.add_assign(&da_f.matmul(&p.w_forget));
    dz.add_assign(&da_o.matmul(&p.w_output));
    dz.add_assign(&da_g.matmul(&p.w_candidate));

    let dx = dz.columns(0, in_dim);
    let dh_prev = dz.columns(in_dim, hid);
    check_finite(&dx, "lstm_step_backward")?;
    check_finite(&dh_prev, "lstm_step_backward")?;
    Ok((grads, dx, dh_prev, dc_prev))
}
