//! Training loop shared by both architectures: sample a batch of windows,
//! corrupt them (masking plus Gaussian input noise), minimize MSE against the
//! clean windows with Adam. Validation RMSE is computed per epoch with no
//! injected noise.

use super::{
    lstm_seq_backward, lstm_seq_forward, window_backward, window_forward, Architecture,
    LstmModelParams, ModelError, ModelParams, WindowModelParams,
};
use crate::corruption::{corrupt, sample_mask, GapSpec};
use crate::eval::rmse_missing;
use crate::model::reconstruct_sequence;
use crate::nn::{adam_step, mse_loss, AdamState, NnError};
use crate::pipeline::{window_starts, PreparedDataset, PreparedSequence};
use crate::Tensor2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// Hyperparameters for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub architecture: Architecture,
    /// Hidden width (LSTM units or dense units per hidden layer).
    pub width: usize,
    /// Number of LSTM layers / hidden dense layers.
    pub depth: usize,
    /// Dropout keep probability (1.0 disables dropout).
    pub keep_prob: f64,
    pub learning_rate: f64,
    /// Per-epoch learning-rate multiplier; 1.0 keeps the rate constant.
    pub lr_decay: f64,
    /// Window length Δt in frames.
    pub seq_len: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Input-noise coefficient α (train time only).
    pub noise_alpha: f64,
    /// Target missing rate for training masks.
    pub missing_rate: f64,
    pub gap_mean: f64,
    pub gap_std: f64,
    /// Sliding-window stride for training extraction.
    pub stride: usize,
    /// Even subsample cap per sequence; 0 keeps every window.
    pub max_windows_per_sequence: usize,
    pub rng_seed: u64,
}

impl TrainConfig {
    /// LSTM row of the published hyperparameter table.
    pub fn paper_lstm() -> Self {
        TrainConfig {
            architecture: Architecture::Lstm,
            width: 1024,
            depth: 2,
            keep_prob: 0.9,
            learning_rate: 2e-4,
            lr_decay: 1.0,
            seq_len: 64,
            batch_size: 32,
            epochs: 1,
            noise_alpha: 0.3,
            missing_rate: 0.2,
            gap_mean: 10.0,
            gap_std: 5.0,
            stride: 1,
            max_windows_per_sequence: 0,
            rng_seed: 1,
        }
    }

    /// Window row of the published hyperparameter table.
    pub fn paper_window() -> Self {
        TrainConfig {
            architecture: Architecture::Window,
            width: 512,
            depth: 2,
            keep_prob: 0.9,
            learning_rate: 1e-4,
            seq_len: 20,
            ..TrainConfig::paper_lstm()
        }
    }

    /// CPU-friendly LSTM configuration for tests and demos.
    pub fn desk_lstm() -> Self {
        TrainConfig {
            width: 256,
            seq_len: 32,
            learning_rate: 1e-3,
            max_windows_per_sequence: 512,
            ..TrainConfig::paper_lstm()
        }
    }

    /// CPU-friendly window configuration for tests and demos.
    pub fn desk_window() -> Self {
        TrainConfig {
            architecture: Architecture::Window,
            width: 256,
            // Short window variant; the table's 20 stays available.
            seq_len: 10,
            learning_rate: 5e-4,
            max_windows_per_sequence: 512,
            ..TrainConfig::desk_lstm()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Config(msg));
        if self.width == 0 || self.depth == 0 {
            return bad(format!("width/depth must be positive, got {}/{}", self.width, self.depth));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return bad(format!("keep_prob {} outside (0, 1]", self.keep_prob));
        }
        if self.learning_rate <= 0.0 || self.lr_decay <= 0.0 {
            return bad("learning_rate and lr_decay must be positive".into());
        }
        if self.seq_len == 0 || self.batch_size == 0 || self.stride == 0 {
            return bad("seq_len, batch_size and stride must be positive".into());
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad(format!("missing_rate {} outside [0, 1)", self.missing_rate));
        }
        if self.noise_alpha < 0.0 {
            return bad(format!("noise_alpha {} must be non-negative", self.noise_alpha));
        }
        if self.gap_mean <= 0.0 || self.gap_std < 0.0 {
            return bad("gap_mean must be positive and gap_std non-negative".into());
        }
        Ok(())
    }

    fn gap_spec(&self, seed: u64) -> GapSpec {
        GapSpec {
            missing_rate: self.missing_rate,
            gap_mean: self.gap_mean,
            gap_std: self.gap_std,
            rng_seed: seed,
        }
    }
}

/// Per-step losses and per-epoch validation RMSE.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub step_losses: Vec<f64>,
    pub val_rmse_cm: Vec<f64>,
    pub steps_per_epoch: usize,
}

impl TrainLog {
    /// Deterministic CSV: `step,loss` rows, shortest round-trip floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (i, loss) in self.step_losses.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, loss);
        }
        out
    }

    pub fn validation_csv(&self) -> String {
        let mut out = String::from("epoch,val_rmse_cm\n");
        for (i, v) in self.val_rmse_cm.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, v);
        }
        out
    }
}

struct WindowRef {
    seq: usize,
    start: usize,
}

fn collect_window_refs(
    sequences: &[PreparedSequence],
    cfg: &TrainConfig,
) -> Result<Vec<WindowRef>, ModelError> {
    let mut refs = Vec::new();
    for (si, s) in sequences.iter().enumerate() {
        let frames = s.normalized.rows();
        if frames < cfg.seq_len {
            continue; // sequence too short to yield a window
        }
        let starts = window_starts(frames, cfg.seq_len, cfg.stride)?;
        let take = if cfg.max_windows_per_sequence == 0 {
            starts.len()
        } else {
            starts.len().min(cfg.max_windows_per_sequence)
        };
        // Even subsample keeps coverage across the sequence.
        for k in 0..take {
            let idx = k * starts.len() / take;
            refs.push(WindowRef {
                seq: si,
                start: starts[idx],
            });
        }
    }
    if refs.is_empty() {
        return Err(ModelError::Config(format!(
            "no training windows: no sequence has {} frames",
            cfg.seq_len
        )));
    }
    Ok(refs)
}

fn shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Train either architecture on the prepared dataset.
///
/// Deterministic given the config seed: every random draw (init, shuffling,
/// masks, noise, dropout) comes from one seeded stream consumed in a fixed
/// order, and the numeric kernels are thread-count invariant.
pub fn train(
    data: &PreparedDataset,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainLog), ModelError> {
    cfg.validate()?;
    let dims = data.dims();
    let markers = data.marker_count();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let mut params = match cfg.architecture {
        Architecture::Window => ModelParams::Window(WindowModelParams::init(
            cfg.width,
            cfg.depth,
            cfg.seq_len,
            dims,
            &mut rng,
        )),
        Architecture::Lstm => {
            ModelParams::Lstm(LstmModelParams::init(cfg.width, cfg.depth, dims, &mut rng))
        }
    };

    let mut log = TrainLog {
        step_losses: Vec::new(),
        val_rmse_cm: Vec::new(),
        steps_per_epoch: 0,
    };
    if cfg.epochs == 0 {
        return Ok((params, log));
    }

    let mut refs = collect_window_refs(&data.train, cfg)?;
    let batch = cfg.batch_size.min(refs.len());
    let steps_per_epoch = refs.len() / batch;
    log.steps_per_epoch = steps_per_epoch;

    let block_sizes = match &params {
        ModelParams::Window(p) => p.block_sizes(),
        ModelParams::Lstm(p) => p.block_sizes(),
    };
    let mut adam = AdamState::new(&block_sizes);
    let sigma_norm = data.normalizer.sigma_normalized();
    let mut lr = cfg.learning_rate;
    let mut step_index = 0usize;

    for epoch in 0..cfg.epochs {
        shuffle(&mut refs, &mut rng);
        for step in 0..steps_per_epoch {
            step_index += 1;
            let refs_batch = &refs[step * batch..(step + 1) * batch];
            // Assemble clean and corrupted batches window by window so the
            // RNG consumption order is fixed.
            let width = cfg.seq_len * dims;
            let mut clean = Tensor2::zeros(batch, width);
            let mut corrupted = Tensor2::zeros(batch, width);
            for (r, wref) in refs_batch.iter().enumerate() {
                let window = data.train[wref.seq]
                    .normalized
                    .rows_slice(wref.start, cfg.seq_len);
                let mask_seed: u64 = rng.gen();
                let mask = sample_mask(cfg.seq_len, markers, &cfg.gap_spec(mask_seed))?;
                let noisy = corrupt(&window, &mask, cfg.noise_alpha, &sigma_norm, &mut rng)?;
                clean.row_mut(r).copy_from_slice(window.data());
                corrupted.row_mut(r).copy_from_slice(noisy.data());
            }

            let loss = match &mut params {
                ModelParams::Window(p) => {
                    let fwd = window_forward(p, &corrupted, cfg.keep_prob, &mut rng, true)
                        .map_err(|e| at_step(e, step_index))?;
                    let (loss, dy) =
                        mse_loss(&fwd.output, &clean).map_err(|e| at_step(e.into(), step_index))?;
                    let grads =
                        window_backward(p, &fwd, &dy).map_err(|e| at_step(e, step_index))?;
                    let grad_blocks: Vec<&[f64]> = grads
                        .iter()
                        .flat_map(|g| [g.dw.data(), g.db.as_slice()])
                        .collect();
                    adam_step(&mut adam, &mut p.param_blocks_mut(), &grad_blocks, lr)
                        .map_err(|e| at_step(e.into(), step_index))?;
                    loss
                }
                ModelParams::Lstm(p) => {
                    let inputs: Vec<Tensor2> = (0..cfg.seq_len)
                        .map(|t| corrupted.columns(t * dims, dims))
                        .collect();
                    let targets: Vec<Tensor2> = (0..cfg.seq_len)
                        .map(|t| clean.columns(t * dims, dims))
                        .collect();
                    let fwd = lstm_seq_forward(p, &inputs, cfg.keep_prob, &mut rng, true)
                        .map_err(|e| at_step(e, step_index))?;
                    // MSE over the full output: all steps, all elements.
                    let n: usize = fwd.outputs.iter().map(|o| o.len()).sum();
                    let mut loss = 0.0;
                    let mut d_outputs = Vec::with_capacity(cfg.seq_len);
                    for (o, t) in fwd.outputs.iter().zip(&targets) {
                        for (a, b) in o.data().iter().zip(t.data()) {
                            loss += (a - b) * (a - b);
                        }
                        d_outputs.push(o.zip_map(t, |a, b| 2.0 * (a - b) / n as f64));
                    }
                    loss /= n as f64;
                    if !loss.is_finite() {
                        return Err(ModelError::NonFinite { step: step_index });
                    }
                    let grads = lstm_seq_backward(p, &fwd, &d_outputs)
                        .map_err(|e| at_step(e, step_index))?;
                    adam_step(&mut adam, &mut p.param_blocks_mut(), &grads.blocks(), lr)
                        .map_err(|e| at_step(e.into(), step_index))?;
                    loss
                }
            };
            log.step_losses.push(loss);
        }
        // Validation with no injected noise, on whole sequences.
        if !data.validation.is_empty() {
            let val_seed = cfg.rng_seed ^ 0x76616c69 ^ (epoch as u64) << 32;
            let rmse = validation_rmse(&params, data, cfg, val_seed)?;
            log.val_rmse_cm.push(rmse);
        }
        lr *= cfg.lr_decay;
    }
    Ok((params, log))
}

fn at_step(e: ModelError, step: usize) -> ModelError {
    match e {
        ModelError::Nn(NnError::NonFinite { .. }) => ModelError::NonFinite { step },
        other => other,
    }
}

/// Mean missing-marker RMSE (cm) over the validation sequences, using masks
/// drawn at the configured missing rate and α = 0.
fn validation_rmse(
    params: &ModelParams,
    data: &PreparedDataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<f64, ModelError> {
    let markers = data.marker_count();
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, seq) in data.validation.iter().enumerate() {
        let frames = seq.normalized.rows();
        if frames < cfg.seq_len {
            continue;
        }
        let rate = if cfg.missing_rate > 0.0 { cfg.missing_rate } else { 0.2 };
        let mask = sample_mask(
            frames,
            markers,
            &GapSpec {
                missing_rate: rate,
                gap_mean: cfg.gap_mean,
                gap_std: cfg.gap_std,
                rng_seed: seed.wrapping_add(i as u64),
            },
        )?;
        let mut silent = ChaCha8Rng::seed_from_u64(0);
        let corrupted = corrupt(&seq.normalized, &mask, 0.0, &sigma_zeros(data.dims()), &mut silent)?;
        let recon = reconstruct_sequence(params, &corrupted, &mask)?;
        let rmse = rmse_missing(
            &seq.normalized,
            &recon,
            &mask,
            &data.normalizer,
            data.unit_scale_to_cm,
        )
        .map_err(|e| ModelError::Config(e.to_string()))?;
        total += rmse;
        count += 1;
    }
    if count == 0 {
        return Ok(f64::NAN);
    }
    Ok(total / count as f64)
}

fn sigma_zeros(dims: usize) -> Vec<f64> {
    vec![0.0; dims]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Normalizer;

    /// Tiny synthetic dataset: smooth sinusoid markers, known dims.
    fn tiny_dataset(markers: usize, frames: usize, n_train: usize) -> PreparedDataset {
        let dims = 3 * markers;
        let make = |id: usize, phase: f64| {
            let mut t = Tensor2::zeros(frames, dims);
            for f in 0..frames {
                for c in 0..dims {
                    let v = ((f as f64) * 0.17 + phase + c as f64 * 0.9).sin() * 0.8;
                    t.set(f, c, v);
                }
            }
            PreparedSequence {
                id: format!("seq{id}"),
                subject: "s1".into(),
                motion: "wave".into(),
                normalized: t.clone(),
                centered: t,
            }
        };
        PreparedDataset {
            normalizer: Normalizer {
                mean_pose: vec![0.0; dims],
                max_abs: 1.0,
                sigma: vec![0.5; dims],
            },
            marker_names: (0..markers).map(|i| format!("M{i}")).collect(),
            frame_rate: 120.0,
            unit_scale_to_cm: 1.0,
            train: (0..n_train).map(|i| make(i, i as f64)).collect(),
            validation: vec![make(90, 0.3)],
            test: vec![make(91, 0.7)],
        }
    }

    fn tiny_cfg(arch: Architecture) -> TrainConfig {
        TrainConfig {
            architecture: arch,
            width: 16,
            depth: 1,
            keep_prob: 1.0,
            learning_rate: 3e-3,
            lr_decay: 1.0,
            seq_len: 8,
            batch_size: 8,
            epochs: 1,
            noise_alpha: 0.3,
            // 8 frames × 3 markers = 24 cells; 0.25 is exactly realizable
            // within the sampler's ±1 pp tolerance.
            missing_rate: 0.25,
            gap_mean: 2.0,
            gap_std: 1.0,
            stride: 2,
            max_windows_per_sequence: 0,
            rng_seed: 17,
        }
    }

    #[test]
    fn paper_configs_validate() {
        for cfg in [
            TrainConfig::paper_lstm(),
            TrainConfig::paper_window(),
            TrainConfig::desk_lstm(),
            TrainConfig::desk_window(),
        ] {
            cfg.validate().unwrap();
        }
        // Table values stay pinned.
        let lstm = TrainConfig::paper_lstm();
        assert_eq!((lstm.width, lstm.depth, lstm.seq_len), (1024, 2, 64));
        assert_eq!(lstm.keep_prob, 0.9);
        assert_eq!(lstm.learning_rate, 2e-4);
        let win = TrainConfig::paper_window();
        assert_eq!((win.width, win.depth, win.seq_len), (512, 2, 20));
        assert_eq!(win.learning_rate, 1e-4);
        assert_eq!(win.batch_size, 32);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = tiny_dataset(3, 40, 2);
        let mut cfg = tiny_cfg(Architecture::Window);
        cfg.epochs = 0;
        let (params, log) = train(&data, &cfg).unwrap();
        assert!(log.step_losses.is_empty());
        assert!(log.val_rmse_cm.is_empty());
        // Identical to a fresh init with the same seed.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let fresh = WindowModelParams::init(cfg.width, cfg.depth, cfg.seq_len, 9, &mut rng);
        match params {
            ModelParams::Window(p) => assert_eq!(p, fresh),
            _ => panic!("wrong architecture"),
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let data = tiny_dataset(3, 60, 2);
        for arch in [Architecture::Window, Architecture::Lstm] {
            let mut cfg = tiny_cfg(arch);
            cfg.epochs = 2;
            let (pa, la) = train(&data, &cfg).unwrap();
            let (pb, lb) = train(&data, &cfg).unwrap();
            assert_eq!(la, lb, "{arch} logs differ");
            assert_eq!(pa, pb, "{arch} params differ");
            assert_eq!(la.to_csv(), lb.to_csv());

            let other = TrainConfig {
                rng_seed: cfg.rng_seed + 1,
                ..cfg
            };
            let (_, lc) = train(&data, &other).unwrap();
            assert_ne!(la.step_losses, lc.step_losses);
        }
    }

    #[test]
    fn loss_decreases_on_tiny_problem() {
        let data = tiny_dataset(3, 80, 3);
        for arch in [Architecture::Window, Architecture::Lstm] {
            let mut cfg = tiny_cfg(arch);
            cfg.epochs = 6;
            let (_, log) = train(&data, &cfg).unwrap();
            let k = log.step_losses.len() / 4;
            let early: f64 = log.step_losses[..k].iter().sum::<f64>() / k as f64;
            let late: f64 =
                log.step_losses[log.step_losses.len() - k..].iter().sum::<f64>() / k as f64;
            assert!(
                late < early,
                "{arch}: loss did not trend down ({early} → {late})"
            );
            assert_eq!(log.val_rmse_cm.len(), 6);
            assert!(log.val_rmse_cm.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn overfit_probe_single_window() {
        // One window, no dropout, no missing markers: the net must drive the
        // training loss under 1e-3 within 2000 steps.
        let data_frames = 6;
        let mut data = tiny_dataset(2, data_frames, 1);
        data.validation.clear();
        for arch in [Architecture::Window, Architecture::Lstm] {
            let cfg = TrainConfig {
                architecture: arch,
                width: 32,
                depth: 1,
                keep_prob: 1.0,
                learning_rate: 5e-3,
                lr_decay: 1.0,
                seq_len: data_frames, // exactly one window
                batch_size: 1,
                epochs: 2000,
                noise_alpha: 0.0,
                missing_rate: 0.0,
                gap_mean: 3.0,
                gap_std: 1.0,
                stride: 1,
                max_windows_per_sequence: 0,
                rng_seed: 5,
            };
            let (_, log) = train(&data, &cfg).unwrap();
            let last = *log.step_losses.last().unwrap();
            assert!(last < 1e-3, "{arch}: final loss {last}");
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = tiny_cfg(Architecture::Window);
        cfg.keep_prob = 0.0;
        assert!(matches!(cfg.validate(), Err(ModelError::Config(_))));
        let mut cfg = tiny_cfg(Architecture::Window);
        cfg.missing_rate = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_cfg(Architecture::Window);
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn log_csv_shape() {
        let log = TrainLog {
            step_losses: vec![0.5, 0.25],
            val_rmse_cm: vec![1.0],
            steps_per_epoch: 2,
        };
        assert_eq!(log.to_csv(), "step,loss\n1,0.5\n2,0.25\n");
        assert_eq!(log.validation_csv(), "epoch,val_rmse_cm\n1,1\n");
    }
}
