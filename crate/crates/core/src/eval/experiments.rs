//! Experiment drivers: rate tables, gap-duration sweep, very-long-gap runs
//! and generalization splits.
//!
//! Within a grid, masks are derived from (seed, sequence, setting, repeat)
//! only, never from the method, so every method sees identical corruption.
//! Cells are independent and run in parallel; seeds are order-independent,
//! so parallel and serial execution produce the same report.

use super::{
    derive_seed, mean_std, reconstruct_with, rmse_missing, rmse_missing_frame, EvalCell,
    EvalContext, EvalError, EvalReport, Method,
};
use crate::corruption::{corrupt, long_gap_mask, sample_mask, GapSpec, MaskSequence};
use crate::model::{train, ModelParams, TrainConfig};
use crate::parallel;
use crate::pipeline::{
    make_splits, prepare, PreparedSequence, SequenceData, SplitFilter, SplitSpec,
};
use crate::Tensor2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

fn silent_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

/// Nullify a normalized sequence under a mask (test-time corruption, α = 0).
fn nullify(sequence: &Tensor2, mask: &MaskSequence) -> Result<Tensor2, EvalError> {
    let zeros = vec![0.0; sequence.cols()];
    Ok(corrupt(sequence, mask, 0.0, &zeros, &mut silent_rng())?)
}

/// `count` distinct marker indices drawn without replacement.
fn sample_markers(markers: usize, count: usize, seed: u64) -> Vec<usize> {
    assert!(count <= markers);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..markers).collect();
    for i in 0..count {
        let j = rng.gen_range(i..markers);
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool
}

// ---------------------------------------------------------------------------
// Rate table
// ---------------------------------------------------------------------------

/// Random-gap benchmark settings: per rate, fresh masks per repeat with
/// Gaussian gap durations.
#[derive(Debug, Clone)]
pub struct RateTableSpec {
    pub rates: Vec<f64>,
    pub repeats: usize,
    pub gap_mean: f64,
    pub gap_std: f64,
    pub seed: u64,
}

impl Default for RateTableSpec {
    fn default() -> Self {
        RateTableSpec {
            rates: vec![0.1, 0.2, 0.3],
            repeats: 3,
            gap_mean: 10.0,
            gap_std: 5.0,
            seed: 1,
        }
    }
}

/// Evaluate every method on every (sequence, rate) with repeated fresh masks.
pub fn run_rate_table(
    ctx: &EvalContext,
    methods: &[Method],
    sequences: &[&PreparedSequence],
    spec: &RateTableSpec,
) -> Result<EvalReport, EvalError> {
    if spec.rates.iter().any(|&r| r <= 0.0) {
        return Err(EvalError::NoMissingMarkers);
    }
    if spec.repeats == 0 || sequences.is_empty() || methods.is_empty() {
        return Err(EvalError::Config(
            "rate table needs methods, sequences and repeats ≥ 1".into(),
        ));
    }
    let mut grid = Vec::new();
    for (si, _) in sequences.iter().enumerate() {
        for (ri, _) in spec.rates.iter().enumerate() {
            for rep in 0..spec.repeats {
                grid.push((si, ri, rep));
            }
        }
    }
    let results: Vec<Result<(u64, Vec<f64>), EvalError>> =
        parallel::map_indices(grid.len(), usize::MAX, |g| {
            let (si, ri, rep) = grid[g];
            let seq = sequences[si];
            let rate = spec.rates[ri];
            let frames = seq.normalized.rows();
            let mask_seed = derive_seed(
                spec.seed,
                &format!("rate_table/{}/{rate}", seq.id),
                rep as u64,
            );
            let mask = sample_mask(
                frames,
                ctx.markers,
                &GapSpec {
                    missing_rate: rate,
                    gap_mean: spec.gap_mean,
                    gap_std: spec.gap_std,
                    rng_seed: mask_seed,
                },
            )?;
            let corrupted = nullify(&seq.normalized, &mask)?;
            let mut runs = Vec::with_capacity(methods.len());
            for m in methods {
                let recon = reconstruct_with(m, &corrupted, &mask)?;
                runs.push(rmse_missing(
                    &seq.normalized,
                    &recon,
                    &mask,
                    ctx.normalizer,
                    ctx.unit_scale_to_cm,
                )?);
            }
            Ok((mask_seed, runs))
        });

    let mut cells = Vec::new();
    for (mi, method) in methods.iter().enumerate() {
        for (si, seq) in sequences.iter().enumerate() {
            for (ri, rate) in spec.rates.iter().enumerate() {
                let mut runs = Vec::with_capacity(spec.repeats);
                let mut seeds = Vec::with_capacity(spec.repeats);
                for (g, r) in grid.iter().zip(&results) {
                    if g.0 == si && g.1 == ri {
                        let (seed, per_method) = r.as_ref().map_err(clone_err)?;
                        runs.push(per_method[mi]);
                        seeds.push(*seed);
                    }
                }
                let (mean, std) = mean_std(&runs);
                cells.push(EvalCell {
                    method: method.name(),
                    sequence: seq.id.clone(),
                    setting: format!("rate={rate:.2}"),
                    repeats: runs.len(),
                    mean_cm: mean,
                    std_cm: std,
                    runs_cm: runs,
                    seeds,
                });
            }
        }
    }
    Ok(EvalReport {
        experiment: "rate_table".into(),
        cells,
    })
}

// Results come out of the parallel map by reference; errors are re-raised
// with their message (the original is not Clone).
fn clone_err(e: &EvalError) -> EvalError {
    EvalError::Config(e.to_string())
}

// ---------------------------------------------------------------------------
// Gap-duration sweep
// ---------------------------------------------------------------------------

/// Sweep over gap durations with a fixed number of missing markers.
#[derive(Debug, Clone)]
pub struct GapSweepSpec {
    pub gap_lengths: Vec<usize>,
    pub missing_markers: usize,
    pub repeats: usize,
    /// Frames before the gap starts (all markers present).
    pub lead_in: usize,
    pub seed: u64,
}

impl Default for GapSweepSpec {
    fn default() -> Self {
        GapSweepSpec {
            gap_lengths: vec![12, 60, 120, 240, 480],
            missing_markers: 5,
            repeats: 3,
            lead_in: 120,
            seed: 1,
        }
    }
}

pub fn run_gap_sweep(
    ctx: &EvalContext,
    methods: &[Method],
    sequence: &PreparedSequence,
    spec: &GapSweepSpec,
) -> Result<EvalReport, EvalError> {
    let frames = sequence.normalized.rows();
    let longest = spec.gap_lengths.iter().copied().max().unwrap_or(0);
    if longest == 0 || spec.repeats == 0 {
        return Err(EvalError::Config("gap sweep needs gap lengths and repeats".into()));
    }
    if spec.lead_in + longest > frames {
        return Err(EvalError::Config(format!(
            "sequence `{}` has {frames} frames; lead_in {} + max gap {longest} does not fit",
            sequence.id, spec.lead_in
        )));
    }
    let mut grid = Vec::new();
    for (gi, _) in spec.gap_lengths.iter().enumerate() {
        for rep in 0..spec.repeats {
            grid.push((gi, rep));
        }
    }
    let results: Vec<Result<(u64, Vec<f64>), EvalError>> =
        parallel::map_indices(grid.len(), usize::MAX, |g| {
            let (gi, rep) = grid[g];
            let gap = spec.gap_lengths[gi];
            // Marker choice is fixed per repeat across gap lengths, isolating
            // the duration effect.
            let marker_seed = derive_seed(
                spec.seed,
                &format!("gap_sweep/{}", sequence.id),
                rep as u64,
            );
            let markers = sample_markers(ctx.markers, spec.missing_markers, marker_seed);
            let mask = long_gap_mask(frames, ctx.markers, &markers, spec.lead_in, gap)?;
            let corrupted = nullify(&sequence.normalized, &mask)?;
            let mut runs = Vec::with_capacity(methods.len());
            for m in methods {
                let recon = reconstruct_with(m, &corrupted, &mask)?;
                runs.push(rmse_missing(
                    &sequence.normalized,
                    &recon,
                    &mask,
                    ctx.normalizer,
                    ctx.unit_scale_to_cm,
                )?);
            }
            Ok((marker_seed, runs))
        });

    let mut cells = Vec::new();
    for (mi, method) in methods.iter().enumerate() {
        for (gi, gap) in spec.gap_lengths.iter().enumerate() {
            let mut runs = Vec::new();
            let mut seeds = Vec::new();
            for (g, r) in grid.iter().zip(&results) {
                if g.0 == gi {
                    let (seed, per_method) = r.as_ref().map_err(clone_err)?;
                    runs.push(per_method[mi]);
                    seeds.push(*seed);
                }
            }
            let (mean, std) = mean_std(&runs);
            cells.push(EvalCell {
                method: method.name(),
                sequence: sequence.id.clone(),
                setting: format!("gap={gap}"),
                repeats: runs.len(),
                mean_cm: mean,
                std_cm: std,
                runs_cm: runs,
                seeds,
            });
        }
    }
    Ok(EvalReport {
        experiment: "gap_sweep".into(),
        cells,
    })
}

// ---------------------------------------------------------------------------
// Very long gaps
// ---------------------------------------------------------------------------

/// The very-long-gap protocol: measurement starts `start_s` into the clip,
/// all markers present for `present_s`, then the chosen markers are missing
/// for `gap_s` seconds, then present again.
#[derive(Debug, Clone)]
pub struct LongGapSpec {
    pub marker_counts: Vec<usize>,
    pub repeats: usize,
    pub start_s: f64,
    pub present_s: f64,
    pub gap_s: f64,
    pub seed: u64,
}

impl Default for LongGapSpec {
    fn default() -> Self {
        LongGapSpec {
            marker_counts: vec![3, 30],
            repeats: 5,
            start_s: 1.5,
            present_s: 1.0,
            gap_s: 5.0,
            seed: 1,
        }
    }
}

/// Per-frame mean error across the gap for one method and marker count.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ErrorCurve {
    pub method: String,
    pub marker_count: usize,
    /// Frame offsets relative to the gap start.
    pub frame_offsets: Vec<usize>,
    pub mean_err_cm: Vec<f64>,
}

/// CSV export of per-frame error curves: method,markers,frame,err_cm.
pub fn curves_to_csv(curves: &[ErrorCurve]) -> String {
    let mut out = String::from("method,markers,frame,err_cm\n");
    for c in curves {
        for (f, e) in c.frame_offsets.iter().zip(&c.mean_err_cm) {
            let _ = writeln!(out, "{},{},{},{}", c.method, c.marker_count, f, e);
        }
    }
    out
}

pub fn run_long_gap(
    ctx: &EvalContext,
    methods: &[Method],
    sequence: &PreparedSequence,
    spec: &LongGapSpec,
) -> Result<(EvalReport, Vec<ErrorCurve>), EvalError> {
    let frames = sequence.normalized.rows();
    let gap_start = ((spec.start_s + spec.present_s) * ctx.frame_rate).round() as usize;
    let gap_len = (spec.gap_s * ctx.frame_rate).round() as usize;
    if gap_start + gap_len > frames {
        return Err(EvalError::Config(format!(
            "sequence `{}` has {frames} frames; long-gap protocol needs {}",
            sequence.id,
            gap_start + gap_len
        )));
    }
    let mut grid = Vec::new();
    for (ci, _) in spec.marker_counts.iter().enumerate() {
        for rep in 0..spec.repeats {
            grid.push((ci, rep));
        }
    }
    type LongGapRun = (u64, Vec<f64>, Vec<Vec<f64>>);
    let results: Vec<Result<LongGapRun, EvalError>> =
        parallel::map_indices(grid.len(), usize::MAX, |g| {
            let (ci, rep) = grid[g];
            let count = spec.marker_counts[ci];
            if count > ctx.markers {
                return Err(EvalError::Config(format!(
                    "cannot remove {count} of {} markers",
                    ctx.markers
                )));
            }
            let marker_seed = derive_seed(
                spec.seed,
                &format!("long_gap/{}/{count}", sequence.id),
                rep as u64,
            );
            let markers = sample_markers(ctx.markers, count, marker_seed);
            let mask = long_gap_mask(frames, ctx.markers, &markers, gap_start, gap_len)?;
            let corrupted = nullify(&sequence.normalized, &mask)?;
            let mut overall = Vec::with_capacity(methods.len());
            let mut curves = Vec::with_capacity(methods.len());
            for m in methods {
                let recon = reconstruct_with(m, &corrupted, &mask)?;
                overall.push(rmse_missing(
                    &sequence.normalized,
                    &recon,
                    &mask,
                    ctx.normalizer,
                    ctx.unit_scale_to_cm,
                )?);
                let curve: Vec<f64> = (gap_start..gap_start + gap_len)
                    .map(|f| {
                        rmse_missing_frame(
                            &sequence.normalized,
                            &recon,
                            &mask,
                            f,
                            ctx.normalizer,
                            ctx.unit_scale_to_cm,
                        )
                        .unwrap_or(0.0)
                    })
                    .collect();
                curves.push(curve);
            }
            Ok((marker_seed, overall, curves))
        });

    let mut cells = Vec::new();
    let mut out_curves = Vec::new();
    for (mi, method) in methods.iter().enumerate() {
        for (ci, count) in spec.marker_counts.iter().enumerate() {
            let mut runs = Vec::new();
            let mut seeds = Vec::new();
            let mut curve_acc = vec![0.0f64; gap_len];
            let mut reps = 0usize;
            for (g, r) in grid.iter().zip(&results) {
                if g.0 == ci {
                    let (seed, overall, curves) = r.as_ref().map_err(clone_err)?;
                    runs.push(overall[mi]);
                    seeds.push(*seed);
                    for (acc, v) in curve_acc.iter_mut().zip(&curves[mi]) {
                        *acc += v;
                    }
                    reps += 1;
                }
            }
            for v in &mut curve_acc {
                *v /= reps as f64;
            }
            let (mean, std) = mean_std(&runs);
            cells.push(EvalCell {
                method: method.name(),
                sequence: sequence.id.clone(),
                setting: format!("markers={count}"),
                repeats: runs.len(),
                mean_cm: mean,
                std_cm: std,
                runs_cm: runs,
                seeds,
            });
            out_curves.push(ErrorCurve {
                method: method.name(),
                marker_count: *count,
                frame_offsets: (0..gap_len).collect(),
                mean_err_cm: curve_acc,
            });
        }
    }
    Ok((
        EvalReport {
            experiment: "long_gap".into(),
            cells,
        },
        out_curves,
    ))
}

// ---------------------------------------------------------------------------
// Generalization splits
// ---------------------------------------------------------------------------

/// Generalization protocol: retrain per dataset variant, evaluate at a fixed
/// missing rate with fixed-length gaps.
#[derive(Debug, Clone)]
pub struct GeneralizationSpec {
    pub rate: f64,
    pub gap_frames: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for GeneralizationSpec {
    fn default() -> Self {
        GeneralizationSpec {
            rate: 0.2,
            gap_frames: 100,
            repeats: 3,
            seed: 1,
        }
    }
}

/// The three dataset variants, per evaluated sequence: complete training
/// set, without the sequence's subject, without its motion type.
pub fn run_generalization(
    all: &[SequenceData],
    split: &SplitSpec,
    train_cfg: &TrainConfig,
    eval_ids: &[String],
    spec: &GeneralizationSpec,
) -> Result<EvalReport, EvalError> {
    if eval_ids.is_empty() || spec.repeats == 0 {
        return Err(EvalError::Config(
            "generalization needs eval sequences and repeats ≥ 1".into(),
        ));
    }
    if !(0.0 < spec.rate && spec.rate < 1.0) {
        return Err(EvalError::Config(format!("rate {} outside (0, 1)", spec.rate)));
    }
    for id in eval_ids {
        if !split.test.contains(id) {
            return Err(EvalError::Config(format!(
                "generalization eval sequence `{id}` is not in the test split"
            )));
        }
    }

    let mut cells = Vec::new();

    // Complete variant: one training serves every eval sequence.
    {
        let splits = make_splits(all, split, &SplitFilter::None)?;
        let prepared = prepare(&splits)?;
        let (params, _) = train(&prepared, train_cfg)?;
        for id in eval_ids {
            cells.push(eval_variant_cell(
                &prepared, &params, id, "complete", spec,
            )?);
        }
    }

    // Per-sequence subject/motion removal.
    for id in eval_ids {
        let entry = all
            .iter()
            .find(|s| &s.id == id)
            .ok_or_else(|| EvalError::Config(format!("unknown sequence `{id}`")))?;
        for (variant, filter) in [
            (
                "without_subject",
                SplitFilter::WithoutSubject(entry.subject.clone()),
            ),
            (
                "without_motion",
                SplitFilter::WithoutMotion(entry.motion.clone()),
            ),
        ] {
            let splits = make_splits(all, split, &filter)?;
            if splits.train.is_empty() {
                return Err(EvalError::Config(format!(
                    "variant {variant} for `{id}` removes the whole training set"
                )));
            }
            let prepared = prepare(&splits)?;
            let (params, _) = train(&prepared, train_cfg)?;
            cells.push(eval_variant_cell(&prepared, &params, id, variant, spec)?);
        }
    }

    Ok(EvalReport {
        experiment: "generalization".into(),
        cells,
    })
}

fn eval_variant_cell(
    prepared: &crate::pipeline::PreparedDataset,
    params: &ModelParams,
    id: &str,
    variant: &str,
    spec: &GeneralizationSpec,
) -> Result<EvalCell, EvalError> {
    let ctx = EvalContext::of(prepared);
    let seq = prepared
        .test
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| EvalError::Config(format!("sequence `{id}` missing from test split")))?;
    let frames = seq.normalized.rows();
    let mut runs = Vec::with_capacity(spec.repeats);
    let mut seeds = Vec::with_capacity(spec.repeats);
    for rep in 0..spec.repeats {
        // Mask seeds do not depend on the variant: every variant is scored
        // against the same corruption.
        let mask_seed = derive_seed(spec.seed, &format!("generalization/{id}"), rep as u64);
        let mask = sample_mask(
            frames,
            ctx.markers,
            &GapSpec {
                missing_rate: spec.rate,
                gap_mean: spec.gap_frames as f64,
                gap_std: 0.0,
                rng_seed: mask_seed,
            },
        )?;
        let corrupted = nullify(&seq.normalized, &mask)?;
        let recon = reconstruct_with(&Method::Model(params), &corrupted, &mask)?;
        runs.push(rmse_missing(
            &seq.normalized,
            &recon,
            &mask,
            ctx.normalizer,
            ctx.unit_scale_to_cm,
        )?);
        seeds.push(mask_seed);
    }
    let (mean, std) = mean_std(&runs);
    Ok(EvalCell {
        method: params.architecture().name().into(),
        sequence: id.to_string(),
        setting: format!("variant={variant}"),
        repeats: runs.len(),
        mean_cm: mean,
        std_cm: std,
        runs_cm: runs,
        seeds,
    })
}
