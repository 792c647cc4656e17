//! Dataset preprocessing: hip-centering, [-1, 1] normalization, sliding-window
//! extraction, and catalog/split handling.
//!
//! The preprocessing chain mirrors how training data is prepared: forward
//! kinematics output is translated into the hips-centered coordinate system,
//! then normalized by subtracting the training mean pose and dividing by the
//! maximal absolute deviation. Statistics are fit on the train split only and
//! reused for validation and test.

use crate::bvh::{self, BvhError, PoseSequence};
use crate::{parallel, Tensor2};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("hip marker `{0}` not found in sequence")]
    MissingHipMarker(String),
    #[error("degenerate data: normalization scale is zero")]
    DegenerateData,
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sequence too short: {frames} frames, window needs {window}")]
    SequenceTooShort { frames: usize, window: usize },
    #[error("unknown sequence id `{0}`")]
    UnknownSequenceId(String),
    #[error("catalog/split error: {0}")]
    Config(String),
    #[error(transparent)]
    Bvh(#[from] BvhError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Statistics mapping hip-centered poses into [-1, 1] and back.
///
/// `mean_pose` and `sigma` are per-coordinate over all training frames
/// (population std); `max_abs` is the single largest |value − mean| across
/// all coordinates and frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean_pose: Vec<f64>,
    pub max_abs: f64,
    pub sigma: Vec<f64>,
}

impl Normalizer {
    pub fn dims(&self) -> usize {
        self.mean_pose.len()
    }

    /// Per-coordinate training std expressed in normalized units.
    pub fn sigma_normalized(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| s / self.max_abs).collect()
    }
}

/// Translate every frame so the hip marker sits at the origin.
pub fn hip_center(poses: &PoseSequence, hip_marker: &str) -> Result<PoseSequence, PipelineError> {
    let hip = poses
        .marker_names
        .iter()
        .position(|n| n == hip_marker)
        .ok_or_else(|| PipelineError::MissingHipMarker(hip_marker.to_string()))?;
    let dims = poses.dims();
    let mut out = poses.positions.clone();
    parallel::for_each_chunk_mut(out.data_mut(), dims, poses.frame_count() * dims, |_, row| {
        let hx = row[3 * hip];
        let hy = row[3 * hip + 1];
        let hz = row[3 * hip + 2];
        for m in row.chunks_mut(3) {
            m[0] -= hx;
            m[1] -= hy;
            m[2] -= hz;
        }
    });
    Ok(PoseSequence {
        marker_names: poses.marker_names.clone(),
        frame_rate: poses.frame_rate,
        unit_scale_to_cm: poses.unit_scale_to_cm,
        positions: out,
    })
}

/// Fit normalization statistics over every frame of the training sequences.
pub fn fit_normalizer(training: &[&PoseSequence]) -> Result<Normalizer, PipelineError> {
    let dims = training
        .first()
        .map(|p| p.dims())
        .ok_or(PipelineError::DegenerateData)?;
    let mut total_frames = 0usize;
    for p in training {
        if p.dims() != dims {
            return Err(PipelineError::DimensionMismatch {
                expected: dims,
                got: p.dims(),
            });
        }
        total_frames += p.frame_count();
    }
    if total_frames == 0 {
        return Err(PipelineError::DegenerateData);
    }

    let mut mean = vec![0.0f64; dims];
    for p in training {
        for f in 0..p.frame_count() {
            for (m, v) in mean.iter_mut().zip(p.positions.row(f)) {
                *m += v;
            }
        }
    }
    for m in &mut mean {
        *m /= total_frames as f64;
    }

    let mut max_abs = 0.0f64;
    let mut var = vec![0.0f64; dims];
    for p in training {
        for f in 0..p.frame_count() {
            for (i, v) in p.positions.row(f).iter().enumerate() {
                let d = v - mean[i];
                max_abs = max_abs.max(d.abs());
                var[i] += d * d;
            }
        }
    }
    for v in &mut var {
        *v = (*v / total_frames as f64).sqrt();
    }
    if max_abs == 0.0 {
        return Err(PipelineError::DegenerateData);
    }
    Ok(Normalizer {
        mean_pose: mean,
        max_abs,
        sigma: var,
    })
}

/// (x − mean) / max_abs, rowwise.
pub fn normalize(positions: &Tensor2, norm: &Normalizer) -> Result<Tensor2, PipelineError> {
    if positions.cols() != norm.dims() {
        return Err(PipelineError::DimensionMismatch {
            expected: norm.dims(),
            got: positions.cols(),
        });
    }
    let mut out = positions.clone();
    let dims = norm.dims();
    for row in out.data_mut().chunks_mut(dims) {
        for (v, m) in row.iter_mut().zip(&norm.mean_pose) {
            *v = (*v - m) / norm.max_abs;
        }
    }
    Ok(out)
}

/// Inverse of [`normalize`].
pub fn denormalize(normalized: &Tensor2, norm: &Normalizer) -> Result<Tensor2, PipelineError> {
    if normalized.cols() != norm.dims() {
        return Err(PipelineError::DimensionMismatch {
            expected: norm.dims(),
            got: normalized.cols(),
        });
    }
    let mut out = normalized.clone();
    let dims = norm.dims();
    for row in out.data_mut().chunks_mut(dims) {
        for (v, m) in row.iter_mut().zip(&norm.mean_pose) {
            *v = *v * norm.max_abs + m;
        }
    }
    Ok(out)
}

/// Window start offsets {0, stride, 2·stride, …} while a full window fits.
pub fn window_starts(
    frames: usize,
    length: usize,
    stride: usize,
) -> Result<Vec<usize>, PipelineError> {
    assert!(length > 0 && stride > 0, "window length and stride must be positive");
    if frames < length {
        return Err(PipelineError::SequenceTooShort {
            frames,
            window: length,
        });
    }
    Ok((0..=frames - length).step_by(stride).collect())
}

/// Iterate length×dims windows of a sequence.
pub fn sliding_windows(
    positions: &Tensor2,
    length: usize,
    stride: usize,
) -> Result<impl Iterator<Item = Tensor2> + '_, PipelineError> {
    let starts = window_starts(positions.rows(), length, stride)?;
    Ok(starts
        .into_iter()
        .map(move |s| positions.rows_slice(s, length)))
}

/// Gather flattened windows (one row each) from per-sequence matrices.
/// `refs` holds (sequence index, start frame) pairs.
pub fn gather_windows(
    sequences: &[&Tensor2],
    refs: &[(usize, usize)],
    length: usize,
) -> Tensor2 {
    let dims = sequences.first().map_or(0, |s| s.cols());
    let width = length * dims;
    let mut out = Tensor2::zeros(refs.len(), width);
    let work = refs.len() * width;
    parallel::for_each_chunk_mut(out.data_mut(), width.max(1), work, |i, row| {
        let (seq, start) = refs[i];
        let src = sequences[seq];
        for t in 0..length {
            row[t * dims..(t + 1) * dims].copy_from_slice(src.row(start + t));
        }
    });
    out
}

// ---------------------------------------------------------------------------
// Catalog and splits
// ---------------------------------------------------------------------------

/// One recorded sequence in the dataset catalog.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub id: String,
    pub path: PathBuf,
    pub subject: String,
    pub motion: String,
}

/// Dataset catalog: sequence id → BVH path plus subject/motion tags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    #[serde(default = "default_unit_scale")]
    pub unit_scale_to_cm: f64,
    /// Marker treated as the hips; defaults to the root joint when absent.
    #[serde(default)]
    pub hip_marker: Option<String>,
    pub sequences: Vec<CatalogEntry>,
}

fn default_unit_scale() -> f64 {
    1.0
}

impl Catalog {
    pub fn from_toml(text: &str) -> Result<Catalog, PipelineError> {
        let cat: Catalog =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut seen = HashSet::new();
        for s in &cat.sequences {
            if !seen.insert(s.id.as_str()) {
                return Err(PipelineError::Config(format!(
                    "duplicate sequence id `{}` in catalog",
                    s.id
                )));
            }
        }
        Ok(cat)
    }

    pub fn load(path: &Path) -> Result<Catalog, PipelineError> {
        Catalog::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Assignment of sequence ids to the three datasets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl SplitSpec {
    pub fn from_toml(text: &str) -> Result<SplitSpec, PipelineError> {
        let spec: SplitSpec =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        spec.check_disjoint()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<SplitSpec, PipelineError> {
        SplitSpec::from_toml(&std::fs::read_to_string(path)?)
    }

    fn check_disjoint(&self) -> Result<(), PipelineError> {
        let mut seen = HashSet::new();
        for id in self.train.iter().chain(&self.validation).chain(&self.test) {
            if !seen.insert(id.as_str()) {
                return Err(PipelineError::Config(format!(
                    "sequence id `{id}` appears in more than one split"
                )));
            }
        }
        Ok(())
    }
}

/// Training-set restriction used by the generalization experiments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitFilter {
    None,
    /// Drop every training sequence recorded from this subject.
    WithoutSubject(String),
    /// Drop every training sequence with this motion tag.
    WithoutMotion(String),
}

impl SplitFilter {
    fn keeps(&self, entry: &SequenceData) -> bool {
        match self {
            SplitFilter::None => true,
            SplitFilter::WithoutSubject(s) => &entry.subject != s,
            SplitFilter::WithoutMotion(m) => &entry.motion != m,
        }
    }
}

/// A loaded, hip-centered sequence with its catalog tags.
#[derive(Debug, Clone)]
pub struct SequenceData {
    pub id: String,
    pub subject: String,
    pub motion: String,
    pub poses: PoseSequence,
}

/// Parse BVH files, run forward kinematics and hip-center every sequence.
/// Relative catalog paths are resolved against `base_dir`.
pub fn load_sequences(
    catalog: &Catalog,
    base_dir: &Path,
) -> Result<Vec<SequenceData>, PipelineError> {
    let mut out = Vec::with_capacity(catalog.sequences.len());
    for entry in &catalog.sequences {
        let path = if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            base_dir.join(&entry.path)
        };
        let text = std::fs::read_to_string(&path)?;
        let (skeleton, frames) = bvh::parse_bvh(&text)?;
        let poses = bvh::forward_kinematics(&skeleton, &frames, catalog.unit_scale_to_cm);
        let hip = catalog
            .hip_marker
            .clone()
            .unwrap_or_else(|| skeleton.joints()[0].name.clone());
        let centered = hip_center(&poses, &hip)?;
        out.push(SequenceData {
            id: entry.id.clone(),
            subject: entry.subject.clone(),
            motion: entry.motion.clone(),
            poses: centered,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DatasetSplits {
    pub train: Vec<SequenceData>,
    pub validation: Vec<SequenceData>,
    pub test: Vec<SequenceData>,
}

/// Partition loaded sequences per the split spec, applying `filter` to the
/// training list.
pub fn make_splits(
    all: &[SequenceData],
    spec: &SplitSpec,
    filter: &SplitFilter,
) -> Result<DatasetSplits, PipelineError> {
    spec.check_disjoint()?;
    let find = |id: &String| -> Result<SequenceData, PipelineError> {
        all.iter()
            .find(|s| &s.id == id)
            .cloned()
            .ok_or_else(|| PipelineError::UnknownSequenceId(id.clone()))
    };
    let train = spec
        .train
        .iter()
        .map(find)
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|s| filter.keeps(s))
        .collect();
    let validation = spec.validation.iter().map(find).collect::<Result<_, _>>()?;
    let test = spec.test.iter().map(find).collect::<Result<_, _>>()?;
    Ok(DatasetSplits {
        train,
        validation,
        test,
    })
}

/// One split sequence after normalization.
#[derive(Debug, Clone)]
pub struct PreparedSequence {
    pub id: String,
    pub subject: String,
    pub motion: String,
    /// Frames × 3n, normalized to the training statistics.
    pub normalized: Tensor2,
    /// Frames × 3n, hip-centered dataset units (ground truth for metrics).
    pub centered: Tensor2,
}

/// Normalized dataset ready for training and evaluation.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub normalizer: Normalizer,
    pub marker_names: Vec<String>,
    pub frame_rate: f64,
    pub unit_scale_to_cm: f64,
    pub train: Vec<PreparedSequence>,
    pub validation: Vec<PreparedSequence>,
    pub test: Vec<PreparedSequence>,
}

impl PreparedDataset {
    pub fn marker_count(&self) -> usize {
        self.marker_names.len()
    }

    pub fn dims(&self) -> usize {
        self.marker_names.len() * 3
    }
}

/// Fit the normalizer on the train split and normalize all three splits.
pub fn prepare(splits: &DatasetSplits) -> Result<PreparedDataset, PipelineError> {
    let train_refs: Vec<&PoseSequence> = splits.train.iter().map(|s| &s.poses).collect();
    let normalizer = fit_normalizer(&train_refs)?;
    let template = splits.train.first().ok_or(PipelineError::DegenerateData)?;
    let prep = |seqs: &[SequenceData]| -> Result<Vec<PreparedSequence>, PipelineError> {
        seqs.iter()
            .map(|s| {
                Ok(PreparedSequence {
                    id: s.id.clone(),
                    subject: s.subject.clone(),
                    motion: s.motion.clone(),
                    normalized: normalize(&s.poses.positions, &normalizer)?,
                    centered: s.poses.positions.clone(),
                })
            })
            .collect()
    };
    let train = prep(&splits.train)?;
    let validation = prep(&splits.validation)?;
    let test = prep(&splits.test)?;
    Ok(PreparedDataset {
        normalizer,
        marker_names: template.poses.marker_names.clone(),
        frame_rate: template.poses.frame_rate,
        unit_scale_to_cm: template.poses.unit_scale_to_cm,
        train,
        validation,
        test,
    })
}
