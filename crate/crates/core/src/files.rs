//! On-disk interchange formats: pose CSV, mask CSV, sidecar metadata.
//!
//! Pose CSV: header `name.x,name.y,name.z,…`, one row per frame, values in
//! dataset units. Floats are written in shortest round-trip form, so rewrites
//! are byte-stable. Mask CSV: no header, one row per frame, `n` 0/1 columns.
//! A sidecar JSON records unit scale and frame rate next to pose CSVs.

use crate::corruption::MaskSequence;
use crate::Tensor2;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilesError {
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sidecar metadata written next to pose CSVs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PoseMeta {
    pub unit_scale_to_cm: f64,
    pub frame_rate: f64,
    /// Coordinate space of the values, e.g. "hip_centered".
    pub space: String,
}

pub fn sidecar_path(csv_path: &std::path::Path) -> std::path::PathBuf {
    let mut os = csv_path.as_os_str().to_owned();
    os.push(".meta.json");
    std::path::PathBuf::from(os)
}

/// Render an F × 3n position matrix as CSV with a marker-name header.
pub fn pose_csv(marker_names: &[String], positions: &Tensor2) -> String {
    assert_eq!(positions.cols(), 3 * marker_names.len());
    let mut out = String::new();
    let header: Vec<String> = marker_names
        .iter()
        .flat_map(|n| [format!("{n}.x"), format!("{n}.y"), format!("{n}.z")])
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for f in 0..positions.rows() {
        let mut first = true;
        for v in positions.row(f) {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Parse a pose CSV back into marker names and positions.
pub fn parse_pose_csv(text: &str) -> Result<(Vec<String>, Tensor2), FilesError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| FilesError::Format("empty pose CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.is_empty() || cols.len() % 3 != 0 {
        return Err(FilesError::Format(format!(
            "pose CSV header has {} columns; expected a multiple of 3",
            cols.len()
        )));
    }
    let mut names = Vec::with_capacity(cols.len() / 3);
    for triple in cols.chunks(3) {
        let base = triple[0]
            .strip_suffix(".x")
            .ok_or_else(|| FilesError::Format(format!("bad header column `{}`", triple[0])))?;
        if triple[1] != format!("{base}.y") || triple[2] != format!("{base}.z") {
            return Err(FilesError::Format(format!(
                "header columns for `{base}` are not an x,y,z triplet"
            )));
        }
        names.push(base.to_string());
    }
    let dims = cols.len();
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut count = 0usize;
        for item in line.split(',') {
            let v: f64 = item
                .parse()
                .map_err(|_| FilesError::Format(format!("bad value `{item}` on row {}", i + 2)))?;
            data.push(v);
            count += 1;
        }
        if count != dims {
            return Err(FilesError::Format(format!(
                "row {} has {count} values; expected {dims}",
                i + 2
            )));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(FilesError::Format("pose CSV has no data rows".into()));
    }
    Ok((names, Tensor2::from_vec(rows, dims, data)))
}

/// Render a mask as headerless 0/1 CSV (1 = present).
pub fn mask_csv(mask: &MaskSequence) -> String {
    let mut out = String::new();
    for f in 0..mask.frames() {
        let mut first = true;
        for m in 0..mask.markers() {
            if !first {
                out.push(',');
            }
            out.push(if mask.is_present(f, m) { '1' } else { '0' });
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Parse a headerless 0/1 mask CSV.
pub fn parse_mask_csv(text: &str) -> Result<MaskSequence, FilesError> {
    let mut rows: Vec<Vec<bool>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for item in line.split(',') {
            match item.trim() {
                "1" => row.push(true),
                "0" => row.push(false),
                other => {
                    return Err(FilesError::Format(format!(
                        "bad mask value `{other}` on row {}",
                        i + 1
                    )))
                }
            }
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(FilesError::Format(format!(
                    "mask row {} has {} columns; expected {}",
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let frames = rows.len();
    let markers = rows.first().map(|r| r.len()).unwrap_or(0);
    if frames == 0 || markers == 0 {
        return Err(FilesError::Format("mask CSV is empty".into()));
    }
    let mut mask = MaskSequence::all_present(frames, markers);
    for (f, row) in rows.iter().enumerate() {
        for (m, &p) in row.iter().enumerate() {
            mask.set_present(f, m, p);
        }
    }
    Ok(mask)
}
