//! Reference reconstructors: per-coordinate linear interpolation across gaps
//! and a mean-pose filler.
//!
//! Both operate on an F × 3n matrix plus its mask and are passthrough at
//! observed cells. They are affine-equivariant, so they can run in normalized
//! or dataset space; `fill` supplies the value for markers that are never
//! observed (the zero vector in normalized space, the normalizer's mean pose
//! in dataset space).

use crate::corruption::MaskSequence;
use crate::Tensor2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

fn check_dims(
    corrupted: &Tensor2,
    mask: &MaskSequence,
    fill: &[f64],
) -> Result<(), BaselineError> {
    if corrupted.rows() != mask.frames() {
        return Err(BaselineError::DimensionMismatch {
            expected: mask.frames(),
            got: corrupted.rows(),
        });
    }
    if corrupted.cols() != 3 * mask.markers() || fill.len() != corrupted.cols() {
        return Err(BaselineError::DimensionMismatch {
            expected: 3 * mask.markers(),
            got: corrupted.cols(),
        });
    }
    Ok(())
}

/// Linear interpolation per marker coordinate across each gap. Leading gaps
/// hold the first observation, trailing gaps the last; a marker never
/// observed takes the `fill` values.
pub fn interpolate_linear(
    corrupted: &Tensor2,
    mask: &MaskSequence,
    fill: &[f64],
) -> Result<Tensor2, BaselineError> {
    check_dims(corrupted, mask, fill)?;
    let frames = mask.frames();
    let mut out = corrupted.clone();
    for (m, start, len) in mask.gaps() {
        let leading = start == 0;
        let trailing = start + len == frames;
        for k in 0..3 {
            let c = 3 * m + k;
            if leading && trailing {
                for f in 0..frames {
                    out.set(f, c, fill[c]);
                }
            } else if leading {
                let v = corrupted.get(len, c);
                for f in 0..len {
                    out.set(f, c, v);
                }
            } else if trailing {
                let v = corrupted.get(start - 1, c);
                for f in start..frames {
                    out.set(f, c, v);
                }
            } else {
                let fa = start - 1;
                let fb = start + len;
                let va = corrupted.get(fa, c);
                let vb = corrupted.get(fb, c);
                let span = (fb - fa) as f64;
                for f in start..start + len {
                    let t = (f - fa) as f64 / span;
                    out.set(f, c, va + (vb - va) * t);
                }
            }
        }
    }
    Ok(out)
}

/// Replace every missing cell with the corresponding `fill` coordinate.
pub fn fill_mean(
    corrupted: &Tensor2,
    mask: &MaskSequence,
    fill: &[f64],
) -> Result<Tensor2, BaselineError> {
    check_dims(corrupted, mask, fill)?;
    let mut out = corrupted.clone();
    for f in 0..mask.frames() {
        for m in 0..mask.markers() {
            if !mask.is_present(f, m) {
                for k in 0..3 {
                    out.set(f, 3 * m + k, fill[3 * m + k]);
                }
            }
        }
    }
    Ok(out)
}
