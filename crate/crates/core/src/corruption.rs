//! Missing-marker masks and the corruption map applied to network inputs.
//!
//! Masks are marker-granular: all three coordinates of a marker are missing
//! or present together. Gaps are contiguous per-marker runs whose duration is
//! drawn from a Gaussian, placed until the realized missing rate is within
//! ±1 percentage point of the target. Corruption zeroes missing coordinates
//! (in normalized space, zero denormalizes to the mean pose) and, at training
//! time, adds Gaussian noise with std `sigma · alpha` to the present ones.

use crate::Tensor2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CorruptionError {
    #[error("cannot reach missing rate {target}: realized {realized}")]
    UnreachableRate { target: f64, realized: f64 },
    #[error("gap window [{lead_in}, {lead_in}+{gap}) exceeds {frames} frames")]
    BadWindow {
        lead_in: usize,
        gap: usize,
        frames: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// F × n presence matrix; `true` means the marker is observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSequence {
    frames: usize,
    markers: usize,
    present: Vec<bool>,
}

impl MaskSequence {
    pub fn all_present(frames: usize, markers: usize) -> Self {
        MaskSequence {
            frames,
            markers,
            present: vec![true; frames * markers],
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn markers(&self) -> usize {
        self.markers
    }

    #[inline]
    pub fn is_present(&self, frame: usize, marker: usize) -> bool {
        self.present[frame * self.markers + marker]
    }

    pub fn set_present(&mut self, frame: usize, marker: usize, value: bool) {
        self.present[frame * self.markers + marker] = value;
    }

    /// Fraction of (frame, marker) cells that are missing.
    pub fn missing_rate(&self) -> f64 {
        let missing = self.present.iter().filter(|&&p| !p).count();
        missing as f64 / self.present.len() as f64
    }

    pub fn any_missing(&self) -> bool {
        self.present.iter().any(|&p| !p)
    }

    /// Sub-mask covering frames [start, start + len).
    pub fn window(&self, start: usize, len: usize) -> MaskSequence {
        assert!(start + len <= self.frames);
        MaskSequence {
            frames: len,
            markers: self.markers,
            present: self.present[start * self.markers..(start + len) * self.markers].to_vec(),
        }
    }

    /// Maximal contiguous missing runs per marker, as (marker, start, len).
    pub fn gaps(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for m in 0..self.markers {
            let mut run_start = None;
            for f in 0..self.frames {
                match (self.is_present(f, m), run_start) {
                    (false, None) => run_start = Some(f),
                    (true, Some(s)) => {
                        out.push((m, s, f - s));
                        run_start = None;
                    }
                    _ => {}
                }
            }
            if let Some(s) = run_start {
                out.push((m, s, self.frames - s));
            }
        }
        out
    }
}

/// Random-gap sampling parameters. Durations are drawn from
/// N(gap_mean, gap_std), rounded, and clamped to [1, frames − start].
#[derive(Debug, Clone, PartialEq)]
pub struct GapSpec {
    /// Target fraction of missing (frame, marker) cells, in [0, 1).
    pub missing_rate: f64,
    /// Mean gap duration in frames.
    pub gap_mean: f64,
    /// Gap duration standard deviation in frames.
    pub gap_std: f64,
    pub rng_seed: u64,
}

/// Tolerance on the realized missing rate, in rate units (1 percentage point).
pub const RATE_TOLERANCE: f64 = 0.01;

/// Sample a random-gap mask: (marker, start) uniform, duration Gaussian,
/// repeated until the realized rate is within ±1 pp of the target.
/// Deterministic given the spec's seed.
pub fn sample_mask(
    frames: usize,
    markers: usize,
    spec: &GapSpec,
) -> Result<MaskSequence, CorruptionError> {
    assert!(frames >= 1 && markers >= 1, "mask dimensions must be positive");
    assert!(spec.gap_mean > 0.0 && spec.gap_std >= 0.0, "invalid gap distribution");
    if !(0.0..1.0).contains(&spec.missing_rate) {
        return Err(CorruptionError::UnreachableRate {
            target: spec.missing_rate,
            realized: 0.0,
        });
    }
    let mut mask = MaskSequence::all_present(frames, markers);
    if spec.missing_rate == 0.0 {
        return Ok(mask);
    }
    let total = frames * markers;
    let target = spec.missing_rate;
    let cap = ((target + RATE_TOLERANCE) * total as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let duration = Normal::new(spec.gap_mean, spec.gap_std).expect("valid gap distribution");
    let mut missing = 0usize;
    let max_attempts = 10 * total;
    let mut attempts = 0usize;
    while (missing as f64) < target * total as f64 {
        attempts += 1;
        if attempts > max_attempts {
            break;
        }
        let marker = rng.gen_range(0..markers);
        let start = rng.gen_range(0..frames);
        let drawn = duration.sample(&mut rng).round();
        let len = (drawn.max(1.0) as usize).min(frames - start);
        for f in start..start + len {
            if missing >= cap {
                break;
            }
            if mask.is_present(f, marker) {
                mask.set_present(f, marker, false);
                missing += 1;
            }
        }
    }
    let realized = mask.missing_rate();
    if (realized - target).abs() <= RATE_TOLERANCE + f64::EPSILON {
        Ok(mask)
    } else {
        Err(CorruptionError::UnreachableRate { target, realized })
    }
}

/// Mask for the long-gap protocol: every marker present outside
/// [lead_in, lead_in + gap); the listed markers absent for the whole gap.
pub fn long_gap_mask(
    frames: usize,
    markers: usize,
    markers_missing: &[usize],
    lead_in: usize,
    gap: usize,
) -> Result<MaskSequence, CorruptionError> {
    if lead_in + gap > frames {
        return Err(CorruptionError::BadWindow {
            lead_in,
            gap,
            frames,
        });
    }
    let mut mask = MaskSequence::all_present(frames, markers);
    for &m in markers_missing {
        assert!(m < markers, "marker index out of range");
        for f in lead_in..lead_in + gap {
            mask.set_present(f, m, false);
        }
    }
    Ok(mask)
}

/// Apply the corruption map to a T × 3n window:
/// present coordinates get optional Gaussian noise (std `sigma[c] · alpha`),
/// missing coordinates become zero. With `noise_alpha = 0` this is pure
/// nullification and consumes no randomness.
pub fn corrupt<R: Rng>(
    window: &Tensor2,
    mask: &MaskSequence,
    noise_alpha: f64,
    sigma: &[f64],
    rng: &mut R,
) -> Result<Tensor2, CorruptionError> {
    assert!(noise_alpha >= 0.0, "noise_alpha must be non-negative");
    if window.rows() != mask.frames() {
        return Err(CorruptionError::DimensionMismatch {
            expected: mask.frames(),
            got: window.rows(),
        });
    }
    if window.cols() != 3 * mask.markers() || sigma.len() != window.cols() {
        return Err(CorruptionError::DimensionMismatch {
            expected: 3 * mask.markers(),
            got: window.cols(),
        });
    }
    let mut out = window.clone();
    let markers = mask.markers();
    for f in 0..mask.frames() {
        let row = out.row_mut(f);
        for m in 0..markers {
            if mask.is_present(f, m) {
                if noise_alpha > 0.0 {
                    for k in 0..3 {
                        let c = 3 * m + k;
                        let std = sigma[c] * noise_alpha;
                        if std > 0.0 {
                            let noise: f64 =
                                Normal::new(0.0, std).expect("positive std").sample(rng);
                            row[c] += noise;
                        }
                    }
                }
            } else {
                row[3 * m] = 0.0;
                row[3 * m + 1] = 0.0;
                row[3 * m + 2] = 0.0;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_all_present() {
        let spec = GapSpec {
            missing_rate: 0.0,
            gap_mean: 10.0,
            gap_std: 5.0,
            rng_seed: 1,
        };
        let mask = sample_mask(100, 5, &spec).unwrap();
        assert!(!mask.any_missing());
    }

    #[test]
    fn sampled_mask_hits_rate_with_contiguous_gaps() {
        for &rate in &[0.1, 0.2, 0.3] {
            let spec = GapSpec {
                missing_rate: rate,
                gap_mean: 10.0,
                gap_std: 5.0,
                rng_seed: 42,
            };
            let mask = sample_mask(1000, 41, &spec).unwrap();
            let realized = mask.missing_rate();
            assert!(
                (realized - rate).abs() <= 0.01 + f64::EPSILON,
                "rate {rate}: realized {realized}"
            );
            // Contiguity oracle: rescan the raw mask, counting missing cells
            // covered by maximal runs; must account for every missing cell.
            let gaps = mask.gaps();
            let total_from_gaps: usize = gaps.iter().map(|&(_, _, len)| len).sum();
            let missing = (0..1000)
                .flat_map(|f| (0..41).map(move |m| (f, m)))
                .filter(|&(f, m)| !mask.is_present(f, m))
                .count();
            assert_eq!(total_from_gaps, missing);
            for &(m, s, len) in &gaps {
                assert!(len >= 1);
                for f in s..s + len {
                    assert!(!mask.is_present(f, m));
                }
                // Runs are maximal.
                if s > 0 {
                    assert!(mask.is_present(s - 1, m));
                }
                if s + len < 1000 {
                    assert!(mask.is_present(s + len, m));
                }
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let spec = GapSpec {
            missing_rate: 0.2,
            gap_mean: 10.0,
            gap_std: 5.0,
            rng_seed: 7,
        };
        let a = sample_mask(400, 41, &spec).unwrap();
        let b = sample_mask(400, 41, &spec).unwrap();
        assert_eq!(a, b);
        let other = sample_mask(
            400,
            41,
            &GapSpec {
                rng_seed: 8,
                ..spec
            },
        )
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn rate_one_is_unreachable() {
        let spec = GapSpec {
            missing_rate: 1.0,
            gap_mean: 10.0,
            gap_std: 5.0,
            rng_seed: 1,
        };
        assert!(matches!(
            sample_mask(10, 2, &spec),
            Err(CorruptionError::UnreachableRate { .. })
        ));
    }

    #[test]
    fn long_gap_protocol_shape() {
        // 1 s lead-in + 5 s gap at 120 Hz.
        let mask = long_gap_mask(1000, 41, &[3, 7, 9], 120, 600).unwrap();
        for f in 0..1000 {
            for m in 0..41 {
                let in_gap = (120..720).contains(&f) && [3, 7, 9].contains(&m);
                assert_eq!(mask.is_present(f, m), !in_gap);
            }
        }
        // Per-frame rate inside the gap with 30 of 41 missing.
        let thirty: Vec<usize> = (0..30).collect();
        let mask = long_gap_mask(1000, 41, &thirty, 120, 600).unwrap();
        let missing_in_gap = (0..41).filter(|&m| !mask.is_present(300, m)).count();
        assert_eq!(missing_in_gap, 30);
        assert!((missing_in_gap as f64 / 41.0 - 30.0 / 41.0).abs() < 1e-12);
    }

    #[test]
    fn empty_marker_set_is_all_present() {
        let mask = long_gap_mask(50, 4, &[], 10, 20).unwrap();
        assert!(!mask.any_missing());
    }

    #[test]
    fn bad_window_rejected() {
        assert!(matches!(
            long_gap_mask(100, 4, &[0], 60, 50),
            Err(CorruptionError::BadWindow { .. })
        ));
    }

    #[test]
    fn corrupt_identity_and_annihilation() {
        use rand_chacha::ChaCha8Rng;
        let window = Tensor2::from_vec(2, 6, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, -1.0, -2.0, -3.0, -4.0, -5.0, -6.0]);
        let sigma = vec![1.0; 6];
        let mut rng = ChaCha8Rng::seed_from_u64(0);

        let all = MaskSequence::all_present(2, 2);
        let out = corrupt(&window, &all, 0.0, &sigma, &mut rng).unwrap();
        assert_eq!(out, window);

        let mut none = MaskSequence::all_present(2, 2);
        for f in 0..2 {
            for m in 0..2 {
                none.set_present(f, m, false);
            }
        }
        let out = corrupt(&window, &none, 0.0, &sigma, &mut rng).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn corrupt_alpha_zero_is_idempotent_masking() {
        use rand_chacha::ChaCha8Rng;
        let window = Tensor2::from_vec(3, 6, (0..18).map(|v| v as f64).collect());
        let mut mask = MaskSequence::all_present(3, 2);
        mask.set_present(1, 0, false);
        let sigma = vec![0.5; 6];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let once = corrupt(&window, &mask, 0.0, &sigma, &mut rng).unwrap();
        let twice = corrupt(&once, &mask, 0.0, &sigma, &mut rng).unwrap();
        assert_eq!(once, twice);
        // Equals elementwise mask multiplication.
        for f in 0..3 {
            for m in 0..2 {
                let factor = if mask.is_present(f, m) { 1.0 } else { 0.0 };
                for k in 0..3 {
                    assert_eq!(once.get(f, 3 * m + k), window.get(f, 3 * m + k) * factor);
                }
            }
        }
    }

    #[test]
    fn injected_noise_std_matches_sigma_alpha() {
        use rand_chacha::ChaCha8Rng;
        // > 1e5 present coordinate samples.
        let frames = 1000;
        let markers = 34;
        let dims = 3 * markers;
        let window = Tensor2::zeros(frames, dims);
        let mask = MaskSequence::all_present(frames, markers);
        let sigma = vec![0.5; dims];
        let alpha = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let out = corrupt(&window, &mask, alpha, &sigma, &mut rng).unwrap();
        let n = out.len() as f64;
        let mean: f64 = out.data().iter().sum::<f64>() / n;
        let var: f64 = out.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let want = 0.5 * alpha;
        assert!(
            (std - want).abs() / want < 0.05,
            "std {std} vs expected {want}"
        );
    }

    #[test]
    fn corrupt_checks_dimensions() {
        let window = Tensor2::zeros(2, 6);
        let mask = MaskSequence::all_present(3, 2);
        let sigma = vec![1.0; 6];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            corrupt(&window, &mask, 0.0, &sigma, &mut rng),
            Err(CorruptionError::DimensionMismatch { .. })
        ));
    }
}
