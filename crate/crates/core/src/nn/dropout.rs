//! Inverted dropout: units kept with probability `keep_prob` are scaled by
//! 1/keep_prob at training time; inference is the identity.

use super::NnError;
use crate::Tensor2;
use rand::Rng;

/// Per-element multipliers applied by the forward pass (0 or 1/keep_prob).
/// `None` when dropout was a no-op (inference, or keep_prob = 1).
pub type DropoutMask = Option<Tensor2>;

pub fn dropout<R: Rng>(
    x: &Tensor2,
    keep_prob: f64,
    rng: &mut R,
    training: bool,
) -> Result<(Tensor2, DropoutMask), NnError> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(NnError::BadProbability(keep_prob));
    }
    if !training || keep_prob == 1.0 {
        return Ok((x.clone(), None));
    }
    let inv = 1.0 / keep_prob;
    let mask_data: Vec<f64> = (0..x.len())
        .map(|_| if rng.gen::<f64>() < keep_prob { inv } else { 0.0 })
        .collect();
    let mask = Tensor2::from_vec(x.rows(), x.cols(), mask_data);
    let y = x.zip_map(&mask, |v, m| v * m);
    Ok((y, Some(mask)))
}

/// Backward pass: the same multipliers applied to the upstream gradient.
pub fn dropout_backward(dy: &Tensor2, mask: &DropoutMask) -> Tensor2 {
    match mask {
        None => dy.clone(),
        Some(m) => dy.zip_map(m, |g, v| g * v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn keep_prob_one_is_identity() {
        let x = Tensor2::from_vec(1, 4, vec![1.0, -2.0, 3.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (y, mask) = dropout(&x, 1.0, &mut rng, true).unwrap();
        assert_eq!(y, x);
        assert!(mask.is_none());
    }

    #[test]
    fn inference_is_identity_for_any_keep_prob() {
        let x = Tensor2::from_vec(1, 4, vec![1.0, -2.0, 3.0, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (y, mask) = dropout(&x, 0.3, &mut rng, false).unwrap();
        assert_eq!(y, x);
        assert!(mask.is_none());
    }

    #[test]
    fn bad_probability_rejected() {
        let x = Tensor2::zeros(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            dropout(&x, 0.0, &mut rng, true).unwrap_err(),
            NnError::BadProbability(0.0)
        );
        assert!(dropout(&x, 1.5, &mut rng, true).is_err());
    }

    #[test]
    fn kept_fraction_and_mean_are_preserved() {
        let n = 1_000_000;
        let x = Tensor2::filled(1, n, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (y, mask) = dropout(&x, 0.9, &mut rng, true).unwrap();
        let kept = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        assert!(
            (0.899..=0.901).contains(&kept),
            "kept fraction {kept} outside [0.899, 0.901]"
        );
        // E[y] should match E[x] = 1 within 1%.
        let mean = y.data().iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean} deviates more than 1%");
        assert!(mask.is_some());
    }
}
