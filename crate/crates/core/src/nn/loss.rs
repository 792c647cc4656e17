//! Mean-squared-error loss.

use super::{check_finite, NnError};
use crate::Tensor2;

/// Mean over all elements of the squared difference, and its gradient
/// dL/dpred = 2 (pred − target) / N.
pub fn mse_loss(pred: &Tensor2, target: &Tensor2) -> Result<(f64, Tensor2), NnError> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(NnError::DimensionMismatch {
            op: "mse_loss",
            expected: (target.rows(), target.cols()),
            got: (pred.rows(), pred.cols()),
        });
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    for (p, t) in pred.data().iter().zip(target.data()) {
        let d = p - t;
        loss += d * d;
    }
    loss /= n;
    if !loss.is_finite() {
        return Err(NnError::NonFinite { op: "mse_loss" });
    }
    let grad = pred.zip_map(target, |p, t| 2.0 * (p - t) / n);
    check_finite(&grad, "mse_loss")?;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck;

    #[test]
    fn zero_for_equal_inputs() {
        let a = Tensor2::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let (loss, grad) = mse_loss(&a, &a).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_case() {
        // differences (1, 2, 2) over 3 elements → (1 + 4 + 4) / 3 = 3
        let pred = Tensor2::from_vec(1, 3, vec![1.0, 2.0, 2.0]);
        let target = Tensor2::zeros(1, 3);
        let (loss, _) = mse_loss(&pred, &target).unwrap();
        assert!((loss - 3.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let target = Tensor2::from_vec(2, 3, vec![0.3, -0.1, 0.7, 0.0, 1.5, -2.0]);
        let pred = Tensor2::from_vec(2, 3, vec![1.0, 0.2, -0.4, 0.9, 0.6, 0.1]);
        let (_, grad) = mse_loss(&pred, &target).unwrap();
        let mut flat = pred.data().to_vec();
        let fd = gradcheck::central_diff(
            |xs| {
                mse_loss(&Tensor2::from_vec(2, 3, xs.to_vec()), &target)
                    .unwrap()
                    .0
            },
            &mut flat,
            1e-6,
        );
        assert!(gradcheck::rel_error(grad.data(), &fd) < 1e-8);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Tensor2::zeros(1, 2);
        let b = Tensor2::zeros(2, 1);
        assert!(matches!(
            mse_loss(&a, &b),
            Err(NnError::DimensionMismatch { .. })
        ));
    }
}
