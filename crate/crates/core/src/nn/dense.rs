//! Fully connected layer with analytic gradients.

use super::{check_finite, Activation, NnError};
use crate::Tensor2;

/// Weights `w` (out × in) and bias `b` (out) of one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayerParams {
    pub w: Tensor2,
    pub b: Vec<f64>,
}

impl DenseLayerParams {
    pub fn new(w: Tensor2, b: Vec<f64>) -> Self {
        assert_eq!(w.rows(), b.len(), "bias length must match output dim");
        DenseLayerParams { w, b }
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }
}

/// Values cached by the forward pass and consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    x: Tensor2,
    y: Tensor2,
}

impl DenseCache {
    pub fn output(&self) -> &Tensor2 {
        &self.y
    }
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub dw: Tensor2,
    pub db: Vec<f64>,
}

/// y = act(x · wᵀ + b), batched over rows of `x` (B × in).
pub fn dense_forward(
    p: &DenseLayerParams,
    x: &Tensor2,
    act: Activation,
) -> Result<(Tensor2, DenseCache), NnError> {
    if x.cols() != p.in_dim() {
        return Err(NnError::DimensionMismatch {
            op: "dense_forward",
            expected: (x.rows(), p.in_dim()),
            got: (x.rows(), x.cols()),
        });
    }
    let mut y = x.matmul_nt(&p.w);
    y.add_row_vec(&p.b);
    y.map_inplace(|v| act.apply(v));
    check_finite(&y, "dense_forward")?;
    let cache = DenseCache { x: x.clone(), y: y.clone() };
    Ok((y, cache))
}

/// Gradients of a scalar loss w.r.t. weights, bias and input, given dL/dy.
pub fn dense_backward(
    p: &DenseLayerParams,
    cache: &DenseCache,
    act: Activation,
    dy: &Tensor2,
) -> Result<(DenseGrads, Tensor2), NnError> {
    if dy.rows() != cache.y.rows() || dy.cols() != cache.y.cols() {
        return Err(NnError::DimensionMismatch {
            op: "dense_backward",
            expected: (cache.y.rows(), cache.y.cols()),
            got: (dy.rows(), dy.cols()),
        });
    }
    // dz = dy ⊙ act'(y)
    let dz = dy.zip_map(&cache.y, |g, y| g * act.derivative_from_output(y));
    let dw = dz.matmul_tn(&cache.x);
    let db = dz.col_sums();
    let dx = dz.matmul(&p.w);
    check_finite(&dw, "dense_backward")?;
    check_finite(&dx, "dense_backward")?;
    Ok((DenseGrads { dw, db }, dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weights_pass_input_through() {
        let mut w = Tensor2::zeros(3, 3);
        for i in 0..3 {
            w.set(i, i, 1.0);
        }
        let p = DenseLayerParams::new(w, vec![0.0; 3]);
        let x = Tensor2::from_vec(2, 3, vec![1.0, -2.0, 0.5, 3.0, 4.0, -5.0]);
        let (y, _) = dense_forward(&p, &x, Activation::Identity).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn two_by_two_tanh_matches_hand_computation() {
        // w = [[0.5, -1.0], [2.0, 0.25]], b = [0.1, -0.2], x = [1.0, 2.0]
        let p = DenseLayerParams::new(
            Tensor2::from_vec(2, 2, vec![0.5, -1.0, 2.0, 0.25]),
            vec![0.1, -0.2],
        );
        let x = Tensor2::from_vec(1, 2, vec![1.0, 2.0]);
        let (y, _) = dense_forward(&p, &x, Activation::Tanh).unwrap();
        // Scalar arithmetic done independently:
        // z0 = 0.5*1 + (-1)*2 + 0.1 = -1.4; z1 = 2*1 + 0.25*2 - 0.2 = 2.3
        let want0 = (-1.4f64).tanh();
        let want1 = 2.3f64.tanh();
        assert!((y.get(0, 0) - want0).abs() < 1e-12);
        assert!((y.get(0, 1) - want1).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = DenseLayerParams::new(Tensor2::zeros(2, 3), vec![0.0; 2]);
        let x = Tensor2::zeros(1, 4);
        let err = dense_forward(&p, &x, Activation::Identity).unwrap_err();
        assert!(matches!(err, NnError::DimensionMismatch { .. }));
    }

    #[test]
    fn nonfinite_output_is_caught() {
        let p = DenseLayerParams::new(
            Tensor2::from_vec(1, 1, vec![f64::MAX]),
            vec![0.0],
        );
        let x = Tensor2::from_vec(1, 1, vec![f64::MAX]);
        let err = dense_forward(&p, &x, Activation::Identity).unwrap_err();
        assert_eq!(err, NnError::NonFinite { op: "dense_forward" });
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let p = DenseLayerParams::new(
            crate::nn::glorot_uniform(8, 8, 8, 8, &mut rng),
            vec![0.01; 8],
        );
        let x = crate::nn::glorot_uniform(4, 8, 8, 8, &mut rng);
        let target = crate::nn::glorot_uniform(4, 8, 8, 8, &mut rng);

        let loss_fn = |p: &DenseLayerParams, x: &Tensor2| {
            let (y, _) = dense_forward(p, x, Activation::Tanh).unwrap();
            crate::nn::mse_loss(&y, &target).unwrap().0
        };

        let (y, cache) = dense_forward(&p, &x, Activation::Tanh).unwrap();
        let (_, dy) = crate::nn::mse_loss(&y, &target).unwrap();
        let (grads, dx) = dense_backward(&p, &cache, Activation::Tanh, &dy).unwrap();

        // dW
        let x2 = x.clone();
        let mut w_flat = p.w.data().to_vec();
        let fd_w = gradcheck::central_diff(
            |ws| {
                let p2 = DenseLayerParams::new(
                    Tensor2::from_vec(8, 8, ws.to_vec()),
                    p.b.clone(),
                );
                loss_fn(&p2, &x2)
            },
            &mut w_flat,
            1e-6,
        );
        assert!(gradcheck::rel_error(grads.dw.data(), &fd_w) < 1e-6);

        // db
        let mut b_flat = p.b.clone();
        let w_copy = p.w.clone();
        let fd_b = gradcheck::central_diff(
            |bs| {
                let p2 = DenseLayerParams::new(w_copy.clone(), bs.to_vec());
                loss_fn(&p2, &x2)
            },
            &mut b_flat,
            1e-6,
        );
        assert!(gradcheck::rel_error(&grads.db, &fd_b) < 1e-6);

        // dx
        let mut x_flat = x.data().to_vec();
        let fd_x = gradcheck::central_diff(
            |xs| loss_fn(&p, &Tensor2::from_vec(4, 8, xs.to_vec())),
            &mut x_flat,
            1e-6,
        );
        assert!(gradcheck::rel_error(dx.data(), &fd_x) < 1e-6);
    }
}
