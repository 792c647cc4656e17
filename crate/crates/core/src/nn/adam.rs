//! Adam optimizer with bias correction.

use super::NnError;

/// First/second-moment accumulators for a fixed list of parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Defaults: beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new(block_sizes: &[usize]) -> Self {
        AdamState {
            m: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update over matching parameter/gradient blocks.
///
/// Blocks must match the sizes the state was created with, in the same order.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    lr: f64,
) -> Result<(), NnError> {
    if params.len() != state.m.len() || grads.len() != state.m.len() {
        return Err(NnError::DimensionMismatch {
            op: "adam_step",
            expected: (state.m.len(), 0),
            got: (params.len(), grads.len()),
        });
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.len() != m.len() || g.len() != m.len() {
            return Err(NnError::DimensionMismatch {
                op: "adam_step",
                expected: (m.len(), 0),
                got: (p.len(), g.len()),
            });
        }
    }
    state.t += 1;
    let t = state.t;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let bc1 = 1.0 - b1.powi(t as i32);
    let bc2 = 1.0 - b2.powi(t as i32);
    for (bi, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.m[bi];
        let v = &mut state.v[bi];
        for k in 0..p.len() {
            let gk = g[k];
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            if !p[k].is_finite() {
                return Err(NnError::NonFinite { op: "adam_step" });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut state = AdamState::new(&[3]);
        let mut p = vec![1.0, -2.0, 0.5];
        let g = vec![0.0; 3];
        adam_step(&mut state, &mut [&mut p], &[&g], 0.01).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn single_step_matches_hand_evaluation() {
        // Fresh state, scalar param 1.0, grad 1.0, lr 0.001:
        // m = 0.1, v = 0.001, m_hat = v_hat = 1 → step = lr / (1 + eps).
        let mut state = AdamState::new(&[1]);
        let mut p = vec![1.0];
        adam_step(&mut state, &mut [&mut p], &[&[1.0]], 0.001).unwrap();
        let want = 1.0 - 0.001 / (1.0 + 1e-8);
        assert!((p[0] - want).abs() < 1e-15);
        assert!((p[0] - 0.999).abs() < 1e-8);
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        // f(x) = x^2, grad 2x, from x = 1 with lr 0.1.
        let mut state = AdamState::new(&[1]);
        let mut p = vec![1.0];
        let mut values = Vec::new();
        for _ in 0..100 {
            let g = vec![2.0 * p[0]];
            adam_step(&mut state, &mut [&mut p], &[&g], 0.1).unwrap();
            values.push(p[0] * p[0]);
        }
        assert!(p[0].abs() < 0.5, "x = {} after 100 steps", p[0]);
        // Decreasing trend: mean of last quarter well below first quarter.
        let early: f64 = values[..25].iter().sum::<f64>() / 25.0;
        let late: f64 = values[75..].iter().sum::<f64>() / 25.0;
        assert!(late < early * 0.5, "early {early} late {late}");
    }

    #[test]
    fn block_count_mismatch_rejected() {
        let mut state = AdamState::new(&[2, 3]);
        let mut p = vec![0.0; 2];
        let g = vec![0.0; 2];
        assert!(matches!(
            adam_step(&mut state, &mut [&mut p], &[&g], 0.1),
            Err(NnError::DimensionMismatch { .. })
        ));
    }
}
