//! Finite-difference gradient verification.
//!
//! Independent of the analytic backward passes: gradients are estimated by
//! central differences of the scalar loss alone. Used by the test suites to
//! check every layer's analytic gradients.

/// Central finite-difference gradient of `f` at `x` with step `h`.
///
/// `x` is perturbed in place and restored before returning.
pub fn central_diff<F>(mut f: F, x: &mut [f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = f(x);
        x[i] = orig - h;
        let minus = f(x);
        x[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Max-norm relative error between an analytic and a numeric gradient:
/// ‖a − n‖∞ / max(‖a‖∞, ‖n‖∞, 1).
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0f64, f64::max);
    let na = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let nn = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    diff / na.max(nn).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        // f(x) = sum(x_i^2) → grad = 2x
        let mut x = vec![1.0, -2.0, 3.0];
        let fd = central_diff(|v| v.iter().map(|a| a * a).sum(), &mut x, 1e-6);
        let analytic: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert!(rel_error(&analytic, &fd) < 1e-9);
        assert_eq!(x, vec![1.0, -2.0, 3.0]); // restored
    }
}
