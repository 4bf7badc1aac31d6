//! Finite-difference gradient checking.
//!
//! Central differences around the current parameter vector give an
//! independent estimate of the gradient that never touches the tape. Tests
//! compare the two coordinate-wise with a relative error guarded by an
//! absolute floor, so coordinates where both estimates are essentially zero
//! (dead ReLU units, unused parameters) do not blow up the ratio.

/// Central-difference gradient of `loss` at `params` with half-step `step`.
///
/// `loss` must be a pure function of the parameter vector; it is called
/// twice per coordinate and the vector is restored exactly afterwards.
pub fn finite_diff_grad<F>(params: &mut [f64], mut loss: F, step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = vec![0.0; params.len()];
    for i in 0..params.len() {
        let saved = params[i];
        params[i] = saved + step;
        let up = loss(params);
        params[i] = saved - step;
        let down = loss(params);
        params[i] = saved;
        grad[i] = (up - down) / (2.0 * step);
    }
    grad
}

/// Largest coordinate-wise relative error between two gradient estimates.
///
/// Each coordinate contributes `|a - b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient length mismatch");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
