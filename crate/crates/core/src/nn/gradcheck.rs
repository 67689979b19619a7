use crate::error::{Error, Result};

/// Central-difference gradient of `loss` at `params`, one coordinate at a time.
pub fn finite_difference_gradient<F>(mut loss: F, params: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step must be > 0, got {step}")));
    }
    let mut probe = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = loss(&probe);
        probe[i] = orig - step;
        let down = loss(&probe);
        probe[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("loss while perturbing coordinate {i}")));
        }
        grad.push((up - down) / (2.0 * step));
    }
    Ok(grad)
}

/// Relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest [`relative_error`] across two gradient vectors, with its index.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> (usize, f64) {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n, floor))
        .enumerate()
        .fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best })
}
