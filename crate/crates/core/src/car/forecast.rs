use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::gibbs::quantile_sorted;
use super::CarPosterior;
use crate::error::{Error, Result};

/// Pointwise predictive summary at one horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct StForecast {
    pub horizon: usize,
    /// Rao-Blackwellized mean, the sample average of beta + psi^h phi_T.
    pub mean: Vec<f64>,
    /// Central 90% interval from simulated predictive draws.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl StForecast {
    pub fn width(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }
}

const LOWER_Q: f64 = 0.05;
const UPPER_Q: f64 = 0.95;

/// Posterior-predictive forecast `h` periods past the last fitted visit.
/// With `h = 0` this is the posterior of the de-noised last visit.
pub fn forecast_st(posterior: &CarPosterior, h: usize, seed: u64) -> Result<StForecast> {
    if posterior.is_empty() {
        return Err(Error::invalid("cannot forecast from an empty posterior"));
    }
    let m = posterior.locations();
    let last = posterior.periods() - 1;
    let spectrum = posterior.spectrum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = posterior.len();
    let mut mean = vec![0.0; m];
    let mut draws = vec![Vec::with_capacity(n); m];
    for (s, p) in posterior.samples.iter().enumerate() {
        let phi_t = DVector::from_column_slice(posterior.phi(s, last));
        let decay = p.psi.powi(h as i32);
        for i in 0..m {
            mean[i] += (p.beta + decay * phi_t[i]) / n as f64;
        }
        let mut phi = phi_t;
        for _ in 0..h {
            let z = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            phi = phi * p.psi + spectrum.sample_inverse(&z, p.rho) * p.tau2.sqrt();
        }
        let eta = if h == 0 { 0.0 } else { p.eta2.sqrt() };
        for (i, d) in draws.iter_mut().enumerate() {
            let e: f64 = StandardNormal.sample(&mut rng);
            d.push(p.beta + phi[i] + eta * e);
        }
    }
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    for d in draws.iter_mut() {
        d.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(d, LOWER_Q));
        upper.push(quantile_sorted(d, UPPER_Q));
    }
    Ok(StForecast { horizon: h, mean, lower, upper })
}
