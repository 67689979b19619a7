//! Spatiotemporal CAR-AR(1) model: Leroux precision, forward simulation,
//! Gibbs/Metropolis posterior sampling and posterior-predictive forecasts.
//!
//! ```text
//! x_it   = beta + phi_it + eps_it,        eps_it ~ N(0, eta2)
//! phi_1  ~ N(0, tau2 Q(W, rho)^-1)
//! phi_t  | phi_{t-1} ~ N(psi phi_{t-1}, tau2 Q(W, rho)^-1)
//! Q(W, rho) = rho (diag(W 1) - W) + (1 - rho) I
//! ```

mod adjacency;
mod forecast;
mod gibbs;
mod precision;
mod simulate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nalgebra::DMatrix;
pub use adjacency::{build_adjacency, AdjacencyMatrix};
pub use forecast::{forecast_st, StForecast};
pub use gibbs::{gibbs_fit, write_posterior_csv, CarPosterior, McmcConfig};
pub(crate) use gibbs::truncated_normal;
pub use precision::{leroux_precision, log_det_precision, LerouxSpectrum};
pub use simulate::{simulate_car_st, CarSimulation};

/// Parameters of the CAR-AR(1) model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarParams {
    pub beta: f64,
    pub tau2: f64,
    pub eta2: f64,
    pub rho: f64,
    pub psi: f64,
}

impl CarParams {
    /// Strict constraints: positive variances, correlations in (0, 1).
    pub fn validate(&self) -> Result<()> {
        let ok = self.beta.is_finite()
            && self.tau2 > 0.0
            && self.eta2 > 0.0
            && self.tau2.is_finite()
            && self.eta2.is_finite()
            && self.rho > 0.0
            && self.rho < 1.0
            && self.psi > 0.0
            && self.psi < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("CAR parameters out of range: {self:?}")))
        }
    }
}
