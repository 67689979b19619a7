//! Point forecasts: per-location least-squares lines (PW) and the two-stage
//! method that fits one line per latent dimension and decodes the
//! extrapolated code.

mod records;

pub use records::{read_prediction_records, write_prediction_records, PredictionRecord};

use serde::{Deserialize, Serialize};

use crate::data::Series;
use crate::error::{Error, Result};
use crate::field::{denormalize, Field};
use crate::vae::{LatentCode, VaeModel};

/// Least-squares line through (time, value) pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// sqrt(SSE / (n - 2)); zero when n = 2.
    pub residual_se: f64,
    pub n: usize,
}

impl LinearFit {
    #[inline]
    pub fn predict(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

pub fn ols_fit(times: &[f64], values: &[f64]) -> Result<LinearFit> {
    let n = times.len();
    if values.len() != n {
        return Err(Error::shape("ols_fit", n, values.len()));
    }
    if n < 2 {
        return Err(Error::invalid(format!("a line needs at least 2 points, got {n}")));
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ols_fit input".into()));
    }
    let nf = n as f64;
    let tm = times.iter().sum::<f64>() / nf;
    let ym = values.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (t, y) in times.iter().zip(values) {
        sxx += (t - tm) * (t - tm);
        sxy += (t - tm) * (y - ym);
    }
    if sxx == 0.0 {
        return Err(Error::invalid("all times are equal, the slope is undefined"));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let residual_se = if n > 2 {
        let sse: f64 = times.iter().zip(values).map(|(t, y)| (y - intercept - slope * t).powi(2)).sum();
        (sse / (nf - 2.0)).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit { slope, intercept, residual_se, n })
}

fn check_series(series: &Series) -> Result<()> {
    series.validate()?;
    if series.len() < 2 {
        return Err(Error::invalid(format!(
            "series {} has {} visit(s); forecasting needs at least 2",
            series.id,
            series.len()
        )));
    }
    Ok(())
}

/// Per-location lines and their extrapolations.
#[derive(Clone, Debug, PartialEq)]
pub struct PwForecast {
    pub fits: Vec<LinearFit>,
    /// Predicted decibel values per horizon, in location order.
    pub predictions: Vec<Vec<f64>>,
}

impl PwForecast {
    pub fn residual_se(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.residual_se).collect()
    }

    /// Observed minus fitted at every visit and location of `series`.
    pub fn residuals(&self, series: &Series) -> Vec<f64> {
        series
            .times
            .iter()
            .zip(&series.visits)
            .flat_map(|(&t, v)| v.iter().zip(&self.fits).map(move |(x, f)| x - f.predict(t)))
            .collect()
    }
}

pub fn pw_fit_predict(series: &Series, horizons: &[f64]) -> Result<PwForecast> {
    check_series(series)?;
    let m = series.visits[0].len();
    let fits = (0..m)
        .map(|loc| {
            let y: Vec<f64> = series.visits.iter().map(|v| v[loc]).collect();
            ols_fit(&series.times, &y)
        })
        .collect::<Result<Vec<_>>>()?;
    let predictions = horizons.iter().map(|&h| fits.iter().map(|f| f.predict(h)).collect()).collect();
    Ok(PwForecast { fits, predictions })
}

/// Codes of each visit and one line per latent dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentTrajectory {
    pub codes: Vec<LatentCode>,
    pub fits: Vec<LinearFit>,
}

impl LatentTrajectory {
    pub fn code_at(&self, t: f64) -> LatentCode {
        LatentCode(self.fits.iter().map(|f| f.predict(t)).collect())
    }
}

/// Fits lines to already-computed codes, one dimension at a time.
pub fn fit_codes(times: &[f64], codes: &[LatentCode]) -> Result<Vec<LinearFit>> {
    let k = codes.first().map(LatentCode::len).unwrap_or(0);
    (0..k)
        .map(|d| {
            let y: Vec<f64> = codes.iter().map(|c| c.as_slice()[d]).collect();
            ols_fit(times, &y)
        })
        .collect()
}

fn series_fields(model: &VaeModel, series: &Series) -> Result<Vec<Field>> {
    series.fields(&model.mask, &model.bounds)
}

pub fn latent_trajectory_fit(model: &VaeModel, series: &Series) -> Result<LatentTrajectory> {
    check_series(series)?;
    let codes = model.encode_batch(&series_fields(model, series)?)?;
    let fits = fit_codes(&series.times, &codes)?;
    Ok(LatentTrajectory { codes, fits })
}

/// Two-stage forecast at each horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoStageForecast {
    pub trajectory: LatentTrajectory,
    /// Decoded normalized fields per horizon.
    pub fields: Vec<Field>,
    /// The same predictions in decibels at the informative locations.
    pub predictions: Vec<Vec<f64>>,
}

impl TwoStageForecast {
    /// Observed minus decoded fitted code, in decibels, at every visit.
    pub fn residuals(&self, model: &VaeModel, series: &Series) -> Result<Vec<f64>> {
        let codes: Vec<LatentCode> = series.times.iter().map(|&t| self.trajectory.code_at(t)).collect();
        let fitted = model.decode_batch(&codes)?;
        Ok(series
            .visits
            .iter()
            .zip(&fitted)
            .flat_map(|(x, f)| {
                let d = denormalize(f, &model.bounds);
                x.iter().zip(d).map(|(a, b)| a - b).collect::<Vec<_>>()
            })
            .collect())
    }
}

pub fn two_stage_predict(model: &VaeModel, series: &Series, horizons: &[f64]) -> Result<TwoStageForecast> {
    let trajectory = latent_trajectory_fit(model, series)?;
    let codes: Vec<LatentCode> = horizons.iter().map(|&h| trajectory.code_at(h)).collect();
    let fields = model.decode_batch(&codes)?;
    let predictions = fields.iter().map(|f| denormalize(f, &model.bounds)).collect();
    Ok(TwoStageForecast { trajectory, fields, predictions })
}
