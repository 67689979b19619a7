use std::fmt::Write as _;

use serde::Serialize;

use crate::data::{Dataset, Series};
use crate::error::{Error, Result};
use crate::field::denormalize;
use crate::metrics::{average_matrices, empirical_correlations, mean_abs_off_diagonal, CorrelationMatrix};
use crate::report::csv_num;
use crate::report::svg::{heatmaps, Heatmap};
use crate::vae::VaeModel;

/// Spatial correlation of raw versus decoded fields, averaged over series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothingReport {
    pub n_series: usize,
    pub raw: CorrelationMatrix,
    pub decoded: CorrelationMatrix,
    /// Mean |r| off the diagonal of the averaged matrices.
    pub raw_mean: Option<f64>,
    pub decoded_mean: Option<f64>,
}

impl SmoothingReport {
    pub fn difference(&self) -> Option<f64> {
        Some(self.decoded_mean? - self.raw_mean?)
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("n_series,raw_mean_abs_offdiag,decoded_mean_abs_offdiag,difference\n");
        let _ = writeln!(
            s,
            "{},{},{},{}",
            self.n_series,
            csv_num(self.raw_mean),
            csv_num(self.decoded_mean),
            csv_num(self.difference())
        );
        s
    }

    pub fn heatmap_svg(&self) -> String {
        let maps = [
            Heatmap { title: "raw".into(), values: &self.raw, row_labels: vec![], col_labels: vec![] },
            Heatmap { title: "decoded".into(), values: &self.decoded, row_labels: vec![], col_labels: vec![] },
        ];
        heatmaps("Spatial correlation across visits", &maps, -1.0, 1.0)
    }
}

/// Correlation matrices of each series averaged entrywise.
pub fn mean_spatial_correlation(series: &[Series]) -> Result<CorrelationMatrix> {
    let ms = series.iter().map(|s| empirical_correlations(s).map(|c| c.spatial)).collect::<Result<Vec<_>>>()?;
    Ok(average_matrices(&ms))
}

/// Each visit replaced by its reconstruction, in decibels.
pub fn decoded_series(model: &VaeModel, s: &Series) -> Result<Series> {
    let fields = s.fields(&model.mask, &model.bounds)?;
    let codes = model.encode_batch(&fields)?;
    let visits = model.decode_batch(&codes)?.iter().map(|f| denormalize(f, &model.bounds)).collect();
    Ok(Series { visits, ..s.clone() })
}

/// Compares the spatial correlation structure of raw series with their
/// reconstructions through `model`.
pub fn smoothing_diagnostic(model: &VaeModel, data: &Dataset) -> Result<SmoothingReport> {
    if data.series.iter().any(|s| s.len() < 2) {
        return Err(Error::invalid("spatial correlations need series with at least 2 visits"));
    }
    let decoded = data.series.iter().map(|s| decoded_series(model, s)).collect::<Result<Vec<_>>>()?;
    let raw = mean_spatial_correlation(&data.series)?;
    let dec = mean_spatial_correlation(&decoded)?;
    Ok(SmoothingReport {
        n_series: data.len(),
        raw_mean: mean_abs_off_diagonal(&raw),
        decoded_mean: mean_abs_off_diagonal(&dec),
        raw,
        decoded: dec,
    })
}
