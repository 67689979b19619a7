//! Accuracy and structure summaries: MAE over informative locations,
//! residual standard error and empirical correlation matrices.

use serde::Serialize;

use crate::data::Series;
use crate::error::{Error, Result};
use crate::field::{Bounds, Field};

/// Mean absolute difference of two decibel vectors over the informative locations.
pub fn mae(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() || predicted.is_empty() {
        return Err(Error::shape("mae", truth.len(), predicted.len()));
    }
    Ok(predicted.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum::<f64>() / truth.len() as f64)
}

/// MAE in decibels between two normalized fields; padded cells are ignored.
pub fn mae_fields(predicted: &Field, truth: &Field, bounds: &Bounds) -> Result<f64> {
    if predicted.mask() != truth.mask() {
        return Err(Error::invalid("mae: fields use different masks"));
    }
    let p: Vec<f64> = predicted.informative().iter().map(|&u| bounds.denormalize(u)).collect();
    let t: Vec<f64> = truth.informative().iter().map(|&u| bounds.denormalize(u)).collect();
    mae(&p, &t)
}

/// sqrt(sum r^2 / (n - dof)).
pub fn residual_standard_error(residuals: &[f64], dof: usize) -> Result<f64> {
    if residuals.len() <= dof {
        return Err(Error::invalid(format!(
            "residual standard error needs more than {dof} residuals, got {}",
            residuals.len()
        )));
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("residuals".into()));
    }
    Ok((residuals.iter().map(|r| r * r).sum::<f64>() / (residuals.len() - dof) as f64).sqrt())
}

/// Pearson correlation; `None` when either input is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if a.len() != b.len() || a.len() < 2 || constant(a) || constant(b) {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Square matrix of correlations; undefined entries are `None`.
pub type CorrelationMatrix = Vec<Vec<Option<f64>>>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Correlations {
    /// Locations x locations, correlated across visits.
    pub spatial: CorrelationMatrix,
    /// Visits x visits, correlated across locations.
    pub temporal: CorrelationMatrix,
}

fn matrix(rows: &[Vec<f64>]) -> CorrelationMatrix {
    let n = rows.len();
    let mut m = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let r = correlation(&rows[i], &rows[j]).map(|r| if i == j { 1.0 } else { r });
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    m
}

pub fn empirical_correlations(series: &Series) -> Result<Correlations> {
    series.validate()?;
    let m = series.visits[0].len();
    let by_location: Vec<Vec<f64>> = (0..m).map(|l| series.visits.iter().map(|v| v[l]).collect()).collect();
    Ok(Correlations { spatial: matrix(&by_location), temporal: matrix(&series.visits) })
}

/// Mean |r| over defined off-diagonal entries.
pub fn mean_abs_off_diagonal(m: &CorrelationMatrix) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if let (true, Some(r)) = (i != j, v) {
                sum += r.abs();
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Element-wise mean over matrices, skipping undefined entries.
pub fn average_matrices(ms: &[CorrelationMatrix]) -> CorrelationMatrix {
    let Some(first) = ms.first() else {
        return Vec::new();
    };
    let n = first.len();
    let mut out = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            let vals: Vec<f64> = ms.iter().filter_map(|m| m.get(i).and_then(|r| r.get(j)).copied().flatten()).collect();
            if !vals.is_empty() {
                out[i][j] = Some(vals.iter().sum::<f64>() / vals.len() as f64);
            }
        }
    }
    out
}
