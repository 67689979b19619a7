//! Longitudinal series, datasets, the line-delimited dataset file format and
//! patient-level splitting.

mod io;
mod split;

use serde::{Deserialize, Serialize};

use crate::car::CarParams;
use crate::error::{Error, Result};
use crate::field::{pad_and_normalize_clamped, Bounds, Field, Mask, N_LOCATIONS};

pub use io::{load_dataset, read_dataset, save_dataset, write_dataset, FORMAT_VERSION};
pub use split::{split_patients, SplitProbabilities};

/// Disease-status label carried by some series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Healthy,
    Suspect,
    Glaucoma,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Healthy, ClassLabel::Suspect, ClassLabel::Glaucoma];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Healthy => "healthy",
            ClassLabel::Suspect => "suspect",
            ClassLabel::Glaucoma => "glaucoma",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Generating parameters stored alongside simulated series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truth {
    St(CarParams),
    Pw {
        intercepts: Vec<f64>,
        slopes: Vec<f64>,
        variances: Vec<f64>,
    },
    Vae {
        intercepts: Vec<f64>,
        slopes: Vec<f64>,
        variances: Vec<f64>,
    },
}

/// One subject's visits. Values are decibels at the informative locations
/// in canonical mask order.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub id: String,
    pub times: Vec<f64>,
    pub visits: Vec<Vec<f64>>,
    pub label: Option<ClassLabel>,
    pub truth: Option<Truth>,
}

impl Series {
    pub fn new(id: impl Into<String>, times: Vec<f64>, visits: Vec<Vec<f64>>) -> Result<Self> {
        let s = Self {
            id: id.into(),
            times,
            visits,
            label: None,
            truth: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.visits.is_empty() {
            return Err(Error::invalid(format!("series {} has no visits", self.id)));
        }
        if self.times.len() != self.visits.len() {
            return Err(Error::shape("Series", self.visits.len(), self.times.len()));
        }
        if let Some(w) = self.times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(format!(
                "series {} times not strictly increasing at visit {}",
                self.id,
                w + 1
            )));
        }
        for (i, v) in self.visits.iter().enumerate() {
            if v.len() != N_LOCATIONS {
                return Err(Error::shape("Series visit", N_LOCATIONS, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("series {} visit {i}", self.id)));
            }
        }
        Ok(())
    }

    /// First `n` visits as a new series (truth and label kept).
    pub fn truncated(&self, n: usize) -> Series {
        Series {
            id: self.id.clone(),
            times: self.times[..n].to_vec(),
            visits: self.visits[..n].to_vec(),
            label: self.label,
            truth: self.truth.clone(),
        }
    }

    /// Visits as model-ready fields, clamped into `bounds`.
    pub fn fields(&self, mask: &Mask, bounds: &Bounds) -> Result<Vec<Field>> {
        self.visits
            .iter()
            .map(|v| pad_and_normalize_clamped(v, mask, bounds))
            .collect()
    }

    /// Mean over all visits and locations.
    pub fn grand_mean(&self) -> f64 {
        let n = (self.visits.len() * N_LOCATIONS) as f64;
        self.visits.iter().flatten().sum::<f64>() / n
    }
}

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub seed: Option<u64>,
    #[serde(default)]
    pub spec: serde_json::Value,
}

impl Provenance {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            seed: None,
            spec: serde_json::Value::Null,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub mask: Mask,
    pub bounds: Bounds,
    pub provenance: Provenance,
    pub series: Vec<Series>,
}

impl Dataset {
    /// Builds a dataset whose upper bound is the largest observed value.
    pub fn new(mask: Mask, provenance: Provenance, series: Vec<Series>) -> Result<Self> {
        let bounds = Bounds::from_values(series.iter().flat_map(|s| s.visits.iter().flatten()))
            .or_else(|_| Bounds::new(0.0))?;
        let d = Self {
            mask,
            bounds,
            provenance,
            series,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        self.mask.validate_field_mask()?;
        self.bounds.validate()?;
        let mut seen = std::collections::HashSet::new();
        for s in &self.series {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::invalid(format!("duplicate series id {}", s.id)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Every visit of every series as a field normalized with `bounds`.
    pub fn all_fields(&self, bounds: &Bounds) -> Result<Vec<Field>> {
        let mut out = Vec::new();
        for s in &self.series {
            out.extend(s.fields(&self.mask, bounds)?);
        }
        Ok(out)
    }

    pub fn subset(&self, series: Vec<Series>) -> Dataset {
        Dataset {
            mask: self.mask.clone(),
            bounds: self.bounds,
            provenance: self.provenance.clone(),
            series,
        }
    }
}
