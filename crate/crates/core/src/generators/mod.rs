//! Simulated longitudinal datasets: the spatiotemporal CAR process,
//! independent per-location linear trends, and linear latent trajectories
//! pushed through a trained decoder.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::car::{build_adjacency, simulate_car_st, truncated_normal, AdjacencyMatrix, CarParams};
use crate::data::{ClassLabel, Dataset, Provenance, Series, Truth};
use crate::error::{Error, Result};
use crate::field::{denormalize, Mask, N_LOCATIONS};
use crate::util::derive_seed;
use crate::vae::{LatentCode, VaeModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    St,
    Pw,
    Vae,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 3] = [GeneratorKind::St, GeneratorKind::Pw, GeneratorKind::Vae];

    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::St => "st",
            GeneratorKind::Pw => "pw",
            GeneratorKind::Vae => "vae",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "st" => Ok(GeneratorKind::St),
            "pw" => Ok(GeneratorKind::Pw),
            "vae" => Ok(GeneratorKind::Vae),
            other => Err(Error::invalid(format!("unknown generator kind '{other}' (expected st, pw or vae)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    /// Visits per series, at times 0, 1, ..., periods - 1.
    pub periods: usize,
    pub n_series: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_series == 0 {
            return Err(Error::invalid("n_series must be >= 1"));
        }
        let min = if self.kind == GeneratorKind::St { 1 } else { 2 };
        if self.periods < min {
            return Err(Error::invalid(format!("{} generator needs at least {min} visits, got {}", self.kind, self.periods)));
        }
        Ok(())
    }

    fn series_id(&self, index: usize) -> String {
        format!("{}-{index:06}", self.kind)
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            source: format!("generator:{}", self.kind),
            seed: Some(self.seed),
            spec: serde_json::to_value(self).expect("plain struct serializes"),
        }
    }
}

/// Open-interval truncated standard normal on (0, 1).
fn unit_truncated_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let v = truncated_normal(rng, 0.0, 1.0, 0.0, 1.0);
        if v > 0.0 && v < 1.0 {
            return v;
        }
    }
}

fn lognormal<R: Rng>(rng: &mut R) -> f64 {
    LogNormal::new(0.0, 1.0).expect("valid parameters").sample(rng)
}

pub fn sample_st_params_with<R: Rng>(rng: &mut R) -> CarParams {
    let beta: f64 = StandardNormal.sample(rng);
    let tau2 = lognormal(rng);
    let eta2 = lognormal(rng);
    let rho = unit_truncated_normal(rng);
    let psi = unit_truncated_normal(rng);
    CarParams { beta, tau2, eta2, rho, psi }
}

/// beta ~ N(0, 1); tau2, eta2 ~ LogNormal(0, 1); rho, psi ~ N(0, 1) on (0, 1).
pub fn sample_st_params(seed: u64) -> CarParams {
    sample_st_params_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Straight lines with Gaussian scatter, one per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPaths {
    pub intercepts: Vec<f64>,
    pub slopes: Vec<f64>,
    pub variances: Vec<f64>,
}

impl LinearPaths {
    /// intercept ~ N(centre, 1), slope ~ N(0, 1), variance ~ LogNormal(0, 1).
    pub fn sample<R: Rng>(rng: &mut R, centres: &[f64]) -> Self {
        let mut p = LinearPaths { intercepts: Vec::new(), slopes: Vec::new(), variances: Vec::new() };
        for &c in centres {
            let a: f64 = StandardNormal.sample(rng);
            p.intercepts.push(c + a);
            p.slopes.push(StandardNormal.sample(rng));
            p.variances.push(lognormal(rng));
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.intercepts.len();
        if self.slopes.len() != n || self.variances.len() != n {
            return Err(Error::shape("LinearPaths", n, format!("{} slopes / {} variances", self.slopes.len(), self.variances.len())));
        }
        if self.variances.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("path variances must be finite and >= 0"));
        }
        Ok(())
    }

    /// intercept + slope * t + N(0, variance) per coordinate.
    pub fn draw<R: Rng>(&self, t: f64, rng: &mut R) -> Vec<f64> {
        (0..self.intercepts.len())
            .map(|k| {
                let e: f64 = StandardNormal.sample(rng);
                self.intercepts[k] + self.slopes[k] * t + self.variances[k].sqrt() * e
            })
            .collect()
    }
}

fn visit_times(periods: usize) -> Vec<f64> {
    (0..periods).map(|t| t as f64).collect()
}

fn st_series(spec: &GeneratorSpec, w: &AdjacencyMatrix, index: usize) -> Result<Series> {
    let seed = derive_seed(spec.seed, index as u64);
    let params = sample_st_params(seed);
    let sim = simulate_car_st(&params, w, spec.periods, derive_seed(seed, 1))?;
    let mut s = Series::new(spec.series_id(index), visit_times(spec.periods), sim.x)?;
    s.truth = Some(Truth::St(params));
    Ok(s)
}

/// Visits of one series of independent per-location lines.
pub fn pw_visits(paths: &LinearPaths, periods: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    paths.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..periods).map(|t| paths.draw(t as f64, &mut rng)).collect())
}

fn pw_series(spec: &GeneratorSpec, index: usize) -> Result<Series> {
    let seed = derive_seed(spec.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths = LinearPaths::sample(&mut rng, &[0.0; N_LOCATIONS]);
    let visits = pw_visits(&paths, spec.periods, derive_seed(seed, 1))?;
    let mut s = Series::new(spec.series_id(index), visit_times(spec.periods), visits)?;
    s.truth = Some(Truth::Pw { intercepts: paths.intercepts, slopes: paths.slopes, variances: paths.variances });
    Ok(s)
}

/// Decibel visits obtained by decoding the latent points of `paths`.
pub fn vae_visits(model: &VaeModel, paths: &LinearPaths, periods: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    paths.validate()?;
    if paths.intercepts.len() != model.latent_dim() {
        return Err(Error::shape("latent paths", model.latent_dim(), paths.intercepts.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codes: Vec<LatentCode> = (0..periods).map(|t| LatentCode(paths.draw(t as f64, &mut rng))).collect();
    Ok(model.decode_batch(&codes)?.iter().map(|f| denormalize(f, &model.bounds)).collect())
}

fn class_means(model: &VaeModel) -> Result<&[Vec<f64>]> {
    match &model.class_means {
        Some(cm) if cm.len() == ClassLabel::ALL.len() => Ok(cm),
        Some(cm) => Err(Error::invalid(format!("model carries {} class means, expected 3", cm.len()))),
        None => Err(Error::invalid("the vae generator needs a model with class-mean latent codes")),
    }
}

fn vae_series(spec: &GeneratorSpec, model: &VaeModel, index: usize) -> Result<Series> {
    let means = class_means(model)?;
    let seed = derive_seed(spec.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label = ClassLabel::ALL[rng.gen_range(0..ClassLabel::ALL.len())];
    let paths = LinearPaths::sample(&mut rng, &means[label.index()]);
    let visits = vae_visits(model, &paths, spec.periods, derive_seed(seed, 1))?;
    let mut s = Series::new(spec.series_id(index), visit_times(spec.periods), visits)?;
    s.label = Some(label);
    s.truth = Some(Truth::Vae { intercepts: paths.intercepts, slopes: paths.slopes, variances: paths.variances });
    Ok(s)
}

/// Series `index` of the dataset described by `spec`, regenerated alone.
pub fn generate_series(spec: &GeneratorSpec, model: Option<&VaeModel>, index: usize) -> Result<Series> {
    spec.validate()?;
    match spec.kind {
        GeneratorKind::St => st_series(spec, &build_adjacency(&Mask::visual_field_24_2())?, index),
        GeneratorKind::Pw => pw_series(spec, index),
        GeneratorKind::Vae => vae_series(spec, model.ok_or_else(|| Error::invalid("the vae generator needs a trained model"))?, index),
    }
}

/// Dataset of `spec.n_series` independent series. For the vae kind a
/// model with class means is required.
pub fn generate_dataset(spec: &GeneratorSpec, model: Option<&VaeModel>) -> Result<Dataset> {
    spec.validate()?;
    let mask = Mask::visual_field_24_2();
    let series: Vec<Series> = match spec.kind {
        GeneratorKind::St => {
            let w = build_adjacency(&mask)?;
            (0..spec.n_series).into_par_iter().map(|i| st_series(spec, &w, i)).collect::<Result<_>>()?
        }
        GeneratorKind::Pw => (0..spec.n_series).into_par_iter().map(|i| pw_series(spec, i)).collect::<Result<_>>()?,
        GeneratorKind::Vae => {
            let model = model.ok_or_else(|| Error::invalid("the vae generator needs a trained model"))?;
            class_means(model)?;
            (0..spec.n_series).into_par_iter().map(|i| vae_series(spec, model, i)).collect::<Result<_>>()?
        }
    };
    Dataset::new(mask, spec.provenance(), series)
}

pub fn generate_st_dataset(spec: &GeneratorSpec) -> Result<Dataset> {
    expect_kind(spec, GeneratorKind::St)?;
    generate_dataset(spec, None)
}

pub fn generate_pw_dataset(spec: &GeneratorSpec) -> Result<Dataset> {
    expect_kind(spec, GeneratorKind::Pw)?;
    generate_dataset(spec, None)
}

pub fn generate_vae_dataset(spec: &GeneratorSpec, model: &VaeModel) -> Result<Dataset> {
    expect_kind(spec, GeneratorKind::Vae)?;
    generate_dataset(spec, Some(model))
}

fn expect_kind(spec: &GeneratorSpec, kind: GeneratorKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::invalid(format!("expected a {kind} spec, got {}", spec.kind)));
    }
    Ok(())
}

/// Mean latent code per class, with classes assigned by tertiles of the
/// mean decibel value of each field: the lowest third is glaucoma, the
/// middle suspect and the highest healthy.
pub fn class_means_by_severity(model: &VaeModel, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
    let mut visits: Vec<(f64, &Vec<f64>)> = dataset
        .series
        .iter()
        .flat_map(|s| s.visits.iter())
        .map(|v| (v.iter().sum::<f64>() / v.len() as f64, v))
        .collect();
    if visits.len() < 3 {
        return Err(Error::invalid("need at least 3 fields to form severity tertiles"));
    }
    visits.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = visits.len();
    let k = model.latent_dim();
    let mut means = vec![vec![0.0; k]; 3];
    for (class, tertile) in [ClassLabel::Glaucoma, ClassLabel::Suspect, ClassLabel::Healthy].into_iter().zip(0..3) {
        let lo = tertile * n / 3;
        let hi = (tertile + 1) * n / 3;
        let fields = visits[lo..hi]
            .iter()
            .map(|(_, v)| crate::field::pad_and_normalize_clamped(v, &model.mask, &model.bounds))
            .collect::<Result<Vec<_>>>()?;
        let codes = model.encode_batch(&fields)?;
        let m = &mut means[class.index()];
        for c in &codes {
            for (a, z) in m.iter_mut().zip(c.as_slice()) {
                *a += z / codes.len() as f64;
            }
        }
    }
    Ok(means)
}
