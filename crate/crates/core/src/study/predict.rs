use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{bootstrap_generator, fit_vae, Progress, StudyConfig, VaeRecipe};
use crate::car::{build_adjacency, forecast_st, gibbs_fit, McmcConfig};
use crate::data::{save_dataset, split_patients, ClassLabel, Dataset, Series};
use crate::error::{Error, Result};
use crate::forecast::{pw_fit_predict, two_stage_predict, write_prediction_records, PredictionRecord};
use crate::generators::{generate_dataset, GeneratorSpec};
use crate::metrics::mae;
use crate::report::svg::{heatmaps, Heatmap};
use crate::report::{csv_num, csv_text};
use crate::util::{derive_seed, write_atomic};
use crate::vae::{save_model, VaeModel};

pub const PREDICT_METHODS: [&str; 3] = ["VAE", "ST", "PW"];

/// Whether a series with `len` visits enters cell (base, horizon): visit
/// base + horizon must exist.
pub fn eligible(len: usize, base: usize, horizon: usize) -> bool {
    len >= base + horizon
}

/// MAE of one method on one series in one cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictRow {
    pub series_id: String,
    pub label: Option<ClassLabel>,
    pub base: usize,
    pub horizon: usize,
    pub method: String,
    pub mae: Option<f64>,
    pub error: Option<String>,
}

/// Mean per-series MAE of one method over one (group, base, horizon) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictCell {
    /// "overall" or a class label.
    pub group: String,
    pub base: usize,
    pub horizon: usize,
    pub method: String,
    pub n_eligible: usize,
    pub n_ok: usize,
    /// Empty cells carry no value.
    pub mae: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct PredictReport {
    pub bases: Vec<usize>,
    pub horizons: Vec<usize>,
    pub rows: Vec<PredictRow>,
    /// Exported predictions per base visit count.
    pub predictions: Vec<(usize, Vec<PredictionRecord>)>,
}

fn groups() -> Vec<(String, Option<ClassLabel>)> {
    let mut g = vec![("overall".to_string(), None)];
    g.extend(ClassLabel::ALL.iter().map(|&l| (l.to_string(), Some(l))));
    g
}

impl PredictReport {
    /// Cells for every group, base, horizon and method, in that order.
    pub fn cells(&self) -> Vec<PredictCell> {
        let mut out = Vec::new();
        for (group, label) in groups() {
            for &b in &self.bases {
                for &j in &self.horizons {
                    for m in PREDICT_METHODS {
                        let rows: Vec<&PredictRow> = self
                            .rows
                            .iter()
                            .filter(|r| r.base == b && r.horizon == j && r.method == m && (label.is_none() || r.label == label))
                            .collect();
                        let ok: Vec<f64> = rows.iter().filter_map(|r| r.mae).collect();
                        out.push(PredictCell {
                            group: group.clone(),
                            base: b,
                            horizon: j,
                            method: m.to_string(),
                            n_eligible: rows.len(),
                            n_ok: ok.len(),
                            mae: (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64),
                        });
                    }
                }
            }
        }
        out
    }

    pub fn cell(&self, group: &str, base: usize, horizon: usize, method: &str) -> Option<PredictCell> {
        self.cells()
            .into_iter()
            .find(|c| c.group == group && c.base == base && c.horizon == horizon && c.method == method)
    }

    pub fn grid_csv(&self) -> String {
        let mut s = String::from("group,base_visits,horizon,method,n_eligible,n_ok,mae\n");
        for c in self.cells() {
            let _ = writeln!(s, "{},{},{},{},{},{},{}", c.group, c.base, c.horizon, c.method, c.n_eligible, c.n_ok, csv_num(c.mae));
        }
        s
    }

    pub fn series_csv(&self) -> String {
        let mut s = String::from("series_id,label,base_visits,horizon,method,mae,error\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                csv_text(&r.series_id),
                r.label.map(|l| l.as_str()).unwrap_or(""),
                r.base,
                r.horizon,
                r.method,
                csv_num(r.mae),
                csv_text(r.error.as_deref().unwrap_or(""))
            );
        }
        s
    }

    /// One heatmap per method (rows = base visits, columns = horizon) on a
    /// shared colour range.
    pub fn heatmap_svg(&self, group: &str) -> String {
        let cells: Vec<PredictCell> = self.cells().into_iter().filter(|c| c.group == group).collect();
        let mats: Vec<Vec<Vec<Option<f64>>>> = PREDICT_METHODS
            .iter()
            .map(|m| {
                self.bases
                    .iter()
                    .map(|&b| {
                        self.horizons
                            .iter()
                            .map(|&j| cells.iter().find(|c| c.method == *m && c.base == b && c.horizon == j).and_then(|c| c.mae))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let vals: Vec<f64> = mats.iter().flatten().flatten().flatten().copied().collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo.is_finite() { (lo, hi.max(lo + 1e-9)) } else { (0.0, 1.0) };
        let maps: Vec<Heatmap<'_>> = PREDICT_METHODS
            .iter()
            .zip(&mats)
            .map(|(m, v)| Heatmap {
                title: m.to_string(),
                values: v,
                row_labels: self.bases.iter().map(|b| format!("from {b}")).collect(),
                col_labels: self.horizons.iter().map(|j| format!("+{j}")).collect(),
            })
            .collect();
        heatmaps(&format!("MAE (dB) by base visits and horizon, {group}"), &maps, lo, hi)
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut files = vec![
            ("predict_grid.csv".to_string(), self.grid_csv().into_bytes()),
            ("predict_series.csv".to_string(), self.series_csv().into_bytes()),
        ];
        for (g, _) in groups() {
            files.push((format!("predict_mae_{g}.svg"), self.heatmap_svg(&g).into_bytes()));
        }
        for (b, recs) in &self.predictions {
            let mut buf = Vec::new();
            write_prediction_records(recs, &mut buf)?;
            files.push((format!("predictions_base{b}.csv"), buf));
        }
        for (name, bytes) in &files {
            write_atomic(&dir.join(name), bytes)?;
        }
        Ok(files.into_iter().map(|(n, _)| n).collect())
    }
}

struct SeriesResult {
    rows: Vec<PredictRow>,
    records: Vec<(usize, PredictionRecord)>,
}

fn predict_series(
    model: &VaeModel,
    s: &Series,
    bases: &[usize],
    horizons: &[usize],
    w: &crate::car::AdjacencyMatrix,
    mcmc: &McmcConfig,
    seed: u64,
) -> SeriesResult {
    let mut res = SeriesResult { rows: Vec::new(), records: Vec::new() };
    for &b in bases {
        let hs: Vec<usize> = horizons.iter().copied().filter(|&j| eligible(s.len(), b, j)).collect();
        if hs.is_empty() {
            continue;
        }
        let fit = s.truncated(b);
        let times: Vec<f64> = hs.iter().map(|&j| s.times[b + j - 1]).collect();
        let st_seed = derive_seed(seed, b as u64);
        let preds: [Result<Vec<Vec<f64>>>; 3] = [
            two_stage_predict(model, &fit, &times).map(|f| f.predictions),
            gibbs_fit(&fit.visits, w, &McmcConfig { seed: st_seed, ..*mcmc }).and_then(|post| {
                hs.iter().map(|&j| forecast_st(&post, j, derive_seed(st_seed, j as u64)).map(|f| f.mean)).collect()
            }),
            pw_fit_predict(&fit, &times).map(|f| f.predictions),
        ];
        for (m, p) in PREDICT_METHODS.iter().zip(preds) {
            for (k, &j) in hs.iter().enumerate() {
                let (value, error) = match &p {
                    Ok(p) => match mae(&p[k], &s.visits[b + j - 1]) {
                        Ok(v) => (Some(v), None),
                        Err(e) => (None, Some(e.to_string())),
                    },
                    Err(e) => (None, Some(e.to_string())),
                };
                res.rows.push(PredictRow {
                    series_id: s.id.clone(),
                    label: s.label,
                    base: b,
                    horizon: j,
                    method: m.to_string(),
                    mae: value,
                    error,
                });
                if let Ok(p) = &p {
                    res.records.extend(p[k].iter().enumerate().map(|(loc, &v)| {
                        (
                            b,
                            PredictionRecord {
                                series_id: s.id.clone(),
                                horizon_time: times[k],
                                location_id: loc,
                                predicted_value: v,
                                method: m.to_string(),
                            },
                        )
                    }));
                }
            }
        }
    }
    res
}

/// Predicts visit b + j from the first b visits of every eligible test
/// series with the two-stage VAE, ST and PW methods.
pub fn prediction_protocol(
    model: &VaeModel,
    test: &Dataset,
    bases: &[usize],
    horizons: &[usize],
    mcmc: &McmcConfig,
    seed: u64,
) -> Result<PredictReport> {
    if bases.iter().any(|&b| b < 2) || horizons.contains(&0) {
        return Err(Error::invalid("base visits must be >= 2 and horizons >= 1"));
    }
    mcmc.validate()?;
    let w = build_adjacency(&test.mask)?;
    let per_series: Vec<SeriesResult> = test
        .series
        .par_iter()
        .enumerate()
        .map(|(i, s)| predict_series(model, s, bases, horizons, &w, mcmc, derive_seed(seed, i as u64)))
        .collect();
    let mut rows = Vec::new();
    let mut predictions: Vec<(usize, Vec<PredictionRecord>)> = bases.iter().map(|&b| (b, Vec::new())).collect();
    for r in per_series {
        rows.extend(r.rows);
        for (b, rec) in r.records {
            let slot = predictions.iter_mut().find(|(x, _)| *x == b).expect("base listed");
            slot.1.push(rec);
        }
    }
    Ok(PredictReport { bases: bases.to_vec(), horizons: horizons.to_vec(), rows, predictions })
}

/// Everything produced by [`run_prediction_study`].
pub struct PredictStudyOutput {
    pub report: PredictReport,
    pub model: VaeModel,
    pub generator_model: Option<VaeModel>,
    pub test: Dataset,
}

impl PredictStudyOutput {
    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        let mut files = self.report.write(dir)?;
        save_model(&self.model, &dir.join("vae.stvae"))?;
        files.push("vae.stvae".into());
        if let Some(g) = &self.generator_model {
            save_model(g, &dir.join("generator_vae.stvae"))?;
            files.push("generator_vae.stvae".into());
        }
        save_dataset(&self.test, &dir.join("test.jsonl"))?;
        files.push("test.jsonl".into());
        Ok(files)
    }
}

/// Simulates series of varying length, splits them by patient, trains a VAE
/// on the training split and runs the protocol on the test split.
pub fn run_prediction_study(cfg: &StudyConfig, progress: Progress<'_>) -> Result<PredictStudyOutput> {
    cfg.validate()?;
    let p = &cfg.predict;
    let generator_model = if p.generator == crate::generators::GeneratorKind::Vae {
        Some(bootstrap_generator(cfg, progress)?)
    } else {
        None
    };
    let spec = GeneratorSpec { kind: p.generator, periods: p.max_visits, n_series: p.n_series, seed: derive_seed(cfg.seed, 0x9E0) };
    progress(&format!("predict: generating {} {} series", p.n_series, p.generator));
    let full = generate_dataset(&spec, generator_model.as_ref())?;
    let len_seed = derive_seed(cfg.seed, 0x9E1);
    let series: Vec<Series> = full
        .series
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let n = ChaCha8Rng::seed_from_u64(derive_seed(len_seed, i as u64)).gen_range(p.min_visits..=p.max_visits);
            s.truncated(n)
        })
        .collect();
    let data = full.subset(series);
    let (train, mut val, test) = split_patients(&data, p.split, derive_seed(cfg.seed, 0x9E2))?;
    let mut train = train;
    if val.is_empty() && train.len() > 1 {
        val.series.push(train.series.pop().expect("non-empty"));
    }
    if test.is_empty() {
        return Err(Error::invalid("the test split is empty; raise predict.n_series"));
    }
    progress(&format!("predict: training VAE on {} series ({} validation)", train.len(), val.len()));
    let mmd = cfg.mmd_config();
    let model = fit_vae(VaeRecipe::from_config(cfg, &mmd), &train, &val, derive_seed(cfg.seed, 0x9E3))?;
    progress(&format!("predict: protocol on {} test series", test.len()));
    let report = prediction_protocol(&model, &test, &p.base_visits, &p.horizons, &cfg.mcmc, derive_seed(cfg.seed, 0x9E4))?;
    Ok(PredictStudyOutput { report, model, generator_model, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eligibility_arithmetic() {
        let cells: Vec<(usize, usize)> =
            [3, 5, 8].iter().flat_map(|&b| (1..=5).map(move |j| (b, j))).filter(|&(b, j)| eligible(5, b, j)).collect();
        assert_eq!(cells, vec![(3, 1), (3, 2)]);
        assert!(eligible(13, 8, 5));
        assert!(!eligible(12, 8, 5));
    }
}
