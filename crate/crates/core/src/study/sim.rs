use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{bootstrap_generator, fit_vae_holdout, Progress, StudyConfig, VaeRecipe};
use crate::car::{build_adjacency, forecast_st, gibbs_fit, AdjacencyMatrix, McmcConfig};
use crate::data::{Dataset, Series};
use crate::error::{Error, Result};
use crate::forecast::{pw_fit_predict, two_stage_predict};
use crate::generators::{generate_dataset, GeneratorKind, GeneratorSpec};
use crate::metrics::{mae, residual_standard_error};
use crate::report::svg::{boxplot_grid, quantile, BoxPanel};
use crate::report::{csv_num, csv_text};
use crate::util::{derive_seed, write_atomic};
use crate::vae::{save_model, VaeModel};

/// "VAE-1k" for multiples of a thousand, "VAE-500" otherwise.
pub fn method_name(train_size: usize) -> String {
    if train_size >= 1000 && train_size % 1000 == 0 {
        format!("VAE-{}k", train_size / 1000)
    } else {
        format!("VAE-{train_size}")
    }
}

/// One method applied to one test series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimRow {
    pub generator: GeneratorKind,
    pub periods: usize,
    pub method: String,
    /// Index within the cell's test set; regenerate with the test seed.
    pub series_index: usize,
    pub series_id: String,
    pub test_seed: u64,
    pub rse: Option<f64>,
    pub mae: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimSummary {
    pub generator: GeneratorKind,
    pub periods: usize,
    pub method: String,
    pub n: usize,
    pub n_failed: usize,
    pub median_rse: Option<f64>,
    pub median_mae: Option<f64>,
    pub mean_rse: Option<f64>,
    pub mean_mae: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct SimReport {
    pub rows: Vec<SimRow>,
    pub methods: Vec<String>,
    pub generators: Vec<GeneratorKind>,
    pub periods: Vec<usize>,
    /// Generator model behind the vae cells, when any ran.
    pub generator_model: Option<VaeModel>,
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(quantile(v, 0.5))
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl SimReport {
    fn cell_rows<'a>(&'a self, g: GeneratorKind, t: usize, method: &'a str) -> impl Iterator<Item = &'a SimRow> + 'a {
        self.rows.iter().filter(move |r| r.generator == g && r.periods == t && r.method == method)
    }

    pub fn summary(&self) -> Vec<SimSummary> {
        let mut out = Vec::new();
        for &g in &self.generators {
            for &t in &self.periods {
                for m in &self.methods {
                    let rows: Vec<&SimRow> = self.cell_rows(g, t, m).collect();
                    let mut rse: Vec<f64> = rows.iter().filter_map(|r| r.rse).collect();
                    let mut maes: Vec<f64> = rows.iter().filter_map(|r| r.mae).collect();
                    out.push(SimSummary {
                        generator: g,
                        periods: t,
                        method: m.clone(),
                        n: rows.len(),
                        n_failed: rows.iter().filter(|r| r.error.is_some()).count(),
                        mean_rse: mean(&rse),
                        mean_mae: mean(&maes),
                        median_rse: median(&mut rse),
                        median_mae: median(&mut maes),
                    });
                }
            }
        }
        out
    }

    pub fn find_summary(&self, g: GeneratorKind, t: usize, method: &str) -> Option<SimSummary> {
        self.summary().into_iter().find(|s| s.generator == g && s.periods == t && s.method == method)
    }

    pub fn long_csv(&self) -> String {
        let mut s = String::from("generator,periods,method,series_index,series_id,test_seed,rse,mae,error\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.generator,
                r.periods,
                r.method,
                r.series_index,
                csv_text(&r.series_id),
                r.test_seed,
                csv_num(r.rse),
                csv_num(r.mae),
                csv_text(r.error.as_deref().unwrap_or(""))
            );
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("generator,periods,method,n,n_failed,median_rse,median_mae,mean_rse,mean_mae\n");
        for r in self.summary() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.generator,
                r.periods,
                r.method,
                r.n,
                r.n_failed,
                csv_num(r.median_rse),
                csv_num(r.median_mae),
                csv_num(r.mean_rse),
                csv_num(r.mean_mae)
            );
        }
        s
    }

    /// Boxplot grid of one metric, rows = generator, columns = visits.
    pub fn boxplot_svg(&self, metric: &str) -> String {
        let pick = |r: &SimRow| if metric == "rse" { r.rse } else { r.mae };
        let panels: Vec<Vec<BoxPanel>> = self
            .generators
            .iter()
            .map(|&g| {
                self.periods
                    .iter()
                    .map(|&t| BoxPanel {
                        groups: self
                            .methods
                            .iter()
                            .map(|m| (m.clone(), self.cell_rows(g, t, m).filter_map(pick).collect()))
                            .collect(),
                    })
                    .collect()
            })
            .collect();
        let rows: Vec<String> = self.generators.iter().map(|g| format!("{g} data")).collect();
        let cols: Vec<String> = self.periods.iter().map(|t| format!("T = {t}")).collect();
        boxplot_grid(&format!("{} by generator and series length", metric.to_uppercase()), &rows, &cols, &panels, metric)
    }

    /// Writes CSVs, SVGs and the generator model into `dir`; returns the
    /// file names written.
    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut files = vec![
            ("sim_long.csv".to_string(), self.long_csv().into_bytes()),
            ("sim_summary.csv".to_string(), self.summary_csv().into_bytes()),
            ("sim_rse.svg".to_string(), self.boxplot_svg("rse").into_bytes()),
            ("sim_mae.svg".to_string(), self.boxplot_svg("mae").into_bytes()),
        ];
        for (name, bytes) in &files {
            write_atomic(&dir.join(name), bytes)?;
        }
        if let Some(m) = &self.generator_model {
            save_model(m, &dir.join("generator_vae.stvae"))?;
            files.push(("generator_vae.stvae".into(), Vec::new()));
        }
        Ok(files.into_iter().map(|(n, _)| n).collect())
    }
}

/// Seed of the test set of cell (generator, periods).
pub(crate) fn cell_seed(master: u64, g: GeneratorKind, periods: usize) -> u64 {
    let gi = GeneratorKind::ALL.iter().position(|&k| k == g).expect("known kind") as u64;
    derive_seed(derive_seed(master, 0x5100 + gi), periods as u64)
}

struct Outcome {
    rse: Option<f64>,
    mae: Option<f64>,
    error: Option<String>,
}

impl Outcome {
    fn from(r: Result<(f64, f64)>) -> Self {
        match r {
            Ok((rse, mae)) => Outcome { rse: Some(rse), mae: Some(mae), error: None },
            Err(e) => Outcome { rse: None, mae: None, error: Some(e.to_string()) },
        }
    }

    fn failed(msg: &str) -> Self {
        Outcome { rse: None, mae: None, error: Some(msg.to_string()) }
    }
}

fn run_st(series: &Series, fit: &Series, w: &AdjacencyMatrix, h: usize, mcmc: &McmcConfig, seed: u64) -> Result<(f64, f64)> {
    let post = gibbs_fit(&fit.visits, w, &McmcConfig { seed, ..*mcmc })?;
    let residuals: Vec<f64> = fit
        .visits
        .iter()
        .enumerate()
        .flat_map(|(t, x)| x.iter().zip(post.fitted_mean(t)).map(|(a, b)| a - b).collect::<Vec<_>>())
        .collect();
    let rse = residual_standard_error(&residuals, 0)?;
    let fc = forecast_st(&post, h, derive_seed(seed, 1))?;
    Ok((rse, mae(&fc.mean, &series.visits[fit.len() - 1 + h])?))
}

fn run_pw(series: &Series, fit: &Series, h: usize) -> Result<(f64, f64)> {
    let target = fit.len() - 1 + h;
    let f = pw_fit_predict(fit, &[series.times[target]])?;
    let dof = 2 * f.fits.len();
    let rse = residual_standard_error(&f.residuals(fit), dof)?;
    Ok((rse, mae(&f.predictions[0], &series.visits[target])?))
}

fn run_vae(model: &VaeModel, series: &Series, fit: &Series, h: usize) -> Result<(f64, f64)> {
    let target = fit.len() - 1 + h;
    let f = two_stage_predict(model, fit, &[series.times[target]])?;
    let rse = residual_standard_error(&f.residuals(model, fit)?, 2 * model.latent_dim())?;
    Ok((rse, mae(&f.predictions[0], &series.visits[target])?))
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    cfg: &StudyConfig,
    recipe: VaeRecipe<'_>,
    generator: Option<&VaeModel>,
    w: &AdjacencyMatrix,
    g: GeneratorKind,
    t: usize,
    methods: &[String],
    progress: Progress<'_>,
) -> Vec<SimRow> {
    let h = cfg.sim.horizon;
    let seed = cell_seed(cfg.seed, g, t);
    let test_spec = GeneratorSpec { kind: g, periods: t + h, n_series: cfg.sim.test_series, seed: derive_seed(seed, 0) };
    let row = |method: &str, i: usize, id: &str, o: Outcome| SimRow {
        generator: g,
        periods: t,
        method: method.to_string(),
        series_index: i,
        series_id: id.to_string(),
        test_seed: test_spec.seed,
        rse: o.rse,
        mae: o.mae,
        error: o.error,
    };
    let test: Dataset = match generate_dataset(&test_spec, generator) {
        Ok(d) => d,
        Err(e) => {
            let msg = format!("test data: {e}");
            return methods.iter().map(|m| row(m, 0, "", Outcome::failed(&msg))).collect();
        }
    };

    let vaes: Vec<std::result::Result<VaeModel, String>> = cfg
        .sim
        .vae_train_sizes
        .iter()
        .map(|&n| {
            progress(&format!("cell {g}/T={t}: training {} on {n} series", method_name(n)));
            let spec = GeneratorSpec { kind: g, periods: t, n_series: n, seed: derive_seed(seed, 1000 + n as u64) };
            generate_dataset(&spec, generator)
                .and_then(|d| fit_vae_holdout(recipe, &d, cfg.sim.validation_fraction, derive_seed(seed, 2000 + n as u64)))
                .map_err(|e| format!("VAE training: {e}"))
        })
        .collect();

    progress(&format!("cell {g}/T={t}: fitting {} test series", test.len()));
    let per_series: Vec<Vec<Outcome>> = test
        .series
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let fit = s.truncated(t);
            let mcmc_seed = derive_seed(derive_seed(test_spec.seed, i as u64), 0x57);
            let mut out = vec![
                Outcome::from(run_st(s, &fit, w, h, &cfg.mcmc, mcmc_seed)),
                Outcome::from(run_pw(s, &fit, h)),
            ];
            for v in &vaes {
                out.push(match v {
                    Ok(model) => Outcome::from(run_vae(model, s, &fit, h)),
                    Err(msg) => Outcome::failed(msg),
                });
            }
            out
        })
        .collect();

    let mut rows = Vec::with_capacity(methods.len() * test.len());
    let mut per_series: Vec<std::vec::IntoIter<Outcome>> = per_series.into_iter().map(Vec::into_iter).collect();
    let mut by_method: Vec<Vec<SimRow>> = vec![Vec::new(); methods.len()];
    for (i, outs) in per_series.iter_mut().enumerate() {
        for (k, o) in outs.enumerate() {
            by_method[k].push(row(&methods[k], i, &test.series[i].id, o));
        }
    }
    for r in by_method {
        rows.extend(r);
    }
    rows
}

/// Runs every (generator, visits) cell. Failures are recorded on the
/// affected rows and the run continues.
pub fn run_simulation_study(cfg: &StudyConfig, progress: Progress<'_>) -> Result<SimReport> {
    cfg.validate()?;
    let mut methods = vec!["ST".to_string(), "PW".to_string()];
    methods.extend(cfg.sim.vae_train_sizes.iter().map(|&n| method_name(n)));
    let mut seen = std::collections::HashSet::new();
    if let Some(d) = methods.iter().find(|m| !seen.insert(m.as_str())) {
        return Err(Error::invalid(format!("duplicate method {d}; check sim.vae_train_sizes")));
    }
    let generator_model = if cfg.sim.generators.contains(&GeneratorKind::Vae) {
        Some(bootstrap_generator(cfg, progress)?)
    } else {
        None
    };
    let mmd = cfg.mmd_config();
    let recipe = VaeRecipe::from_config(cfg, &mmd);
    let w = build_adjacency(&crate::field::Mask::visual_field_24_2())?;
    let mut rows = Vec::new();
    for &g in &cfg.sim.generators {
        for &t in &cfg.sim.periods {
            let model = if g == GeneratorKind::Vae { generator_model.as_ref() } else { None };
            rows.extend(run_cell(cfg, recipe, model, &w, g, t, &methods, progress));
        }
    }
    Ok(SimReport { rows, methods, generators: cfg.sim.generators.clone(), periods: cfg.sim.periods.clone(), generator_model })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names() {
        assert_eq!(method_name(500), "VAE-500");
        assert_eq!(method_name(1000), "VAE-1k");
        assert_eq!(method_name(10_000), "VAE-10k");
        assert_eq!(method_name(1500), "VAE-1500");
    }

    #[test]
    fn summary_and_csv_bookkeeping() {
        let mk = |m: &str, i: usize, mae: Option<f64>| SimRow {
            generator: GeneratorKind::Pw,
            periods: 3,
            method: m.into(),
            series_index: i,
            series_id: format!("pw-{i:06}"),
            test_seed: 5,
            rse: mae.map(|v| v * 2.0),
            mae,
            error: mae.is_none().then(|| "boom, \"quoted\"".to_string()),
        };
        let report = SimReport {
            rows: vec![mk("PW", 0, Some(1.0)), mk("PW", 1, Some(3.0)), mk("PW", 2, None), mk("ST", 0, Some(0.5))],
            methods: vec!["ST".into(), "PW".into()],
            generators: vec![GeneratorKind::Pw],
            periods: vec![3],
            generator_model: None,
        };
        let s = report.find_summary(GeneratorKind::Pw, 3, "PW").unwrap();
        assert_eq!((s.n, s.n_failed), (3, 1));
        assert_eq!(s.median_mae, Some(2.0));
        assert_eq!(s.median_rse, Some(4.0));
        let csv = report.long_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains("\"boom, \"\"quoted\"\"\""));
        assert_eq!(report.summary_csv().lines().count(), 3);
    }
}
