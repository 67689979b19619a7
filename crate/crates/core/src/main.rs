use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use stvae::car::{build_adjacency, forecast_st, gibbs_fit, write_posterior_csv, McmcConfig};
use stvae::data::{load_dataset, save_dataset, Dataset, Provenance, Series};
use stvae::error::{Error, Result};
use stvae::forecast::{pw_fit_predict, two_stage_predict, write_prediction_records, PredictionRecord};
use stvae::generators::{generate_dataset, GeneratorKind, GeneratorSpec};
use stvae::metrics::{average_matrices, empirical_correlations, CorrelationMatrix};
use stvae::report::svg::{heatmaps, Heatmap};
use stvae::report::{csv_num, Manifest};
use stvae::study::{
    fit_vae_holdout, mean_spatial_correlation, run_prediction_study, run_simulation_study, smoothing_diagnostic,
    StudyConfig, VaeRecipe,
};
use stvae::util::{derive_seed, write_atomic};
use stvae::vae::{load_model, save_model, LatentCode, VaeModel};

#[derive(Parser)]
#[command(name = "stvae", version, about = "Spatiotemporal field forecasting: two-stage MMD-VAE, CAR-AR and pointwise baselines")]
struct Cli {
    /// Print progress lines to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Vae,
    St,
    Pw,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated dataset.
    Simulate {
        #[arg(long)]
        kind: GeneratorKind,
        #[arg(long)]
        n: usize,
        /// Visits per series.
        #[arg(long)]
        t: usize,
        #[arg(long)]
        seed: u64,
        /// Generator model with class means (vae kind only).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a VAE on every visit of a dataset.
    TrainVae {
        #[arg(long)]
        data: PathBuf,
        /// Study config supplying arch, train, mmd and seed sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Latent code of every visit, as CSV.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a latent code CSV (as written by encode) into a dataset.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the CAR-AR model to every series; writes posterior CSVs into a directory.
    FitSt {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-location least-squares lines for every series.
    FitPw {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forecast every series some visits past its last one.
    Predict {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Visits ahead, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        horizons: Vec<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generator x method comparison grid.
    StudySim {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Base-visit x horizon prediction protocol.
    StudyPredict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Empirical spatial and temporal correlations; with a model, also of the reconstructions.
    Correlations {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<StudyConfig> {
    match path {
        Some(p) => StudyConfig::load(p),
        None => Ok(StudyConfig::default()),
    }
}

fn config_json(cfg: &StudyConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn file_manifest(command: &str, out: &Path, config: serde_json::Value, seeds: serde_json::Value) -> Result<()> {
    let mut m = Manifest::new(command, config, seeds);
    m.outputs.push(out.display().to_string());
    m.write(&sidecar(out))
}

fn dir_manifest(command: &str, dir: &Path, files: Vec<String>, config: serde_json::Value, seeds: serde_json::Value) -> Result<()> {
    let mut m = Manifest::new(command, config, seeds);
    m.outputs = files;
    m.write(&dir.join("manifest.json"))
}

fn matrix_csv(m: &CorrelationMatrix) -> String {
    let mut s = String::new();
    for row in m {
        let cells: Vec<String> = row.iter().map(|v| csv_num(*v)).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

fn mean_step(s: &Series) -> f64 {
    if s.len() < 2 {
        1.0
    } else {
        (s.times[s.len() - 1] - s.times[0]) / (s.len() - 1) as f64
    }
}

fn run(cli: Cli) -> Result<()> {
    let verbose = cli.verbose;
    let progress = move |msg: &str| {
        if verbose {
            eprintln!("progress: {msg}");
        }
    };
    match cli.command {
        Command::Simulate { kind, n, t, seed, model, out } => {
            let spec = GeneratorSpec { kind, periods: t, n_series: n, seed };
            let model = model.as_deref().map(load_model).transpose()?;
            let data = generate_dataset(&spec, model.as_ref())?;
            save_dataset(&data, &out)?;
            file_manifest("simulate", &out, json!(spec), json!({ "master": seed }))
        }
        Command::TrainVae { data, config, model_out } => {
            let cfg = load_config(config.as_deref())?;
            let d = load_dataset(&data)?;
            let mmd = cfg.mmd_config();
            let recipe = VaeRecipe::from_config(&cfg, &mmd);
            progress(&format!("training on {} series", d.len()));
            let model = fit_vae_holdout(recipe, &d, cfg.sim.validation_fraction, cfg.seed)?;
            save_model(&model, &model_out)?;
            file_manifest("train-vae", &model_out, config_json(&cfg), json!({ "master": cfg.seed }))
        }
        Command::Encode { model, input, out } => {
            let m = load_model(&model)?;
            let d = load_dataset(&input)?;
            let k = m.latent_dim();
            let mut s = String::from("series_id,visit_index,time");
            for i in 0..k {
                let _ = write!(s, ",z{i}");
            }
            s.push('\n');
            for series in &d.series {
                let codes = m.encode_batch(&series.fields(&m.mask, &m.bounds)?)?;
                for (i, (c, t)) in codes.iter().zip(&series.times).enumerate() {
                    let z: Vec<String> = c.as_slice().iter().map(f64::to_string).collect();
                    let _ = writeln!(s, "{},{i},{t},{}", series.id, z.join(","));
                }
            }
            write_atomic(&out, s.as_bytes())?;
            file_manifest("encode", &out, json!({ "model": model, "in": input }), json!(null))
        }
        Command::Decode { model, input, out } => {
            let m = load_model(&model)?;
            let text = std::fs::read_to_string(&input)?;
            let k = m.latent_dim();
            let mut series: Vec<Series> = Vec::new();
            for (no, line) in text.lines().enumerate().skip(1) {
                if line.trim().is_empty() {
                    continue;
                }
                let f: Vec<&str> = line.split(',').collect();
                let bad = |msg: String| Error::Format { line: Some(no + 1), msg };
                if f.len() != 3 + k {
                    return Err(bad(format!("expected {} columns, found {}", 3 + k, f.len())));
                }
                let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("'{s}': {e}")));
                let t = num(f[2])?;
                let z = f[3..].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
                let field = m.decode(&LatentCode::new(z)?)?;
                let values = stvae::field::denormalize(&field, &m.bounds);
                match series.last_mut() {
                    Some(s) if s.id == f[0] => {
                        s.times.push(t);
                        s.visits.push(values);
                    }
                    _ => series.push(Series::new(f[0], vec![t], vec![values])?),
                }
            }
            let mut p = Provenance::new("decode");
            p.spec = json!({ "model": model, "in": input });
            let mut d = Dataset::new(m.mask.clone(), p, series)?;
            d.bounds = m.bounds;
            save_dataset(&d, &out)?;
            file_manifest("decode", &out, json!({ "model": model, "in": input }), json!(null))
        }
        Command::FitSt { data, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let d = load_dataset(&data)?;
            let w = build_adjacency(&d.mask)?;
            let fits = d
                .series
                .par_iter()
                .enumerate()
                .map(|(i, s)| {
                    let post = gibbs_fit(&s.visits, &w, &McmcConfig { seed: derive_seed(cfg.seed, i as u64), ..cfg.mcmc })?;
                    let mut buf = Vec::new();
                    write_posterior_csv(&post, &mut buf)?;
                    Ok((post, buf))
                })
                .collect::<Result<Vec<_>>>()?;
            std::fs::create_dir_all(&out)?;
            let mut files = Vec::new();
            let mut summary = String::from("series_id,beta,beta_lo,beta_hi,tau2,eta2,rho,psi,rho_acceptance\n");
            for (s, (post, buf)) in d.series.iter().zip(&fits) {
                let name = format!("posterior_{}.csv", s.id);
                write_atomic(&out.join(&name), buf)?;
                files.push(name);
                let p = post.mean_params();
                let (lo, hi) = post.credible_interval(|p| p.beta, 0.95);
                let _ = writeln!(
                    summary,
                    "{},{},{lo},{hi},{},{},{},{},{}",
                    s.id, p.beta, p.tau2, p.eta2, p.rho, p.psi, post.rho_acceptance
                );
            }
            write_atomic(&out.join("st_summary.csv"), summary.as_bytes())?;
            files.push("st_summary.csv".into());
            dir_manifest("fit-st", &out, files, config_json(&cfg), json!({ "master": cfg.seed, "per_series": "derive_seed(master, index)" }))
        }
        Command::FitPw { data, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let d = load_dataset(&data)?;
            let mut s = String::from("series_id,location_id,slope,intercept,residual_se,n\n");
            for series in &d.series {
                let f = pw_fit_predict(series, &[])?;
                for (loc, fit) in f.fits.iter().enumerate() {
                    let _ = writeln!(s, "{},{loc},{},{},{},{}", series.id, fit.slope, fit.intercept, fit.residual_se, fit.n);
                }
            }
            write_atomic(&out, s.as_bytes())?;
            file_manifest("fit-pw", &out, config_json(&cfg), json!(null))
        }
        Command::Predict { method, model, data, horizons, config, out } => {
            if horizons.contains(&0) {
                return Err(Error::InvalidArgument("horizons must be >= 1".into()));
            }
            let cfg = load_config(config.as_deref())?;
            let d = load_dataset(&data)?;
            let vae: Option<VaeModel> = match (method, model) {
                (Method::Vae, Some(p)) => Some(load_model(&p)?),
                (Method::Vae, None) => return Err(Error::InvalidArgument("--method vae needs --model".into())),
                _ => None,
            };
            let w = build_adjacency(&d.mask)?;
            let name = match method {
                Method::Vae => "VAE",
                Method::St => "ST",
                Method::Pw => "PW",
            };
            let per_series = d
                .series
                .par_iter()
                .enumerate()
                .map(|(i, s)| {
                    let last = s.times[s.len() - 1];
                    let step = mean_step(s);
                    let times: Vec<f64> = horizons.iter().map(|&h| last + step * h as f64).collect();
                    let preds: Vec<Vec<f64>> = match method {
                        Method::Vae => two_stage_predict(vae.as_ref().expect("checked"), s, &times)?.predictions,
                        Method::Pw => pw_fit_predict(s, &times)?.predictions,
                        Method::St => {
                            let seed = derive_seed(cfg.seed, i as u64);
                            let post = gibbs_fit(&s.visits, &w, &McmcConfig { seed, ..cfg.mcmc })?;
                            horizons
                                .iter()
                                .map(|&h| forecast_st(&post, h, derive_seed(seed, h as u64)).map(|f| f.mean))
                                .collect::<Result<_>>()?
                        }
                    };
                    Ok(times
                        .iter()
                        .zip(preds)
                        .flat_map(|(&t, p)| {
                            p.into_iter().enumerate().map(move |(loc, v)| PredictionRecord {
                                series_id: s.id.clone(),
                                horizon_time: t,
                                location_id: loc,
                                predicted_value: v,
                                method: name.to_string(),
                            })
                        })
                        .collect::<Vec<_>>())
                })
                .collect::<Result<Vec<_>>>()?;
            let records: Vec<PredictionRecord> = per_series.into_iter().flatten().collect();
            let mut buf = Vec::new();
            write_prediction_records(&records, &mut buf)?;
            write_atomic(&out, &buf)?;
            file_manifest("predict", &out, json!({ "method": name, "horizons": horizons, "study": config_json(&cfg) }), json!({ "master": cfg.seed }))
        }
        Command::StudySim { config, out } => {
            let cfg = StudyConfig::load(&config)?;
            let report = run_simulation_study(&cfg, &progress)?;
            let files = report.write(&out)?;
            dir_manifest("study-sim", &out, files, config_json(&cfg), json!({ "master": cfg.seed }))
        }
        Command::StudyPredict { config, out } => {
            let cfg = StudyConfig::load(&config)?;
            let output = run_prediction_study(&cfg, &progress)?;
            let files = output.write(&out)?;
            dir_manifest("study-predict", &out, files, config_json(&cfg), json!({ "master": cfg.seed }))
        }
        Command::Correlations { data, model, out } => {
            let d = load_dataset(&data)?;
            let model = model.as_deref().map(load_model).transpose()?;
            let raw = mean_spatial_correlation(&d.series)?;
            let mut files = vec![("spatial_raw.csv".to_string(), matrix_csv(&raw))];
            let equal_len = d.series.windows(2).all(|w| w[0].len() == w[1].len());
            if equal_len {
                let temporal = d.series.iter().map(|s| empirical_correlations(s).map(|c| c.temporal)).collect::<Result<Vec<_>>>()?;
                files.push(("temporal_raw.csv".into(), matrix_csv(&average_matrices(&temporal))));
            }
            let svg = match &model {
                Some(m) => {
                    let r = smoothing_diagnostic(m, &d)?;
                    files.push(("spatial_decoded.csv".into(), matrix_csv(&r.decoded)));
                    files.push(("smoothing_summary.csv".into(), r.summary_csv()));
                    r.heatmap_svg()
                }
                None => heatmaps(
                    "Spatial correlation across visits",
                    &[Heatmap { title: "raw".into(), values: &raw, row_labels: vec![], col_labels: vec![] }],
                    -1.0,
                    1.0,
                ),
            };
            files.push(("correlations.svg".into(), svg));
            std::fs::create_dir_all(&out)?;
            for (name, text) in &files {
                write_atomic(&out.join(name), text.as_bytes())?;
            }
            dir_manifest("correlations", &out, files.into_iter().map(|(n, _)| n).collect(), json!({ "data": data }), json!(null))
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("STVAE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
