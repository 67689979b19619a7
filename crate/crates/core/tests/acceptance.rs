//! Acceptance suite: one line per criterion, nonzero exit if any gated
//! criterion fails. Oracles are implemented here, independently of the
//! library code they check.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use stvae::car::{build_adjacency, gibbs_fit, leroux_precision, log_det_precision, simulate_car_st, AdjacencyMatrix, CarParams, LerouxSpectrum, McmcConfig};
use stvae::data::{Dataset, Provenance};
use stvae::field::{Bounds, Mask, N_LOCATIONS};
use stvae::forecast::pw_fit_predict;
use stvae::generators::{generate_dataset, GeneratorKind, GeneratorSpec};
use stvae::study::{
    bootstrap_generator, eligible, prediction_protocol, quiet, run_prediction_study, run_simulation_study, smoothing_diagnostic,
    StudyConfig, PREDICT_METHODS,
};
use stvae::vae::{mmd, vae_loss_gradient, vae_loss_grids, MmdConfig, VaeArch, VaeModel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn within(elapsed: Duration, limit_s: u64) -> (bool, String) {
    (elapsed.as_secs() < limit_s, format!("{:.1}s (limit {limit_s}s)", elapsed.as_secs_f64()))
}

// 1. Central differences on vae_loss for random small models.
fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = (0.0f64, 0usize, 0usize);
    let mut checked = 0usize;
    for model_idx in 0..25 {
        let side = [4, 8][model_idx % 2];
        let arch = VaeArch { latent_dim: rng.gen_range(1..=4), grid_side: side, channels: [rng.gen_range(1..=4), rng.gen_range(1..=4)] };
        let base = VaeModel::new(arch, Bounds::new(0.0).unwrap(), Mask::full(side, side), model_idx as u64).unwrap();
        let params: Vec<f64> = base.params().iter().map(|_| rng.gen_range(-0.5..0.5)).collect();
        let model = VaeModel::from_params(arch, params.clone(), base.bounds, base.mask.clone()).unwrap();
        let n = rng.gen_range(2..=4);
        let grids: Vec<f64> = (0..n * side * side).map(|_| rng.gen_range(0.0..1.0)).collect();
        let prior: Vec<f64> = (0..n * arch.latent_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let cfg = MmdConfig::for_latent_dim(arch.latent_dim);
        let (_, analytic) = vae_loss_gradient(&model, &grids, n, &prior, &cfg).unwrap();
        let loss = |p: &[f64]| {
            let m = VaeModel::from_params(arch, p.to_vec(), model.bounds, model.mask.clone()).unwrap();
            vae_loss_grids(&m, &grids, n, &prior, &cfg).unwrap().total
        };
        let h = 1e-6;
        let mut p = params.clone();
        for i in 0..p.len() {
            let orig = p[i];
            p[i] = orig + h;
            let up = loss(&p);
            p[i] = orig - h;
            let down = loss(&p);
            p[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            // relative error, with a 1e-4 floor on the scale for near-zero gradients
            let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-4);
            if rel > worst.0 {
                worst = (rel, model_idx, i);
            }
            checked += 1;
        }
    }
    let (fast, t) = within(start.elapsed(), 120);
    outcome(
        worst.0 < 1e-4 && fast,
        format!("{checked} partials over 25 models, max relative error {:.2e} (model {}, param {}), {t}", worst.0, worst.1, worst.2),
    )
}

// 2. MMD exact zero and two-sample separation.
fn mmd_properties() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let cfg = MmdConfig { bandwidth: 4.0, ..MmdConfig::for_latent_dim(8) };
    let mut nonzero = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..40);
        let k = rng.gen_range(1..9);
        let s: Vec<f64> = (0..n * k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let c = MmdConfig { bandwidth: k as f64 / 2.0, ..cfg };
        if mmd(&s, &s, k, &c).unwrap() != 0.0 {
            nonzero += 1;
        }
    }
    let draw = |rng: &mut ChaCha8Rng, shift: f64| -> Vec<f64> { (0..500 * 8).map(|_| { let e: f64 = StandardNormal.sample(rng); shift + e }).collect() };
    let a = draw(&mut rng, 0.0);
    let b = draw(&mut rng, 0.0);
    let c = draw(&mut rng, 5.0);
    let same = mmd(&a, &b, 8, &cfg).unwrap();
    let shifted = mmd(&a, &c, 8, &cfg).unwrap();
    let (fast, t) = within(start.elapsed(), 60);
    outcome(
        nonzero == 0 && same < 0.05 && shifted > 10.0 * same && fast,
        format!("mmd(S,S) != 0 in {nonzero}/100 sets; same-distribution {same:.4} (< 0.05); shifted {shifted:.4} ({:.0}x); {t}", shifted / same),
    )
}

fn random_adjacency(rng: &mut ChaCha8Rng) -> AdjacencyMatrix {
    let m = rng.gen_range(2..40);
    let p = rng.gen_range(0.05..0.6);
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            if rng.gen_bool(p) {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    for i in 0..m {
        if (0..m).all(|j| a[(i, j)] == 0.0) {
            let j = (i + 1 + rng.gen_range(0..m - 1)) % m;
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
    }
    AdjacencyMatrix::from_dense(a).unwrap()
}

// 3. Leroux precision algebra against dense linear algebra.
fn leroux_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut asym, mut eig_gap, mut row, mut logdet) = (0.0f64, f64::INFINITY, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let w = random_adjacency(&mut rng);
        let rho = rng.gen_range(0.0..0.999);
        let q = leroux_precision(&w, rho).unwrap();
        let m = q.nrows();
        asym = asym.max((&q - q.transpose()).abs().max());
        let min_eig = SymmetricEigen::new(q.clone()).eigenvalues.min();
        eig_gap = eig_gap.min(min_eig - (1.0 - rho));
        let ones = q.clone() * nalgebra::DVector::from_element(m, 1.0);
        row = row.max(ones.iter().map(|v| (v - (1.0 - rho)).abs()).fold(0.0, f64::max));
        let dense = q.clone().lu().determinant().ln();
        let ours = log_det_precision(LerouxSpectrum::new(&w).eigenvalues(), rho).unwrap();
        logdet = logdet.max((dense - ours).abs());
    }
    outcome(
        asym <= 1e-12 && eig_gap >= -1e-10 && row <= 1e-12 && logdet <= 1e-10,
        format!("200 pairs: max |Q - Q^T| {asym:.1e}; min(lambda_min - (1 - rho)) {eig_gap:.2e}; max |Q1 - (1-rho)1| {row:.1e}; max log-det error {logdet:.1e}"),
    )
}

// 4. Stationary covariance of phi_1 and lag-1 independence when psi = 0.
fn simulator_fidelity() -> Outcome {
    let start = Instant::now();
    let mask = Mask::visual_field_24_2();
    let w = build_adjacency(&mask).unwrap();
    let m = w.len();
    let p = CarParams { beta: 0.5, tau2: 1.5, eta2: 0.3, rho: 0.8, psi: 0.6 };
    let reps = 10_000;
    let phis: Vec<Vec<f64>> = (0..reps).into_par_iter().map(|r| simulate_car_st(&p, &w, 8, 10_000 + r as u64).unwrap().phi[0].clone()).collect();
    let target = leroux_precision(&w, p.rho).unwrap().try_inverse().unwrap() * p.tau2;
    let (mut exceed, mut max_z) = (0usize, 0.0f64);
    for i in 0..m {
        for j in i..m {
            // known zero mean: estimate E[phi_i phi_j] and its standard error
            let prods: Vec<f64> = phis.iter().map(|v| v[i] * v[j]).collect();
            let mean = prods.iter().sum::<f64>() / reps as f64;
            let var = prods.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let z = (mean - target[(i, j)]).abs() / (var / reps as f64).sqrt();
            max_z = max_z.max(z);
            if z > 3.0 {
                exceed += 1;
            }
        }
    }
    let entries = m * (m + 1) / 2;
    let p0 = CarParams { psi: 0.0, ..p };
    let pairs: Vec<(f64, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let sim = simulate_car_st(&p0, &w, 8, 50_000 + r as u64).unwrap();
            let mut acc = (0.0, 0.0, 0.0);
            for t in 1..8 {
                for i in 0..m {
                    let (a, b) = (sim.phi[t - 1][i], sim.phi[t][i]);
                    acc.0 += a * b;
                    acc.1 += a * a;
                    acc.2 += b * b;
                }
            }
            acc
        })
        .collect();
    let s = pairs.iter().fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let lag1 = s.0 / (s.1 * s.2).sqrt();
    let (fast, t) = within(start.elapsed(), 300);
    // P(|Z| > 3) for a standard normal; an exact simulator still exceeds that
    // often, so the count is reported against its null expectation
    let null_expected = entries as f64 * 0.002_699_796;
    outcome(
        exceed == 0 && lag1.abs() < 0.03 && fast,
        format!(
            "covariance: {exceed}/{entries} entries beyond 3 MC standard errors (max z {max_z:.2}; {null_expected:.1} expected by chance for an exact simulator); psi=0 lag-1 r = {lag1:.4}; {t}"
        ),
    )
}

// 5. Credible interval coverage of the Gibbs sampler.
fn mcmc_recovery() -> Outcome {
    let start = Instant::now();
    let w = build_adjacency(&Mask::visual_field_24_2()).unwrap();
    let truth = CarParams { beta: 0.5, tau2: 1.0, eta2: 0.5, rho: 0.7, psi: 0.6 };
    let covered: Vec<[bool; 3]> = (0..50)
        .into_par_iter()
        .map(|r| {
            let sim = simulate_car_st(&truth, &w, 8, 7_000 + r as u64).unwrap();
            let cfg = McmcConfig { iterations: 5000, burn_in: 2000, seed: 9_000 + r as u64, ..McmcConfig::default() };
            let post = gibbs_fit(&sim.x, &w, &cfg).unwrap();
            let inside = |f: fn(&CarParams) -> f64| {
                let (lo, hi) = post.credible_interval(f, 0.95);
                lo <= f(&truth) && f(&truth) <= hi
            };
            [inside(|p| p.beta), inside(|p| p.psi), inside(|p| p.eta2)]
        })
        .collect();
    let count = |k: usize| covered.iter().filter(|c| c[k]).count();
    let (b, ps, e) = (count(0), count(1), count(2));
    let (fast, t) = within(start.elapsed(), 1800);
    outcome(
        b >= 45 && ps >= 42 && e >= 42 && fast,
        format!("95% interval coverage: beta {b}/50 (>= 45), psi {ps}/50 (>= 42), eta2 {e}/50 (>= 42); {t}"),
    )
}

// 6. PW predictions against an explicit normal-equations solve.
fn pw_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let n = rng.gen_range(2..14);
        let mut t = rng.gen_range(0.0..2.0);
        let times: Vec<f64> = (0..n).map(|_| { t += rng.gen_range(0.1..2.0); t }).collect();
        let visits: Vec<Vec<f64>> = (0..n).map(|_| (0..N_LOCATIONS).map(|_| rng.gen_range(-37.0..10.0)).collect()).collect();
        let s = stvae::data::Series::new(format!("s{i}"), times.clone(), visits.clone()).unwrap();
        let horizons = [t + 0.5, t + 3.0];
        let f = pw_fit_predict(&s, &horizons).unwrap();
        // [n St; St Stt] [a b]' = [Sy Sty]' solved by Cramer's rule in exact
        // rational arithmetic, so the oracle carries no rounding of its own
        let q = |x: f64| BigRational::from_float(x).unwrap();
        let tq: Vec<BigRational> = times.iter().map(|&x| q(x)).collect();
        let nn = BigRational::from_integer(n.into());
        let st: BigRational = tq.iter().sum();
        let stt: BigRational = tq.iter().map(|x| x * x).sum();
        let det = &nn * &stt - &st * &st;
        for l in 0..N_LOCATIONS {
            let yq: Vec<BigRational> = visits.iter().map(|v| q(v[l])).collect();
            let sy: BigRational = yq.iter().sum();
            let sty: BigRational = tq.iter().zip(&yq).map(|(x, y)| x * y).sum();
            let a = (&sy * &stt - &st * &sty) / &det;
            let b = (&nn * &sty - &st * &sy) / &det;
            for (k, &h) in horizons.iter().enumerate() {
                let exact = (&a + &b * q(h)).to_f64().unwrap();
                worst = worst.max((f.predictions[k][l] - exact).abs());
            }
        }
    }
    outcome(worst < 1e-10, format!("1000 series x 52 locations x 2 horizons, max |difference| {worst:.2e}"))
}

// 7. Desk-scale trend replication.
fn trend_replication(study: &Result<(stvae::study::SimReport, Duration), String>) -> (Outcome, Outcome) {
    let (report, elapsed) = match study {
        Ok(r) => r,
        Err(e) => return (outcome(false, format!("study failed: {e}")), outcome(false, "study failed")),
    };
    let med = |g, t, m: &str, mae: bool| report.find_summary(g, t, m).and_then(|s| if mae { s.median_mae } else { s.median_rse });
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    let (vae, pw, st) = (med(GeneratorKind::Vae, 3, "VAE-1k", true), med(GeneratorKind::Vae, 3, "PW", true), med(GeneratorKind::Vae, 3, "ST", true));
    let a = matches!((vae, pw, st), (Some(v), Some(p), Some(s)) if v < p && v < s);
    let mut b = true;
    let mut b_detail = Vec::new();
    for &t in &report.periods {
        let st_rse = med(GeneratorKind::St, t, "ST", false);
        let others: Vec<(String, Option<f64>)> = report.methods.iter().filter(|m| *m != "ST").map(|m| (m.clone(), med(GeneratorKind::St, t, m, false))).collect();
        let ok = st_rse.is_some() && others.iter().all(|(_, v)| matches!((st_rse, v), (Some(s), Some(o)) if s <= *o));
        b &= ok;
        b_detail.push(format!(
            "T={t}: ST {} vs {}",
            fmt(st_rse),
            others.iter().map(|(m, v)| format!("{m} {}", fmt(*v))).collect::<Vec<_>>().join(", ")
        ));
    }
    let (fast, t) = within(*elapsed, 7200);
    let gated = outcome(
        a && b && fast,
        format!(
            "(a) vae data T=3 median MAE: VAE-1k {} vs PW {} vs ST {} -> {}; (b) st data median RSE: {} -> {}; {t}",
            fmt(vae),
            fmt(pw),
            fmt(st),
            if a { "holds" } else { "fails" },
            b_detail.join("; "),
            if b { "holds" } else { "fails" }
        ),
    );
    let (v8, s8) = (med(GeneratorKind::St, 8, "VAE-1k", true), med(GeneratorKind::St, 8, "ST", true));
    let c = matches!((v8, s8), (Some(v), Some(s)) if v <= 1.25 * s);
    let soft = outcome(c, format!("(c) st data T=8 median MAE: VAE-1k {} vs ST {} (target VAE <= 1.25 x ST)", fmt(v8), fmt(s8)));
    (gated, soft)
}

// 8. Fifteen cells and hand-enumerated inclusion counts.
fn protocol_bookkeeping() -> Outcome {
    let cfg = StudyConfig::load(&root().join("configs/smoke.toml")).unwrap();
    let out = match run_prediction_study(&cfg, &|_: &str| {}) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("prediction study failed: {e}")),
    };
    let overall: Vec<_> = out.report.cells().into_iter().filter(|c| c.group == "overall" && c.method == "VAE").collect();
    let fifteen = overall.len() == 15;
    // 20-series fixture of simulated series cut to these lengths
    let lengths = [4, 4, 5, 5, 5, 6, 6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 13, 13];
    // counts of lengths >= base + horizon, enumerated by hand
    let expected: [[usize; 5]; 3] = [[20, 18, 15, 13, 11], [15, 13, 11, 9, 7], [9, 7, 5, 3, 2]];
    let full = generate_dataset(&GeneratorSpec { kind: GeneratorKind::Vae, periods: 13, n_series: 20, seed: 88 }, out.generator_model.as_ref()).unwrap();
    let series = full.series.iter().zip(lengths).map(|(s, n)| s.truncated(n)).collect();
    let fixture = Dataset::new(full.mask.clone(), Provenance::new("fixture"), series).unwrap();
    let mcmc = McmcConfig { iterations: 100, burn_in: 50, ..McmcConfig::default() };
    let report = prediction_protocol(&out.model, &fixture, &[3, 5, 8], &[1, 2, 3, 4, 5], &mcmc, 3).unwrap();
    let mut mismatches = Vec::new();
    for (bi, b) in [3, 5, 8].into_iter().enumerate() {
        for j in 1..=5 {
            for m in PREDICT_METHODS {
                let c = report.cell("overall", b, j, m).unwrap();
                let by_rule = lengths.iter().filter(|&&n| eligible(n, b, j)).count();
                if c.n_eligible != expected[bi][j - 1] || by_rule != expected[bi][j - 1] {
                    mismatches.push(format!("({b},{j},{m}): {} vs {}", c.n_eligible, expected[bi][j - 1]));
                }
            }
        }
    }
    let five_visit = report.rows.iter().filter(|r| r.series_id == fixture.series[2].id).map(|r| (r.base, r.horizon)).collect::<std::collections::BTreeSet<_>>();
    let five_ok = five_visit.into_iter().collect::<Vec<_>>() == vec![(3, 1), (3, 2)];
    let fixture_cells = report.cells().into_iter().filter(|c| c.group == "overall" && c.method == "VAE").count();
    outcome(
        fifteen && fixture_cells == 15 && mismatches.is_empty() && five_ok,
        format!(
            "study emits {} cells per method; fixture: {fixture_cells} cells, {} count mismatches{}; 5-visit series only in (3,1),(3,2): {five_ok}",
            overall.len(),
            mismatches.len(),
            if mismatches.is_empty() { String::new() } else { format!(" {mismatches:?}") }
        ),
    )
}

// 9. Byte-identical study-sim reports from the same config and seed.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = root().join("configs/smoke.toml");
    let mut outs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_stvae"))
            .args(["study-sim", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env("STVAE_THREADS", if k == 0 { "1" } else { "4" })
            .status()
            .unwrap();
        if !status.success() {
            return outcome(false, format!("run {k} exited with {status}"));
        }
        outs.push(out);
    }
    let files = ["sim_long.csv", "sim_summary.csv", "sim_rse.svg", "sim_mae.svg"];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| std::fs::read(outs[0].join(f)).ok() != std::fs::read(outs[1].join(f)).ok())
        .collect();
    outcome(differing.is_empty(), format!("two runs (1 and 4 threads): {} of {} report files differ {differing:?}", differing.len(), files.len()))
}

// 10. Decoded fields are spatially smoother than raw noisy ST fields.
fn smoothing(generator: Option<&VaeModel>) -> Outcome {
    let owned;
    let model = match generator {
        Some(m) => m,
        None => {
            // same generator the desk study bootstraps
            let cfg = StudyConfig::load(&root().join("configs/desk.toml")).unwrap();
            owned = bootstrap_generator(&cfg, &quiet).unwrap();
            &owned
        }
    };
    let data = generate_dataset(&GeneratorSpec { kind: GeneratorKind::St, periods: 8, n_series: 200, seed: 1010 }, None).unwrap();
    let r = smoothing_diagnostic(model, &data).unwrap();
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("smoothing.svg"), r.heatmap_svg()).unwrap();
    std::fs::write(dir.join("smoothing_summary.csv"), r.summary_csv()).unwrap();
    let diff = r.difference();
    outcome(
        diff.is_some_and(|d| d >= 0.05),
        format!(
            "mean |off-diagonal spatial r|: raw {:.3}, decoded {:.3}, difference {:.3} (>= 0.05); heatmaps in {}",
            r.raw_mean.unwrap_or(f64::NAN),
            r.decoded_mean.unwrap_or(f64::NAN),
            diff.unwrap_or(f64::NAN),
            dir.display()
        ),
    )
}

fn report(id: &str, name: &str, o: &Outcome, gated: bool) -> bool {
    let tag = match (o.pass, gated) {
        (true, true) => "PASS",
        (false, true) => "FAIL",
        (true, false) => "PASS (soft)",
        (false, false) => "MISS (soft, not gated)",
    };
    println!("criterion {id:<3} {tag:<22} {name}: {}", o.detail);
    o.pass || !gated
}

fn main() {
    // `cargo test -- --list` and filters: nothing to list
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    // bare arguments select criteria by id, e.g. `-- 1 3 6`
    let only: Vec<&str> = args.iter().map(String::as_str).filter(|a| !a.starts_with('-')).collect();
    let run = |id: &str| only.is_empty() || only.contains(&id);
    println!("acceptance suite");
    let mut ok = true;
    if run("1") {
        ok &= report("1", "gradient correctness", &gradient_check(), true);
    }
    if run("2") {
        ok &= report("2", "MMD properties", &mmd_properties(), true);
    }
    if run("3") {
        ok &= report("3", "Leroux precision", &leroux_checks(), true);
    }
    if run("4") {
        ok &= report("4", "simulator fidelity", &simulator_fidelity(), true);
    }
    if run("5") {
        ok &= report("5", "MCMC recovery", &mcmc_recovery(), true);
    }
    if run("6") {
        ok &= report("6", "OLS/PW oracle", &pw_oracle(), true);
    }
    let mut desk = None;
    if run("7") {
        let start = Instant::now();
        let study = StudyConfig::load(&root().join("configs/desk.toml"))
            .and_then(|cfg| run_simulation_study(&cfg, &|_: &str| {}))
            .map(|r| (r, start.elapsed()))
            .map_err(|e| e.to_string());
        let (seven, seven_c) = trend_replication(&study);
        ok &= report("7", "trend replication", &seven, true);
        report("7c", "trend replication", &seven_c, false);
        desk = Some(study);
    }
    if run("8") {
        ok &= report("8", "protocol bookkeeping", &protocol_bookkeeping(), true);
    }
    if run("9") {
        ok &= report("9", "determinism", &determinism(), true);
    }
    if run("10") {
        let generator = desk.as_ref().and_then(|d| d.as_ref().ok()).and_then(|(r, _)| r.generator_model.as_ref());
        ok &= report("10", "smoothing diagnostic", &smoothing(generator), true);
    }
    if !ok {
        println!("acceptance: at least one gated criterion failed");
        std::process::exit(1);
    }
    println!("acceptance: all gated criteria passed");
}
