use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::simulate::{cholesky, draw_precision_normal};
use super::{leroux_precision, AdjacencyMatrix, CarParams, LerouxSpectrum};
use crate::error::{Error, Result};

// Priors: eta2, tau2 ~ IG(1, 0.1); rho, psi ~ U(0, 1); beta ~ N(0, 1000).
const IG_SHAPE: f64 = 1.0;
const IG_SCALE: f64 = 0.1;
const BETA_PRIOR_VAR: f64 = 1000.0;

const RHO_TARGET_ACCEPTANCE: f64 = 0.4;
const RHO_ADAPT_WINDOW: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Initial random-walk step on logit(rho); adapted during burn-in.
    pub rho_step: f64,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 2000,
            thinning: 1,
            rho_step: 0.5,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations || self.thinning == 0 || !(self.rho_step > 0.0) {
            return Err(Error::invalid(format!(
                "need burn_in < iterations, thinning >= 1, rho_step > 0: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thinning
    }
}

/// Retained post-burn-in draws.
#[derive(Clone, Debug)]
pub struct CarPosterior {
    pub iterations: Vec<usize>,
    pub samples: Vec<CarParams>,
    /// Latent fields per sample, flattened [t * m + i].
    phi: Vec<Vec<f64>>,
    periods: usize,
    spectrum: LerouxSpectrum,
    /// Post-burn-in acceptance rate of the rho Metropolis step.
    pub rho_acceptance: f64,
    pub rho_step: f64,
}

impl CarPosterior {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn locations(&self) -> usize {
        self.spectrum.len()
    }

    pub fn spectrum(&self) -> &LerouxSpectrum {
        &self.spectrum
    }

    /// Latent field of sample `s` at period `t` (0-based).
    pub fn phi(&self, s: usize, t: usize) -> &[f64] {
        let m = self.locations();
        &self.phi[s][t * m..(t + 1) * m]
    }

    pub fn mean_params(&self) -> CarParams {
        let n = self.len() as f64;
        let mut acc = CarParams { beta: 0.0, tau2: 0.0, eta2: 0.0, rho: 0.0, psi: 0.0 };
        for p in &self.samples {
            acc.beta += p.beta / n;
            acc.tau2 += p.tau2 / n;
            acc.eta2 += p.eta2 / n;
            acc.rho += p.rho / n;
            acc.psi += p.psi / n;
        }
        acc
    }

    /// Central credible interval of a scalar summary of the parameters.
    pub fn credible_interval(&self, f: impl Fn(&CarParams) -> f64, level: f64) -> (f64, f64) {
        let mut v: Vec<f64> = self.samples.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        let a = (1.0 - level) / 2.0;
        (quantile_sorted(&v, a), quantile_sorted(&v, 1.0 - a))
    }

    /// Posterior mean of beta + phi_t, the de-noised fit at period `t`.
    pub fn fitted_mean(&self, t: usize) -> Vec<f64> {
        let m = self.locations();
        let n = self.len() as f64;
        let mut out = vec![0.0; m];
        for (s, p) in self.samples.iter().enumerate() {
            for (o, &ph) in out.iter_mut().zip(self.phi(s, t)) {
                *o += (p.beta + ph) / n;
            }
        }
        out
    }
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn inverse_gamma<R: Rng>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0 / scale).expect("positive shape and scale").sample(rng);
    1.0 / g
}

/// Standard normal restricted to [a, b].
fn truncated_standard_normal<R: Rng>(rng: &mut R, a: f64, b: f64) -> f64 {
    if b < 0.0 {
        return -truncated_standard_normal(rng, -b, -a);
    }
    if a <= 0.0 {
        if b - a >= 2.0 {
            loop {
                let z: f64 = StandardNormal.sample(rng);
                if (a..=b).contains(&z) {
                    return z;
                }
            }
        }
        loop {
            let z = rng.gen_range(a..=b);
            if rng.gen::<f64>() <= (-0.5 * z * z).exp() {
                return z;
            }
        }
    }
    // 0 < a <= b: upper tail.
    if (b - a) * (a + b) / 2.0 < 1.0 {
        loop {
            let z = rng.gen_range(a..=b);
            if rng.gen::<f64>() <= (0.5 * (a * a - z * z)).exp() {
                return z;
            }
        }
    }
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let u: f64 = rng.gen();
        let z = a - (1.0 - u).ln() / alpha;
        if z <= b && rng.gen::<f64>() <= (-0.5 * (z - alpha).powi(2)).exp() {
            return z;
        }
    }
}

pub(crate) fn truncated_normal<R: Rng>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let z = truncated_standard_normal(rng, (lo - mean) / sd, (hi - mean) / sd);
    (mean + sd * z).clamp(lo, hi)
}

struct State {
    beta: f64,
    tau2: f64,
    eta2: f64,
    rho: f64,
    psi: f64,
    phi: Vec<DVector<f64>>,
}

impl State {
    /// Innovations r_1 = phi_1, r_t = phi_t - psi phi_{t-1}.
    fn innovation(&self, t: usize) -> DVector<f64> {
        if t == 0 {
            self.phi[0].clone()
        } else {
            &self.phi[t] - &self.phi[t - 1] * self.psi
        }
    }
}

/// Fits the CAR-AR(1) model to `observations[t][i]` (T >= 2 periods over the
/// m locations of `w`) by Gibbs sampling with a Metropolis step for rho.
pub fn gibbs_fit(observations: &[Vec<f64>], w: &AdjacencyMatrix, cfg: &McmcConfig) -> Result<CarPosterior> {
    cfg.validate()?;
    let periods = observations.len();
    if periods < 2 {
        return Err(Error::invalid(format!(
            "CAR-AR fit needs at least 2 periods (psi is unidentifiable), got {periods}"
        )));
    }
    let m = w.len();
    if let Some(t) = observations.iter().position(|o| o.len() != m) {
        return Err(Error::shape("gibbs_fit", format!("{m} locations"), format!("{} at period {t}", observations[t].len())));
    }
    if observations.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gibbs_fit observations".into()));
    }
    let spectrum = LerouxSpectrum::new(w);
    let xs: Vec<DVector<f64>> = observations.iter().map(|o| DVector::from_column_slice(o)).collect();
    let n_obs = (m * periods) as f64;
    let grand_mean = xs.iter().map(|x| x.sum()).sum::<f64>() / n_obs;
    let var = xs
        .iter()
        .flat_map(|x| x.iter())
        .map(|v| (v - grand_mean).powi(2))
        .sum::<f64>()
        / n_obs;
    let half_var = (var / 2.0).max(1e-3);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut st = State {
        beta: grand_mean,
        tau2: half_var,
        eta2: half_var,
        rho: 0.5,
        psi: 0.5,
        phi: vec![DVector::zeros(m); periods],
    };
    let mut step = cfg.rho_step;
    let mut window_accepts = 0usize;
    let mut post_accepts = 0usize;

    let capacity = cfg.retained();
    let mut post = CarPosterior {
        iterations: Vec::with_capacity(capacity),
        samples: Vec::with_capacity(capacity),
        phi: Vec::with_capacity(capacity),
        periods,
        spectrum: spectrum.clone(),
        rho_acceptance: 0.0,
        rho_step: step,
    };

    for iter in 0..cfg.iterations {
        update_phi(&mut st, &xs, w, &mut rng).map_err(|e| {
            Error::Numerical(format!("sweep {iter}: {e}"))
        })?;
        update_beta(&mut st, &xs, &mut rng);
        translate_level(&mut st, m, &mut rng);
        update_eta2(&mut st, &xs, &mut rng);
        update_tau2(&mut st, &spectrum, &mut rng);
        update_psi(&mut st, &spectrum, &mut rng);
        let accepted = update_rho(&mut st, &spectrum, step, &mut rng)?;

        if iter < cfg.burn_in {
            window_accepts += accepted as usize;
            if (iter + 1) % RHO_ADAPT_WINDOW == 0 {
                let rate = window_accepts as f64 / RHO_ADAPT_WINDOW as f64;
                step *= (rate - RHO_TARGET_ACCEPTANCE).exp();
                step = step.clamp(1e-3, 20.0);
                window_accepts = 0;
            }
        } else {
            post_accepts += accepted as usize;
            if (iter - cfg.burn_in + 1) % cfg.thinning == 0 {
                let params = CarParams { beta: st.beta, tau2: st.tau2, eta2: st.eta2, rho: st.rho, psi: st.psi };
                post.iterations.push(iter);
                post.samples.push(params);
                post.phi.push(st.phi.iter().flat_map(|p| p.iter().copied()).collect());
            }
        }
    }
    post.rho_acceptance = post_accepts as f64 / (cfg.iterations - cfg.burn_in) as f64;
    post.rho_step = step;
    Ok(post)
}

fn update_phi<R: Rng>(st: &mut State, xs: &[DVector<f64>], w: &AdjacencyMatrix, rng: &mut R) -> Result<()> {
    let periods = xs.len();
    let m = w.len();
    let q = leroux_precision(w, st.rho)?;
    let conditional = |c: f64| -> DMatrix<f64> {
        let mut p = &q * (c / st.tau2);
        for i in 0..m {
            p[(i, i)] += 1.0 / st.eta2;
        }
        p
    };
    let inner = cholesky(conditional(1.0 + st.psi * st.psi), "the phi conditional precision")?;
    let last = cholesky(conditional(1.0), "the final-period phi conditional precision")?;
    for t in 0..periods {
        let chol = if t + 1 < periods { &inner } else { &last };
        let mut neighbours_in_time = DVector::zeros(m);
        if t > 0 {
            neighbours_in_time += &st.phi[t - 1];
        }
        if t + 1 < periods {
            neighbours_in_time += &st.phi[t + 1];
        }
        let b = xs[t].add_scalar(-st.beta) / st.eta2 + (&q * neighbours_in_time) * (st.psi / st.tau2);
        let mean = chol.solve(&b);
        st.phi[t] = mean + draw_precision_normal(chol, rng);
    }
    Ok(())
}

fn update_beta<R: Rng>(st: &mut State, xs: &[DVector<f64>], rng: &mut R) {
    let n = xs.iter().map(|x| x.len()).sum::<usize>() as f64;
    let resid: f64 = xs.iter().zip(&st.phi).map(|(x, p)| (x - p).sum()).sum();
    let prec = n / st.eta2 + 1.0 / BETA_PRIOR_VAR;
    let mean = resid / st.eta2 / prec;
    let z: f64 = StandardNormal.sample(rng);
    st.beta = mean + z / prec.sqrt();
}

/// Exact draw along the direction (beta + d, phi_t - d 1), which leaves the
/// likelihood unchanged and moves the confounded level in one step.
fn translate_level<R: Rng>(st: &mut State, m: usize, rng: &mut R) {
    let periods = st.phi.len();
    let one_minus_rho = 1.0 - st.rho;
    let one_minus_psi = 1.0 - st.psi;
    let mut lin = st.innovation(0).sum();
    for t in 1..periods {
        lin += one_minus_psi * st.innovation(t).sum();
    }
    let scale = m as f64 * one_minus_rho / st.tau2;
    let prec = 1.0 / BETA_PRIOR_VAR + scale * (1.0 + (periods - 1) as f64 * one_minus_psi * one_minus_psi);
    let b = -st.beta / BETA_PRIOR_VAR + one_minus_rho / st.tau2 * lin;
    let z: f64 = StandardNormal.sample(rng);
    let delta = b / prec + z / prec.sqrt();
    st.beta += delta;
    for p in st.phi.iter_mut() {
        p.add_scalar_mut(-delta);
    }
}

fn update_eta2<R: Rng>(st: &mut State, xs: &[DVector<f64>], rng: &mut R) {
    let n = xs.iter().map(|x| x.len()).sum::<usize>() as f64;
    let sse: f64 = xs
        .iter()
        .zip(&st.phi)
        .map(|(x, p)| x.iter().zip(p.iter()).map(|(a, b)| (a - st.beta - b).powi(2)).sum::<f64>())
        .sum();
    st.eta2 = inverse_gamma(rng, IG_SHAPE + n / 2.0, IG_SCALE + sse / 2.0);
}

fn innovation_parts(st: &State, spectrum: &LerouxSpectrum) -> (f64, f64) {
    (0..st.phi.len())
        .map(|t| {
            let r = st.innovation(t);
            spectrum.quad_parts(&r, &r)
        })
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
}

fn update_tau2<R: Rng>(st: &mut State, spectrum: &LerouxSpectrum, rng: &mut R) {
    let (lap, sq) = innovation_parts(st, spectrum);
    let quad = st.rho * lap + (1.0 - st.rho) * sq;
    let n = (spectrum.len() * st.phi.len()) as f64;
    st.tau2 = inverse_gamma(rng, IG_SHAPE + n / 2.0, IG_SCALE + quad / 2.0);
}

fn update_psi<R: Rng>(st: &mut State, spectrum: &LerouxSpectrum, rng: &mut R) {
    let (mut num, mut den) = (0.0, 0.0);
    for t in 1..st.phi.len() {
        let q_prev = spectrum.apply(&st.phi[t - 1], st.rho);
        num += q_prev.dot(&st.phi[t]);
        den += q_prev.dot(&st.phi[t - 1]);
    }
    let mean = num / den;
    let sd = (st.tau2 / den).sqrt();
    st.psi = truncated_normal(rng, mean, sd, 0.0, 1.0);
    // keep the open interval
    st.psi = st.psi.clamp(f64::EPSILON, 1.0 - f64::EPSILON);
}

fn rho_log_target(rho: f64, periods: f64, lap: f64, sq: f64, tau2: f64, spectrum: &LerouxSpectrum) -> Result<f64> {
    let quad = rho * lap + (1.0 - rho) * sq;
    Ok(0.5 * periods * spectrum.log_det(rho)? - quad / (2.0 * tau2) + rho.ln() + (1.0 - rho).ln())
}

fn update_rho<R: Rng>(st: &mut State, spectrum: &LerouxSpectrum, step: f64, rng: &mut R) -> Result<bool> {
    let (lap, sq) = innovation_parts(st, spectrum);
    let periods = st.phi.len() as f64;
    let logit = (st.rho / (1.0 - st.rho)).ln();
    let z: f64 = StandardNormal.sample(rng);
    let proposal = 1.0 / (1.0 + (-(logit + step * z)).exp());
    if !(proposal > 0.0 && proposal < 1.0) {
        return Ok(false);
    }
    let current = rho_log_target(st.rho, periods, lap, sq, st.tau2, spectrum)?;
    let candidate = rho_log_target(proposal, periods, lap, sq, st.tau2, spectrum)?;
    let u: f64 = rng.gen();
    if u.ln() < candidate - current {
        st.rho = proposal;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Writes retained draws as CSV with header `iteration,beta,tau2,eta2,rho,psi`.
pub fn write_posterior_csv<W: Write>(posterior: &CarPosterior, mut w: W) -> Result<()> {
    writeln!(w, "iteration,beta,tau2,eta2,rho,psi")?;
    for (it, p) in posterior.iterations.iter().zip(&posterior.samples) {
        writeln!(w, "{it},{},{},{},{},{}", p.beta, p.tau2, p.eta2, p.rho, p.psi)?;
    }
    Ok(())
}
