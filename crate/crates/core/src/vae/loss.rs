use serde::{Deserialize, Serialize};

use super::mmd::{mmd, mmd_with_grad, MmdConfig};
use super::model::{LatentCode, VaeModel};
use crate::error::{Error, Result};
use crate::field::Field;

/// Objective value split into its two terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub reconstruction: f64,
    /// Unweighted MMD; `total` carries lambda times this.
    pub regularization: f64,
}

/// Batch mean of the summed squared difference over every grid cell.
pub fn reconstruction_loss(batch: &[Field], reconstructions: &[Field]) -> Result<f64> {
    if batch.len() != reconstructions.len() || batch.is_empty() {
        return Err(Error::shape("reconstruction_loss batch", batch.len(), reconstructions.len()));
    }
    let mut total = 0.0;
    for (i, (a, b)) in batch.iter().zip(reconstructions).enumerate() {
        if a.grid().len() != b.grid().len() {
            return Err(Error::shape("reconstruction_loss grid", format!("{} at item {i}", a.grid().len()), b.grid().len()));
        }
        total += sq_dist(a.grid(), b.grid());
    }
    Ok(total / batch.len() as f64)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_batch(model: &VaeModel, grids: &[f64], n: usize, prior: &[f64]) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!("the VAE objective needs a batch of at least 2, got {n}")));
    }
    let want = n * model.arch().grid_len();
    if grids.len() != want {
        return Err(Error::shape("vae_loss batch", want, grids.len()));
    }
    if prior.is_empty() || prior.len() % model.latent_dim() != 0 {
        return Err(Error::shape("vae_loss prior samples", format!("a positive multiple of {}", model.latent_dim()), prior.len()));
    }
    Ok(())
}

/// Objective on `n` row-major grids against row-major prior draws.
pub fn vae_loss_grids(model: &VaeModel, grids: &[f64], n: usize, prior: &[f64], cfg: &MmdConfig) -> Result<LossParts> {
    check_batch(model, grids, n, prior)?;
    let z = model.encode_grids(grids, n)?;
    let recon = model.decode_codes(&z, n)?;
    let reconstruction = sq_dist(grids, &recon) / n as f64;
    let regularization = mmd(&z, prior, model.latent_dim(), cfg)?;
    finish(reconstruction, regularization, cfg)
}

fn finish(reconstruction: f64, regularization: f64, cfg: &MmdConfig) -> Result<LossParts> {
    let total = reconstruction + cfg.lambda * regularization;
    if !total.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss (reconstruction {reconstruction}, mmd {regularization})"
        )));
    }
    Ok(LossParts { total, reconstruction, regularization })
}

pub fn vae_loss(model: &VaeModel, batch: &[Field], prior: &[LatentCode], cfg: &MmdConfig) -> Result<LossParts> {
    let grids: Vec<f64> = batch.iter().flat_map(|f| f.grid().iter().copied()).collect();
    let p: Vec<f64> = prior.iter().flat_map(|c| c.0.iter().copied()).collect();
    vae_loss_grids(model, &grids, batch.len(), &p, cfg)
}

/// Objective and its gradient w.r.t. the model's flat parameter vector.
pub fn vae_loss_gradient(
    model: &VaeModel,
    grids: &[f64],
    n: usize,
    prior: &[f64],
    cfg: &MmdConfig,
) -> Result<(LossParts, Vec<f64>)> {
    check_batch(model, grids, n, prior)?;
    let (enc_p, dec_p) = model.split_params();
    let enc_acts = model.encoder().forward_cached(enc_p, grids, n)?;
    let z = enc_acts.last().expect("encoder has layers");
    let dec_acts = model.decoder().forward_cached(dec_p, z, n)?;
    let recon = dec_acts.last().expect("decoder has layers");

    let reconstruction = sq_dist(grids, recon) / n as f64;
    let (regularization, mmd_grad) = mmd_with_grad(z, prior, model.latent_dim(), cfg)?;
    let parts = finish(reconstruction, regularization, cfg)?;

    let mut grads = vec![0.0; model.params().len()];
    let (enc_g, dec_g) = grads.split_at_mut(enc_p.len());
    let scale = 2.0 / n as f64;
    let upstream: Vec<f64> = recon.iter().zip(grids).map(|(r, x)| scale * (r - x)).collect();
    let mut gz = model
        .decoder()
        .backward(dec_p, z, &dec_acts, upstream, dec_g, true)
        .expect("input gradient requested");
    for (g, m) in gz.iter_mut().zip(&mmd_grad) {
        *g += cfg.lambda * m;
    }
    model.encoder().backward(enc_p, grids, &enc_acts, gz, enc_g, false);
    Ok((parts, grads))
}

/// KL(N(mu, diag sigma2) || N(0, I)).
pub fn kl_gaussian_closed_form(mu: &[f64], sigma2: &[f64]) -> Result<f64> {
    if mu.len() != sigma2.len() {
        return Err(Error::shape("kl_gaussian_closed_form", mu.len(), sigma2.len()));
    }
    if let Some(v) = sigma2.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::invalid(format!("variance must be positive, got {v}")));
    }
    Ok(0.5 * mu.iter().zip(sigma2).map(|(m, s)| s + m * m - 1.0 - s.ln()).sum::<f64>())
}

/// mu + sigma * noise, with the noise drawn by the caller.
pub fn reparameterize(mu: &[f64], sigma: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    if mu.len() != sigma.len() || mu.len() != noise.len() {
        return Err(Error::shape(
            "reparameterize",
            mu.len(),
            format!("sigma {} / noise {}", sigma.len(), noise.len()),
        ));
    }
    Ok(mu.iter().zip(sigma).zip(noise).map(|((m, s), e)| m + s * e).collect())
}
