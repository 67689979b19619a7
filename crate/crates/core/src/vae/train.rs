use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::loss::{vae_loss_gradient, vae_loss_grids, LossParts};
use super::mmd::MmdConfig;
use super::model::{EpochRecord, VaeModel};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::nn::{adam_step, AdamConfig, AdamState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, batch_size: 100, learning_rate: 1e-4, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("batch size must be >= 2 for the MMD term"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Contiguous index ranges of at most `size`, with a trailing singleton
/// folded into the previous batch.
fn batch_ranges(n: usize, size: usize) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<_> = (0..n).step_by(size).map(|s| s..(s + size).min(n)).collect();
    if out.len() > 1 && out.last().is_some_and(|r| r.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").end = last.end;
    }
    out
}

fn draw_prior(rng: &mut ChaCha8Rng, count: usize, k: usize) -> Vec<f64> {
    (0..count * k).map(|_| StandardNormal.sample(rng)).collect()
}

fn flatten(fields: &[&Field]) -> Vec<f64> {
    fields.iter().flat_map(|f| f.grid().iter().copied()).collect()
}

struct Validation {
    grids: Vec<Vec<f64>>,
    priors: Vec<Vec<f64>>,
    sizes: Vec<usize>,
}

impl Validation {
    fn new(val: &[Field], batch: usize, k: usize, mmd: &MmdConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut v = Validation { grids: Vec::new(), priors: Vec::new(), sizes: Vec::new() };
        for r in batch_ranges(val.len(), batch) {
            let refs: Vec<&Field> = val[r.clone()].iter().collect();
            v.grids.push(flatten(&refs));
            v.priors.push(draw_prior(rng, mmd.prior_samples.unwrap_or(r.len()), k));
            v.sizes.push(r.len());
        }
        v
    }

    fn evaluate(&self, model: &VaeModel, mmd: &MmdConfig) -> Result<LossParts> {
        let mut acc = LossParts::default();
        let total: usize = self.sizes.iter().sum();
        for ((g, p), &n) in self.grids.iter().zip(&self.priors).zip(&self.sizes) {
            let parts = if n >= 2 {
                vae_loss_grids(model, g, n, p, mmd)?
            } else {
                single_item_loss(model, g, p, mmd)?
            };
            let w = n as f64 / total as f64;
            acc.total += w * parts.total;
            acc.reconstruction += w * parts.reconstruction;
            acc.regularization += w * parts.regularization;
        }
        Ok(acc)
    }
}

/// A one-field validation set still gets a loss value.
fn single_item_loss(model: &VaeModel, grid: &[f64], prior: &[f64], cfg: &MmdConfig) -> Result<LossParts> {
    let z = model.encode_grids(grid, 1)?;
    let r = model.decode_codes(&z, 1)?;
    let reconstruction: f64 = grid.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum();
    let regularization = super::mmd::mmd(&z, prior, model.latent_dim(), cfg)?;
    Ok(LossParts { total: reconstruction + cfg.lambda * regularization, reconstruction, regularization })
}

/// Mean squared per-cell residual of `model` over `fields`.
pub fn residual_variance(model: &VaeModel, fields: &[Field]) -> Result<f64> {
    let mut sse = 0.0;
    let mut cells = 0usize;
    for chunk in fields.chunks(256) {
        let refs: Vec<&Field> = chunk.iter().collect();
        let g = flatten(&refs);
        let z = model.encode_grids(&g, chunk.len())?;
        let r = model.decode_codes(&z, chunk.len())?;
        sse += g.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        cells += g.len();
    }
    if cells == 0 {
        return Err(Error::invalid("no fields to measure residual variance on"));
    }
    Ok(sse / cells as f64)
}

/// Minibatch Adam on reconstruction + lambda * MMD. Returns the weights of
/// the epoch with the lowest validation total loss, with the full history.
pub fn train(
    model: VaeModel,
    train_set: &[Field],
    validation_set: &[Field],
    cfg: &TrainConfig,
    mmd: &MmdConfig,
) -> Result<(VaeModel, Vec<EpochRecord>)> {
    train_with_progress(model, train_set, validation_set, cfg, mmd, |_| {})
}

pub fn train_with_progress(
    mut model: VaeModel,
    train_set: &[Field],
    validation_set: &[Field],
    cfg: &TrainConfig,
    mmd: &MmdConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(VaeModel, Vec<EpochRecord>)> {
    cfg.validate()?;
    mmd.validate()?;
    if train_set.len() < 2 {
        return Err(Error::invalid(format!("training needs at least 2 fields, got {}", train_set.len())));
    }
    if validation_set.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    let grid_len = model.arch().grid_len();
    if let Some(f) = train_set.iter().chain(validation_set).find(|f| f.grid().len() != grid_len) {
        return Err(Error::shape("training field", grid_len, f.grid().len()));
    }
    let k = model.latent_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut val_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_0F_7A11);
    let validation = Validation::new(validation_set, cfg.batch_size, k, mmd, &mut val_rng);
    let mut adam = AdamState::new(
        model.params().len(),
        AdamConfig { learning_rate: cfg.learning_rate, ..AdamConfig::default() },
    );
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, Vec<f64>)> = None;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut acc = LossParts::default();
        for (b, range) in batch_ranges(order.len(), cfg.batch_size).into_iter().enumerate() {
            let n = range.len();
            let refs: Vec<&Field> = order[range].iter().map(|&i| &train_set[i]).collect();
            let grids = flatten(&refs);
            let prior = draw_prior(&mut rng, mmd.prior_samples.unwrap_or(n), k);
            let fail = |msg: String| Error::Training { epoch, batch: b, msg };
            let (parts, grads) = vae_loss_gradient(&model, &grids, n, &prior, mmd).map_err(|e| fail(e.to_string()))?;
            adam_step(model.params_mut(), &grads, &mut adam).map_err(|e| fail(e.to_string()))?;
            let w = n as f64 / train_set.len() as f64;
            acc.total += w * parts.total;
            acc.reconstruction += w * parts.reconstruction;
            acc.regularization += w * parts.regularization;
        }
        let val = validation.evaluate(&model, mmd).map_err(|e| Error::Training {
            epoch,
            batch: 0,
            msg: format!("validation: {e}"),
        })?;
        let record = EpochRecord {
            epoch,
            train_total: acc.total,
            train_reconstruction: acc.reconstruction,
            train_mmd: acc.regularization,
            val_total: val.total,
            val_reconstruction: val.reconstruction,
            val_mmd: val.regularization,
        };
        on_epoch(&record);
        history.push(record);
        if best.as_ref().map_or(true, |(_, v, _)| val.total < *v) {
            best = Some((epoch, val.total, model.params().to_vec()));
        }
    }

    let (best_epoch, _, params) = best.expect("at least one epoch ran");
    model.params_mut().copy_from_slice(&params);
    model.sigma2 = residual_variance(&model, train_set)?;
    model.history = history.clone();
    model.best_epoch = Some(best_epoch);
    Ok((model, history))
}
