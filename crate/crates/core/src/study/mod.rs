//! Study runners: the generator x method comparison grid, the base-visit x
//! horizon prediction protocol and the decoder smoothing diagnostic.

mod config;
mod predict;
mod sim;
mod smoothing;

pub use config::{BootstrapConfig, PredictStudyConfig, SimStudyConfig, StudyConfig};
pub use predict::{
    eligible, prediction_protocol, run_prediction_study, PredictCell, PredictReport, PredictRow, PredictStudyOutput,
    PREDICT_METHODS,
};
pub use sim::{method_name, run_simulation_study, SimReport, SimRow, SimSummary};
pub use smoothing::{decoded_series, mean_spatial_correlation, smoothing_diagnostic, SmoothingReport};

use crate::data::{split_patients, Dataset, SplitProbabilities};
use crate::error::{Error, Result};
use crate::field::Bounds;
use crate::generators::{class_means_by_severity, generate_dataset, GeneratorKind, GeneratorSpec};
use crate::util::derive_seed;
use crate::vae::{train, MmdConfig, TrainConfig, VaeArch, VaeModel};

/// Sink for human-readable progress lines.
pub type Progress<'a> = &'a (dyn Fn(&str) + Sync);

/// Progress sink that drops everything.
pub fn quiet(_: &str) {}

/// Everything needed to train one VAE.
#[derive(Clone, Copy, Debug)]
pub struct VaeRecipe<'a> {
    pub arch: &'a VaeArch,
    pub train: &'a TrainConfig,
    pub mmd: &'a MmdConfig,
    pub standardize: bool,
    pub steps: Option<usize>,
}

impl<'a> VaeRecipe<'a> {
    pub fn from_config(cfg: &'a StudyConfig, mmd: &'a MmdConfig) -> Self {
        Self { arch: &cfg.arch, train: &cfg.train, mmd, standardize: cfg.standardize_latent, steps: cfg.vae_steps }
    }
}

/// Trains a VAE on `train_set`, selecting the epoch on `validation_set`.
/// The upper normalization bound is the training maximum.
pub fn fit_vae(recipe: VaeRecipe<'_>, train_set: &Dataset, validation_set: &Dataset, seed: u64) -> Result<VaeModel> {
    let bounds = Bounds::from_values(train_set.series.iter().flat_map(|s| s.visits.iter().flatten()))?;
    let train_fields = train_set.all_fields(&bounds)?;
    let val_fields = validation_set.all_fields(&bounds)?;
    let model = VaeModel::new(*recipe.arch, bounds, train_set.mask.clone(), derive_seed(seed, 1))?;
    let epochs = match recipe.steps {
        Some(steps) => steps.div_ceil(train_fields.len().div_ceil(recipe.train.batch_size).max(1)),
        None => recipe.train.epochs,
    };
    let cfg = TrainConfig { seed: derive_seed(seed, 2), epochs, ..*recipe.train };
    let (mut model, _) = train(model, &train_fields, &val_fields, &cfg, recipe.mmd)?;
    if recipe.standardize {
        model.standardize_latent(&train_fields)?;
    }
    Ok(model)
}

/// Holds out roughly `validation_fraction` of the series (at least one) and
/// trains on the rest.
pub fn fit_vae_holdout(recipe: VaeRecipe<'_>, data: &Dataset, validation_fraction: f64, seed: u64) -> Result<VaeModel> {
    if data.len() < 2 {
        return Err(Error::invalid(format!("VAE training needs at least 2 series, got {}", data.len())));
    }
    let probs = SplitProbabilities { train: 1.0 - validation_fraction, validation: validation_fraction, test: 0.0 };
    let (mut tr, mut val, _) = split_patients(data, probs, derive_seed(seed, 0))?;
    if val.is_empty() {
        val.series.push(tr.series.pop().expect("at least 2 series"));
    } else if tr.is_empty() {
        tr.series.push(val.series.pop().expect("validation non-empty"));
    }
    fit_vae(recipe, &tr, &val, seed)
}

/// Seed VAE for the vae generator: trained on ST series, with class means
/// from severity tertiles of its own training fields.
pub fn bootstrap_generator(cfg: &StudyConfig, progress: Progress<'_>) -> Result<VaeModel> {
    let seed = derive_seed(cfg.seed, 0xB007);
    let spec = GeneratorSpec {
        kind: GeneratorKind::St,
        periods: cfg.bootstrap.periods,
        n_series: cfg.bootstrap.n_series.max(2),
        seed,
    };
    progress(&format!("bootstrap: {} ST series x {} visits", spec.n_series, spec.periods));
    let data = generate_dataset(&spec, None)?;
    let mmd = cfg.mmd_config();
    let mut model = fit_vae_holdout(VaeRecipe::from_config(cfg, &mmd), &data, cfg.sim.validation_fraction, derive_seed(seed, 1))?;
    model.class_means = Some(class_means_by_severity(&model, &data)?);
    Ok(model)
}
