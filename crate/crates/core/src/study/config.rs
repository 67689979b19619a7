use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::car::McmcConfig;
use crate::data::SplitProbabilities;
use crate::error::{Error, Result};
use crate::generators::GeneratorKind;
use crate::vae::{MmdConfig, TrainConfig, VaeArch};

/// Seed VAE used to derive class-mean latent codes for the vae generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    /// ST series the seed VAE is trained on.
    pub n_series: usize,
    pub periods: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { n_series: 1000, periods: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimStudyConfig {
    pub generators: Vec<GeneratorKind>,
    /// Fitted visits per test series.
    pub periods: Vec<usize>,
    pub test_series: usize,
    /// Extra series each VAE variant is trained on.
    pub vae_train_sizes: Vec<usize>,
    /// Visits ahead of the last fitted visit at which MAE is measured.
    pub horizon: usize,
    /// Share of each VAE training set held out for epoch selection.
    pub validation_fraction: f64,
}

impl Default for SimStudyConfig {
    fn default() -> Self {
        Self {
            generators: GeneratorKind::ALL.to_vec(),
            periods: vec![3, 8],
            test_series: 50,
            vae_train_sizes: vec![1000],
            horizon: 3,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictStudyConfig {
    pub generator: GeneratorKind,
    pub n_series: usize,
    /// Series lengths are drawn uniformly from this range (inclusive).
    pub min_visits: usize,
    pub max_visits: usize,
    pub base_visits: Vec<usize>,
    pub horizons: Vec<usize>,
    pub split: SplitProbabilities,
}

impl Default for PredictStudyConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorKind::Vae,
            n_series: 1000,
            min_visits: 4,
            max_visits: 13,
            base_visits: vec![3, 5, 8],
            horizons: vec![1, 2, 3, 4, 5],
            split: SplitProbabilities::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub seed: u64,
    pub arch: VaeArch,
    pub train: TrainConfig,
    /// Defaults to bandwidth K/2 and unit weight.
    pub mmd: Option<MmdConfig>,
    /// Rescale trained latent coordinates to mean 0, variance 1 on the
    /// training fields (reconstructions are unchanged).
    pub standardize_latent: bool,
    /// Adam steps per VAE fit. When set, the epoch count is derived from
    /// the training-set size so small datasets get the same optimizer budget
    /// as large ones.
    pub vae_steps: Option<usize>,
    pub mcmc: McmcConfig,
    pub bootstrap: BootstrapConfig,
    pub sim: SimStudyConfig,
    pub predict: PredictStudyConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            arch: VaeArch::default(),
            train: TrainConfig::default(),
            mmd: None,
            standardize_latent: true,
            vae_steps: None,
            mcmc: McmcConfig { iterations: 2000, burn_in: 500, ..McmcConfig::default() },
            bootstrap: BootstrapConfig::default(),
            sim: SimStudyConfig::default(),
            predict: PredictStudyConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::format(None, format!("study config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn mmd_config(&self) -> MmdConfig {
        self.mmd.unwrap_or_else(|| MmdConfig::for_latent_dim(self.arch.latent_dim))
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.train.validate()?;
        self.mmd_config().validate()?;
        self.mcmc.validate()?;
        if self.vae_steps == Some(0) {
            return Err(Error::invalid("vae_steps must be positive"));
        }
        let s = &self.sim;
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::invalid(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive("sim.test_series", s.test_series)?;
        positive("sim.horizon", s.horizon)?;
        positive("bootstrap.n_series", self.bootstrap.n_series)?;
        positive("bootstrap.periods", self.bootstrap.periods)?;
        if s.generators.is_empty() || s.periods.is_empty() || s.vae_train_sizes.is_empty() {
            return Err(Error::invalid("sim.generators, sim.periods and sim.vae_train_sizes must be non-empty"));
        }
        if s.periods.iter().any(|&t| t < 2) {
            return Err(Error::invalid("sim.periods entries must be >= 2"));
        }
        if s.vae_train_sizes.iter().any(|&n| n < 2) {
            return Err(Error::invalid("sim.vae_train_sizes entries must be >= 2"));
        }
        if !(s.validation_fraction > 0.0 && s.validation_fraction < 1.0) {
            return Err(Error::invalid("sim.validation_fraction must lie in (0, 1)"));
        }
        let p = &self.predict;
        positive("predict.n_series", p.n_series)?;
        if p.min_visits < 2 || p.min_visits > p.max_visits {
            return Err(Error::invalid("predict needs 2 <= min_visits <= max_visits"));
        }
        if p.base_visits.is_empty() || p.horizons.is_empty() || p.base_visits.contains(&0) || p.horizons.contains(&0) {
            return Err(Error::invalid("predict.base_visits and predict.horizons must be non-empty and positive"));
        }
        if p.base_visits.iter().any(|&b| b < 2) {
            return Err(Error::invalid("predict.base_visits entries must be >= 2"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = StudyConfig::default();
        cfg.validate().unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(StudyConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = StudyConfig::from_toml("seed = 9\n[sim]\ntest_series = 2\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.sim.test_series, 2);
        assert_eq!(cfg.sim.periods, vec![3, 8]);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(StudyConfig::from_toml("sed = 9\n").is_err());
        assert!(StudyConfig::from_toml("[sim]\nperiods = [1]\n").is_err());
        assert!(StudyConfig::from_toml("[train]\nbatch_size = 1\n").is_err());
    }
}
