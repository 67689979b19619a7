//! Convolutional autoencoder with a deterministic encoder, trained on
//! squared reconstruction error plus an MMD penalty pulling the encoded
//! batch towards a standard-normal prior.

mod io;
mod loss;
mod mmd;
mod model;
mod network;
mod train;

pub use io::{
    deserialize_model, load_model, read_model, save_model, serialize_model, write_model,
    MODEL_FORMAT_VERSION, MODEL_MAGIC,
};
pub use loss::{
    kl_gaussian_closed_form, reconstruction_loss, reparameterize, vae_loss, vae_loss_gradient,
    vae_loss_grids, LossParts,
};
pub use mmd::{gaussian_kernel, mmd, mmd_with_grad, MmdConfig, MmdEstimator};
pub use model::{EpochRecord, LatentCode, VaeArch, VaeModel};
pub use network::{Network, Shape};
pub use train::{residual_variance, train, train_with_progress, TrainConfig};
