//! Variance-preserving latent diffusion: the noising schedule and its
//! algebra, a conditional 3D U-Net ε-predictor, deterministic DDIM synthesis
//! through a frozen autoencoder, and an optional measurement-consistency
//! score correction.
//!
//! Everything downstream of a seed is a pure function of it: timestep draws,
//! training noise, and the DDIM start point each come from their own named
//! RNG stream, so ablating one term never perturbs another's randomness.

mod checkpoint;
mod embed;
mod error;
mod forward;
mod guided;
mod sampler;
mod schedule;
mod unet;

pub use checkpoint::DiffusionCheckpoint;
pub use embed::sinusoidal_embedding;
pub use error::DiffError;
pub use forward::{
    ddim_step, ddpm_loss_node, q_sample, q_sample_node, recover_z0, recover_z0_node,
};
pub use guided::guided_score;
pub use sampler::{decode_latent, ddpm_loss, encode_volume, predict_eps, sample, PairLoss};
pub use schedule::{ddim_timesteps, make_schedule, Schedule};
pub use unet::{unet_init, unet_param_specs, DenoiserConfig, UnetGraph};

pub type Result<T> = std::result::Result<T, DiffError>;
