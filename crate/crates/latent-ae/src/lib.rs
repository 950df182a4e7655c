//! 3D convolutional autoencoder that maps CT/CBCT volumes to a compact
//! latent grid and back. The encoder halves the in-plane extent per stage
//! (depth is kept), the decoder mirrors it, and outputs are tanh-bounded to
//! the normalized display window. Training minimizes L1 plus a weighted
//! edge (forward-difference gradient) L1; checkpoints carry the config and
//! seed so a saved model rebuilds and re-verifies exactly.

mod checkpoint;
mod config;
mod error;
mod graph;
mod loss;
mod train;

pub use checkpoint::AECheckpoint;
pub use config::{AEConfig, GN_EPS, GN_GROUPS};
pub use error::AeError;
pub use graph::{init_params, param_specs, stack_volumes, AeGraph};
pub use loss::{ae_loss, ae_loss_nodes, AeLossNodes};
pub use train::{log_csv, train_ae, TrainLogRow};

pub type Result<T> = std::result::Result<T, AeError>;
