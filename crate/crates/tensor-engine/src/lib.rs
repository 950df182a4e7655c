//! Dense f64 tensors with a reverse-mode tape, sized for desk-scale 3D work.
//!
//! Everything is eager: an op validates shapes, computes its value, and records
//! a node so `Tape::backward` can replay the graph in reverse. Gradients are
//! exact (no stochastic estimators), which is what the finite-difference suites
//! in the downstream crates lean on.

pub mod adam;
pub mod container;
mod error;
pub mod gradcheck;
mod kernels;
pub mod params;
pub mod rng;
mod tape;
mod tensor;

pub use error::EngineError;
pub use tape::{CustomOp, Gradients, NodeId, Tape};
pub use tensor::Tensor;

pub type Result<T> = std::result::Result<T, EngineError>;
