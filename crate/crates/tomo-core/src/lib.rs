//! Discrete parallel-beam CT physics on stacks of 2D slices: a matched
//! forward/adjoint projector pair, filtered backprojection, in-plane rotation,
//! fractional angular shifts on sinograms, and the rotational-consistency
//! residual that couples them.
//!
//! Every operator is linear in its array argument and deterministic: parallel
//! loops are partitioned by output region and inner accumulation order is
//! fixed, so results are bit-identical across runs and thread counts.

mod adjoint;
mod error;
pub mod equivariance;
mod fbp;
mod geometry;
mod interp;
mod project;
mod rotate;
mod shift;
mod units;
mod volume;

pub use adjoint::{adjoint_test, AdjointReport};
pub use equivariance::{
    equivariance_gradient, equivariance_loss_node, equivariance_residual, ProjectSlices,
    RotateSlices,
};
pub use error::TomoError;
pub use fbp::{fbp, FilterWindow};
pub use geometry::Geometry;
pub use project::{backproject, forward_project, projector_calls};
pub use rotate::rotate_inplane;
pub use shift::shift_angles;
pub use units::{
    attenuation_to_hu, attenuation_to_normalized, hu_to_attenuation, hu_to_normalized,
    normalized_to_attenuation, normalized_to_hu, Unit, HU_WINDOW_HI, HU_WINDOW_LO, MU_WATER,
};
pub use volume::{SinogramStack, Volume};

pub type Result<T> = std::result::Result<T, TomoError>;
