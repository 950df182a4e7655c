//! Synthetic paired CT/CBCT data.
//!
//! Builds randomized ellipsoid phantoms in HU, scans each one twice through
//! the projector — once as a dense high-dose CT, once as a sparse low-dose
//! CBCT with additive scatter — and reconstructs both by FBP. The two
//! reconstructions are perfectly aligned by construction (same phantom, same
//! grid), so the pair (xc, x0) plus the CT sinogram stack y0 stands in for a
//! registered clinical training pair.
//!
//! The acquisition chain per scan: HU → attenuation, forward project, photon
//! statistics I ~ Poisson(I0·e^(−p)) with optional additive scatter
//! k·blur(I, σ_s) and electronic noise, then y = −ln(max(I,1)/I0) and FBP.
//! All randomness derives from (seed, purpose[, index]) streams, so datasets
//! regenerate bit-identically.

mod acquire;
mod dataset;
mod dose;
mod error;
mod normalize;
mod spec;

pub use acquire::{corrupt_line_integrals, simulate_cbct, simulate_ct};
pub use dataset::{
    build_dataset, load_pair, read_manifest, DatasetConfig, LoadedPair, Manifest, PairRecord,
    Split, MANIFEST_NAME,
};
pub use dose::DoseModel;
pub use error::SimError;
pub use normalize::{hu_denormalize, hu_normalize};
pub use spec::{make_phantom, sample_spec, Domain, Ellipsoid, PhantomSpec};

pub type Result<T> = std::result::Result<T, SimError>;
