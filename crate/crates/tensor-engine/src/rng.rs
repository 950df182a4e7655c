//! Named, isolated RNG streams. Each (seed, purpose, index) triple keys its
//! own ChaCha12 generator, so consuming draws in one stream can never shift
//! another stream's sequence.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::Tensor;

pub fn stream(seed: u64, purpose: &str) -> ChaCha12Rng {
    substream(seed, purpose, 0)
}

pub fn substream(seed: u64, purpose: &str, index: u64) -> ChaCha12Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(purpose.as_bytes());
    h.update(index.to_le_bytes());
    let key: [u8; 32] = h.finalize().into();
    ChaCha12Rng::from_seed(key)
}

/// Standard normal draws in index order (Box-Muller on explicit uniforms, so
/// the sequence is pinned by this crate, not by distribution internals).
pub fn standard_normal(rng: &mut ChaCha12Rng, shape: impl Into<Vec<usize>>) -> Tensor {
    let shape = shape.into();
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    while data.len() < n {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        let th = std::f64::consts::TAU * u2;
        data.push(r * th.cos());
        if data.len() < n {
            data.push(r * th.sin());
        }
    }
    Tensor::new(shape, data).expect("shape/product consistent by construction")
}

pub fn uniform(rng: &mut ChaCha12Rng, shape: impl Into<Vec<usize>>, lo: f64, hi: f64) -> Tensor {
    let shape = shape.into();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::new(shape, data).expect("shape/product consistent by construction")
}
