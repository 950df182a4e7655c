use tensor_engine::Tensor;

use crate::{DiffError, Result};

/// γ(t): interleaved sin/cos features over geometrically spaced frequencies
/// ω_k = 10000^(−2k/dim), one row per timestep. Purely arithmetic — the
/// learned part of the embedding is the MLP that consumes this.
pub fn sinusoidal_embedding(ts: &[usize], dim: usize) -> Result<Tensor> {
    if dim < 2 || dim % 2 != 0 {
        return Err(DiffError::invalid("sinusoidal_embedding", format!("dim {dim} must be even and >= 2")));
    }
    if ts.is_empty() {
        return Err(DiffError::invalid("sinusoidal_embedding", "empty timestep list"));
    }
    let half = dim / 2;
    let mut data = Vec::with_capacity(ts.len() * dim);
    for &t in ts {
        for k in 0..half {
            let omega = (-(2.0 * k as f64 / dim as f64) * 10_000f64.ln()).exp();
            let arg = t as f64 * omega;
            data.push(arg.sin());
            data.push(arg.cos());
        }
    }
    Ok(Tensor::new(vec![ts.len(), dim], data)?)
}
