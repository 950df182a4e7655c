use tensor_engine::Tensor;
use tomo_core::{equivariance_gradient, SinogramStack, Unit, Volume};

use crate::{DiffError, Result};

/// Slope of the normalized→attenuation map μ = 0.03·(n + 1); the chain
/// factor when a gradient taken in attenuation units is pulled back to the
/// normalized values the denoiser actually produces.
const DMU_DN: f64 = 0.03;

/// Adds the projection-consistency correction to a score estimate.
///
/// `base` is any tensor shaped like `xhat`'s voxel grid (in practice the
/// model's score estimate for the decoded prediction). The returned tensor is
/// `base − λ/(2σ²) · dμ/dn · ∇‖T_φ y₀ − A R_φ x̂₀‖²` summed over `angles`,
/// i.e. a step *down* the measurement-space residual, together with the
/// residual itself for logging. With `lambda_eq = 0` the output equals
/// `base`. This is an experimental hook: no default sampling path calls it.
pub fn guided_score(
    base: &Tensor,
    xhat: &Volume,
    y0: &SinogramStack,
    angles: &[f64],
    lambda_eq: f64,
    sigma_sq: f64,
) -> Result<(Tensor, f64)> {
    if !lambda_eq.is_finite() || lambda_eq < 0.0 {
        return Err(DiffError::invalid("guided_score", format!("lambda_eq = {lambda_eq}")));
    }
    if !sigma_sq.is_finite() || sigma_sq <= 0.0 {
        return Err(DiffError::invalid("guided_score", format!("sigma_sq = {sigma_sq}")));
    }
    if xhat.unit() != Unit::Normalized {
        return Err(DiffError::invalid("guided_score", "prediction is not normalized"));
    }
    if base.shape() != xhat.values().shape() {
        return Err(DiffError::invalid(
            "guided_score",
            format!("base shape {:?}, prediction {:?}", base.shape(), xhat.values().shape()),
        ));
    }
    let att = xhat.to_unit(Unit::Attenuation);
    let (residual, grad_att) = equivariance_gradient(&att, y0, angles)?;
    let scale = -(lambda_eq / (2.0 * sigma_sq)) * DMU_DN;
    let data: Vec<f64> = base
        .data()
        .iter()
        .zip(grad_att.data())
        .map(|(b, g)| b + scale * g)
        .collect();
    Ok((Tensor::new(base.shape().to_vec(), data)?, residual))
}
