use crate::{DiffError, Result};

/// Variance-preserving noise schedule. β is linear across 1..=T inclusive
/// of both endpoints; α̅_t = ∏_{s≤t}(1−β_s) accumulated as a plain 64-bit
/// running product so recomputation is bit-stable.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    beta: Vec<f64>,
    alpha_bar: Vec<f64>,
    beta_min: f64,
    beta_max: f64,
}

pub fn make_schedule(t_max: usize, beta_min: f64, beta_max: f64) -> Result<Schedule> {
    if t_max == 0 {
        return Err(DiffError::invalid("make_schedule", "T must be >= 1"));
    }
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
        return Err(DiffError::invalid(
            "make_schedule",
            format!("need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]"),
        ));
    }
    let mut beta = Vec::with_capacity(t_max);
    for t in 0..t_max {
        let frac = if t_max == 1 { 0.0 } else { t as f64 / (t_max - 1) as f64 };
        beta.push(beta_min + (beta_max - beta_min) * frac);
    }
    let mut alpha_bar = Vec::with_capacity(t_max);
    let mut prod = 1.0;
    for b in &beta {
        prod *= 1.0 - b;
        alpha_bar.push(prod);
    }
    debug_assert!(alpha_bar.windows(2).all(|w| w[1] < w[0]));
    Ok(Schedule { beta, alpha_bar, beta_min, beta_max })
}

impl Schedule {
    pub fn t_max(&self) -> usize {
        self.beta.len()
    }

    pub fn beta_range(&self) -> (f64, f64) {
        (self.beta_min, self.beta_max)
    }

    fn check_t(&self, op: &str, t: usize, allow_zero: bool) -> Result<()> {
        let lo = if allow_zero { 0 } else { 1 };
        if t < lo || t > self.t_max() {
            return Err(DiffError::invalid(
                op,
                format!("t = {t} outside [{lo}, {}]", self.t_max()),
            ));
        }
        Ok(())
    }

    /// β_t, 1-indexed.
    pub fn beta(&self, t: usize) -> Result<f64> {
        self.check_t("beta", t, false)?;
        Ok(self.beta[t - 1])
    }

    /// α̅_t, 1-indexed; α̅_0 = 1 by convention (the clean-data endpoint).
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.check_t("alpha_bar", t, true)?;
        Ok(if t == 0 { 1.0 } else { self.alpha_bar[t - 1] })
    }
}

/// Decreasing DDIM timestep trajectory: `n_steps` points spread uniformly
/// over [T..1] inclusive of both ends, then the terminal 0. Each window
/// (τ_k, τ_{k+1}) is one denoiser evaluation, so the trajectory costs
/// exactly `n_steps` network calls.
pub fn ddim_timesteps(t_max: usize, n_steps: usize) -> Result<Vec<usize>> {
    if n_steps == 0 || n_steps > t_max {
        return Err(DiffError::invalid(
            "ddim_timesteps",
            format!("n_steps = {n_steps} outside [1, {t_max}]"),
        ));
    }
    let mut out = Vec::with_capacity(n_steps + 1);
    for k in 0..n_steps {
        let frac = if n_steps == 1 { 0.0 } else { k as f64 / (n_steps - 1) as f64 };
        let t = (t_max as f64 - (t_max as f64 - 1.0) * frac).round() as usize;
        out.push(t);
    }
    out.push(0);
    debug_assert!(out.windows(2).all(|w| w[1] < w[0]), "{out:?}");
    Ok(out)
}
