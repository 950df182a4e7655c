//! Adam with bias correction, elementwise over a fixed parameter list.

use crate::{EngineError, Result, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> AdamConfig {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub cfg: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor], cfg: AdamConfig) -> AdamState {
        let m = params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
        let v = params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
        AdamState { cfg, m, v, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over the whole list; `names` is used only for diagnostics.
    /// A missing gradient (None) leaves that parameter untouched, matching
    /// "leaves not reaching the loss get zero gradient".
    pub fn step(
        &mut self,
        names: &[String],
        params: &mut [Tensor],
        grads: &[Option<Tensor>],
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(EngineError::invalid(
                "adam_step",
                format!("{} params, {} grads, state holds {}", params.len(), grads.len(), self.m.len()),
            ));
        }
        for (i, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if !g.data().iter().all(|v| v.is_finite()) {
                    return Err(EngineError::NonFinite(format!("gradient of {}", names[i])));
                }
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - self.cfg.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.cfg.beta2.powi(self.step as i32);
        let _ = t;
        for i in 0..params.len() {
            let g = match &grads[i] {
                Some(g) => g,
                None => continue,
            };
            let p = params[i].data_mut();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for j in 0..p.len() {
                m[j] = self.cfg.beta1 * m[j] + (1.0 - self.cfg.beta1) * g.data()[j];
                v[j] = self.cfg.beta2 * v[j] + (1.0 - self.cfg.beta2) * g.data()[j] * g.data()[j];
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                p[j] -= self.cfg.lr * mhat / (vhat.sqrt() + self.cfg.eps);
            }
        }
        Ok(())
    }
}
