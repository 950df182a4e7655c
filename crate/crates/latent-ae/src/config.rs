use crate::{AeError, Result};

/// Channel count per group-norm group throughout the autoencoder.
pub const GN_GROUPS: usize = 8;
pub const GN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AEConfig {
    /// Latent channels C.
    pub latent_channels: usize,
    /// In-plane halvings; depth is never downsampled.
    pub stages: usize,
    /// Channel width of every residual block.
    pub base_width: usize,
    /// Edge-term weight λ of the pretraining objective.
    pub edge_lambda: f64,
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
}

impl AEConfig {
    /// Laptop-sized profile used by the end-to-end tests.
    pub fn desk() -> Self {
        AEConfig {
            latent_channels: 4,
            stages: 2,
            base_width: 8,
            edge_lambda: 0.1,
            steps: 2000,
            batch_size: 2,
            lr: 1e-3,
        }
    }

    /// Full-size profile (base width 64); training length left at a
    /// plausible default since it is hardware-bound.
    pub fn paper() -> Self {
        AEConfig { base_width: 64, steps: 20_000, lr: 1e-5, ..AEConfig::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_channels == 0 {
            return Err(AeError::invalid("AEConfig", "latent_channels must be >= 1"));
        }
        if self.stages == 0 {
            return Err(AeError::invalid("AEConfig", "stages must be >= 1"));
        }
        if self.base_width < GN_GROUPS || self.base_width % GN_GROUPS != 0 {
            return Err(AeError::invalid(
                "AEConfig",
                format!("base_width {} must be a positive multiple of {GN_GROUPS}", self.base_width),
            ));
        }
        if !(self.edge_lambda.is_finite() && self.edge_lambda >= 0.0) {
            return Err(AeError::invalid("AEConfig", format!("edge_lambda {}", self.edge_lambda)));
        }
        if self.steps == 0 || self.batch_size == 0 {
            return Err(AeError::invalid("AEConfig", "steps and batch_size must be >= 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(AeError::invalid("AEConfig", format!("lr {}", self.lr)));
        }
        Ok(())
    }

    /// In-plane shrink factor between image and latent space.
    pub fn factor(&self) -> usize {
        1 << self.stages
    }

    /// Checks that a [S, N, M] volume can pass through `stages` halvings.
    pub fn check_extents(&self, depth: usize, rows: usize, cols: usize) -> Result<()> {
        let f = self.factor();
        if depth == 0 || rows == 0 || cols == 0 || rows % f != 0 || cols % f != 0 {
            return Err(AeError::invalid(
                "AEConfig",
                format!("extents {depth}x{rows}x{cols} not divisible by 2^stages = {f}"),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        AEConfig::desk().validate().unwrap();
        AEConfig::paper().validate().unwrap();
    }

    #[test]
    fn bad_configs_are_rejected() {
        for f in [
            |c: &mut AEConfig| c.latent_channels = 0,
            |c: &mut AEConfig| c.stages = 0,
            |c: &mut AEConfig| c.base_width = 12,
            |c: &mut AEConfig| c.edge_lambda = f64::NAN,
            |c: &mut AEConfig| c.lr = 0.0,
            |c: &mut AEConfig| c.batch_size = 0,
        ] {
            let mut c = AEConfig::desk();
            f(&mut c);
            assert!(c.validate().is_err(), "{c:?} should fail");
        }
    }

    #[test]
    fn extent_divisibility_is_enforced() {
        let c = AEConfig::desk();
        c.check_extents(8, 64, 64).unwrap();
        assert!(c.check_extents(8, 63, 64).is_err());
        assert!(c.check_extents(8, 64, 62).is_err());
        assert!(c.check_extents(0, 64, 64).is_err());
        // depth itself never needs to divide
        c.check_extents(3, 64, 64).unwrap();
    }
}
