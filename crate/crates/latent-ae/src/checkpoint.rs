use std::path::Path;

use tensor_engine::container;
use tensor_engine::params::ParamSet;

use crate::graph::param_specs;
use crate::{AEConfig, AeError, Result};

/// Trained autoencoder weights plus everything needed to rebuild the graph
/// and to prove later stages did not touch them.
#[derive(Debug, Clone, PartialEq)]
pub struct AECheckpoint {
    pub config: AEConfig,
    pub params: ParamSet,
    /// Optimizer steps completed when the snapshot was taken.
    pub step: u64,
    pub seed: u64,
}

impl AECheckpoint {
    /// Content digest over the parameter payload (names, shapes, bits).
    pub fn digest(&self) -> String {
        self.params.digest()
    }

    /// Flat container entries under `prefix` — metadata first, parameters
    /// after — so the checkpoint can live in its own file (prefix "") or
    /// embedded inside another checkpoint's container.
    pub fn entries(&self, prefix: &str) -> Vec<(String, tensor_engine::Tensor)> {
        let cfg = &self.config;
        let mut out = vec![
            container::scalar_entry(&format!("{prefix}meta.latent_channels"), cfg.latent_channels as f64),
            container::scalar_entry(&format!("{prefix}meta.stages"), cfg.stages as f64),
            container::scalar_entry(&format!("{prefix}meta.base_width"), cfg.base_width as f64),
            container::scalar_entry(&format!("{prefix}meta.edge_lambda"), cfg.edge_lambda),
            container::scalar_entry(&format!("{prefix}meta.steps"), cfg.steps as f64),
            container::scalar_entry(&format!("{prefix}meta.batch_size"), cfg.batch_size as f64),
            container::scalar_entry(&format!("{prefix}meta.lr"), cfg.lr),
            container::scalar_entry(&format!("{prefix}meta.step"), self.step as f64),
            // seed travels as two u32 halves: f64 cannot carry all 64 bits
            container::scalar_entry(&format!("{prefix}meta.seed_hi"), (self.seed >> 32) as f64),
            container::scalar_entry(&format!("{prefix}meta.seed_lo"), (self.seed & 0xFFFF_FFFF) as f64),
        ];
        for (name, t) in self.params.iter() {
            out.push((format!("{prefix}{name}"), t.clone()));
        }
        out
    }

    /// Inverse of [`AECheckpoint::entries`]; ignores entries outside `prefix`.
    pub fn from_entries(
        prefix: &str,
        entries: &[(String, tensor_engine::Tensor)],
    ) -> Result<AECheckpoint> {
        let scalar = |name: &str| container::get_scalar(entries, &format!("{prefix}{name}"));
        let usize_of = |name: &str| -> Result<usize> { Ok(scalar(name)? as usize) };
        let config = AEConfig {
            latent_channels: usize_of("meta.latent_channels")?,
            stages: usize_of("meta.stages")?,
            base_width: usize_of("meta.base_width")?,
            edge_lambda: scalar("meta.edge_lambda")?,
            steps: scalar("meta.steps")? as u64,
            batch_size: usize_of("meta.batch_size")?,
            lr: scalar("meta.lr")?,
        };
        config.validate()?;
        let step = scalar("meta.step")? as u64;
        let hi = scalar("meta.seed_hi")? as u64;
        let lo = scalar("meta.seed_lo")? as u64;
        let seed = (hi << 32) | lo;

        let mut params = ParamSet::new();
        for (name, shape) in param_specs(&config) {
            let full = format!("{prefix}{name}");
            let t = container::get(entries, &full)
                .map_err(|_| AeError::MissingParam { name: full.clone() })?;
            if t.shape() != shape.as_slice() {
                return Err(AeError::invalid(
                    "AECheckpoint::from_entries",
                    format!("{full}: stored {:?}, config wants {:?}", t.shape(), shape),
                ));
            }
            params.insert(name, t.clone())?;
        }
        Ok(AECheckpoint { config, params, step, seed })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write(path, &self.entries(""))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<AECheckpoint> {
        AECheckpoint::from_entries("", &container::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::init_params;

    #[test]
    fn roundtrip_preserves_everything_bitwise() {
        let cfg = AEConfig { stages: 1, ..AEConfig::desk() };
        let params = init_params(&cfg, 9).unwrap();
        let ck = AECheckpoint { config: cfg, params, step: 123, seed: u64::MAX - 5 };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ae.epcv");
        ck.save(&p).unwrap();
        let back = AECheckpoint::load(&p).unwrap();
        assert_eq!(ck, back);
        assert_eq!(ck.digest(), back.digest());
    }

    #[test]
    fn prefixed_entries_embed_and_extract() {
        let cfg = AEConfig { stages: 1, ..AEConfig::desk() };
        let ck = AECheckpoint {
            config: cfg,
            params: init_params(&cfg, 2).unwrap(),
            step: 7,
            seed: 3,
        };
        let mut entries = vec![container::scalar_entry("meta.step", 99.0)]; // host's own meta
        entries.extend(ck.entries("ae."));
        let back = AECheckpoint::from_entries("ae.", &entries).unwrap();
        assert_eq!(ck, back);
        assert!(AECheckpoint::from_entries("other.", &entries).is_err());
    }

    #[test]
    fn load_rejects_a_config_param_mismatch() {
        let cfg = AEConfig { stages: 1, ..AEConfig::desk() };
        let params = init_params(&cfg, 9).unwrap();
        let ck = AECheckpoint { config: cfg, params, step: 1, seed: 1 };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ae.epcv");
        ck.save(&p).unwrap();

        // flip the stored width: every conv shape now disagrees
        let mut entries = container::read(&p).unwrap();
        for (n, t) in entries.iter_mut() {
            if n == "meta.base_width" {
                *t = tensor_engine::Tensor::scalar(16.0);
            }
        }
        container::write(&p, &entries).unwrap();
        assert!(AECheckpoint::load(&p).is_err());
    }
}
