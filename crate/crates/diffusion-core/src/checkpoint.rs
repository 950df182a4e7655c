use std::path::Path;

use latent_ae::AECheckpoint;
use tensor_engine::container;
use tensor_engine::params::ParamSet;

use crate::unet::{unet_param_specs, DenoiserConfig};
use crate::{make_schedule, DiffError, Result, Schedule};

/// Denoiser weights plus everything sampling needs: the schedule recipe and
/// the full frozen autoencoder (embedded, so one file is a complete model).
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionCheckpoint {
    pub denoiser: DenoiserConfig,
    pub params: ParamSet,
    pub schedule: Schedule,
    pub ae: AECheckpoint,
    /// Optimizer steps completed when the snapshot was taken.
    pub step: u64,
    pub seed: u64,
}

impl DiffusionCheckpoint {
    pub fn latent_channels(&self) -> usize {
        self.ae.config.latent_channels
    }

    /// Content digest over the denoiser parameters. The autoencoder keeps
    /// its own digest (`self.ae.digest()`) so freezing is checkable.
    pub fn digest(&self) -> String {
        self.params.digest()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let (beta_min, beta_max) = self.schedule.beta_range();
        let mut entries = vec![
            container::scalar_entry("meta.levels", self.denoiser.levels as f64),
            container::scalar_entry("meta.base_width", self.denoiser.base_width as f64),
            container::scalar_entry("meta.t_embed_dim", self.denoiser.t_embed_dim as f64),
            container::scalar_entry("meta.t_max", self.schedule.t_max() as f64),
            container::scalar_entry("meta.beta_min", beta_min),
            container::scalar_entry("meta.beta_max", beta_max),
            container::scalar_entry("meta.step", self.step as f64),
            container::scalar_entry("meta.seed_hi", (self.seed >> 32) as f64),
            container::scalar_entry("meta.seed_lo", (self.seed & 0xFFFF_FFFF) as f64),
        ];
        for (name, t) in self.params.iter() {
            entries.push((format!("unet.{name}"), t.clone()));
        }
        entries.extend(self.ae.entries("ae."));
        container::write(path, &entries)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<DiffusionCheckpoint> {
        let entries = container::read(path)?;
        let scalar = |name: &str| container::get_scalar(&entries, name);
        let denoiser = DenoiserConfig {
            levels: scalar("meta.levels")? as usize,
            base_width: scalar("meta.base_width")? as usize,
            t_embed_dim: scalar("meta.t_embed_dim")? as usize,
        };
        denoiser.validate()?;
        // the schedule is a pure function of its recipe; rebuilding is bit-stable
        let schedule = make_schedule(
            scalar("meta.t_max")? as usize,
            scalar("meta.beta_min")?,
            scalar("meta.beta_max")?,
        )?;
        let step = scalar("meta.step")? as u64;
        let seed = ((scalar("meta.seed_hi")? as u64) << 32) | (scalar("meta.seed_lo")? as u64);
        let ae = AECheckpoint::from_entries("ae.", &entries)?;

        let mut params = ParamSet::new();
        for (name, shape) in unet_param_specs(&denoiser, ae.config.latent_channels) {
            let full = format!("unet.{name}");
            let t = container::get(&entries, &full)
                .map_err(|_| DiffError::MissingParam { name: full.clone() })?;
            if t.shape() != shape.as_slice() {
                return Err(DiffError::invalid(
                    "DiffusionCheckpoint::load",
                    format!("{full}: stored {:?}, config wants {:?}", t.shape(), shape),
                ));
            }
            params.insert(name, t.clone())?;
        }
        Ok(DiffusionCheckpoint { denoiser, params, schedule, ae, step, seed })
    }
}
