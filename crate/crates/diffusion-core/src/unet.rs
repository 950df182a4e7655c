use std::collections::BTreeMap;

use latent_ae::{GN_EPS, GN_GROUPS};
use tensor_engine::params::ParamSet;
use tensor_engine::{rng, NodeId, Tape, Tensor};

use crate::embed::sinusoidal_embedding;
use crate::{DiffError, Result};

/// Conditional ε-predictor shape knobs. Channel width is constant across
/// levels; each level halves the in-plane extent (depth is untouched).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserConfig {
    pub levels: usize,
    pub base_width: usize,
    pub t_embed_dim: usize,
}

impl DenoiserConfig {
    /// Laptop-sized profile for 16×16 in-plane latents.
    pub fn desk() -> Self {
        DenoiserConfig { levels: 2, base_width: 16, t_embed_dim: 64 }
    }

    /// Full-size profile.
    pub fn paper() -> Self {
        DenoiserConfig { levels: 2, base_width: 64, t_embed_dim: 256 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(DiffError::invalid("DenoiserConfig", "levels must be >= 1"));
        }
        if self.base_width < GN_GROUPS || self.base_width % GN_GROUPS != 0 {
            return Err(DiffError::invalid(
                "DenoiserConfig",
                format!("base_width {} must be a positive multiple of {GN_GROUPS}", self.base_width),
            ));
        }
        if self.t_embed_dim < 2 || self.t_embed_dim % 2 != 0 {
            return Err(DiffError::invalid(
                "DenoiserConfig",
                format!("t_embed_dim {} must be even and >= 2", self.t_embed_dim),
            ));
        }
        Ok(())
    }

    /// In-plane shrink factor at the bottleneck.
    pub fn factor(&self) -> usize {
        1 << self.levels
    }
}

fn rb_specs(out: &mut Vec<(String, Vec<usize>)>, prefix: &str, cin: usize, w: usize, d: usize) {
    out.push((format!("{prefix}.gn1.g"), vec![cin]));
    out.push((format!("{prefix}.gn1.b"), vec![cin]));
    out.push((format!("{prefix}.conv1.w"), vec![w, cin, 3, 3, 3]));
    out.push((format!("{prefix}.conv1.b"), vec![w]));
    out.push((format!("{prefix}.emb.w"), vec![d, w]));
    out.push((format!("{prefix}.emb.b"), vec![w]));
    out.push((format!("{prefix}.gn2.g"), vec![w]));
    out.push((format!("{prefix}.gn2.b"), vec![w]));
    out.push((format!("{prefix}.conv2.w"), vec![w, w, 3, 3, 3]));
    out.push((format!("{prefix}.conv2.b"), vec![w]));
    if cin != w {
        out.push((format!("{prefix}.skip.w"), vec![w, cin, 1, 1, 1]));
        out.push((format!("{prefix}.skip.b"), vec![w]));
    }
}

/// Canonical U-Net parameter inventory for `latent_channels`-channel latents.
pub fn unet_param_specs(cfg: &DenoiserConfig, latent_channels: usize) -> Vec<(String, Vec<usize>)> {
    let w = cfg.base_width;
    let d = cfg.t_embed_dim;
    let c = latent_channels;
    let mut out: Vec<(String, Vec<usize>)> = vec![
        ("temb.l1.w".into(), vec![d, d]),
        ("temb.l1.b".into(), vec![d]),
        ("temb.l2.w".into(), vec![d, d]),
        ("temb.l2.b".into(), vec![d]),
        ("in.w".into(), vec![w, 2 * c, 3, 3, 3]),
        ("in.b".into(), vec![w]),
    ];
    for l in 0..cfg.levels {
        rb_specs(&mut out, &format!("enc{l}"), w, w, d);
    }
    rb_specs(&mut out, "mid", w, w, d);
    for l in (0..cfg.levels).rev() {
        // decoder blocks consume [upsampled ‖ skip] = 2w channels
        rb_specs(&mut out, &format!("dec{l}"), 2 * w, w, d);
    }
    out.push(("out.w".into(), vec![c, w, 3, 3, 3]));
    out.push(("out.b".into(), vec![c]));
    out
}

/// He-style init keyed by tensor rank: rank-5 conv kernels use ic·k³ fan-in,
/// rank-2 linear maps use the input dimension. Norm scales start at 1.
pub fn unet_init(cfg: &DenoiserConfig, latent_channels: usize, seed: u64) -> Result<ParamSet> {
    cfg.validate()?;
    if latent_channels == 0 {
        return Err(DiffError::invalid("unet_init", "latent_channels must be >= 1"));
    }
    let mut r = rng::stream(seed, "unet-init");
    let mut ps = ParamSet::new();
    for (name, shape) in unet_param_specs(cfg, latent_channels) {
        let t = if name.ends_with(".w") {
            let fan_in: usize =
                if shape.len() == 2 { shape[0] } else { shape[1..].iter().product() };
            let std = (2.0 / fan_in as f64).sqrt();
            let mut t = rng::standard_normal(&mut r, shape);
            for v in t.data_mut() {
                *v *= std;
            }
            t
        } else if name.contains(".gn") && name.ends_with(".g") {
            Tensor::full(shape, 1.0)
        } else {
            Tensor::zeros(shape)
        };
        ps.insert(name, t)?;
    }
    Ok(ps)
}

/// U-Net parameters bound onto a tape plus the forward builder.
pub struct UnetGraph {
    ids: BTreeMap<String, NodeId>,
    cfg: DenoiserConfig,
    latent_channels: usize,
}

impl UnetGraph {
    pub fn trainable(
        tape: &mut Tape,
        params: &ParamSet,
        cfg: &DenoiserConfig,
        latent_channels: usize,
    ) -> Result<UnetGraph> {
        UnetGraph::bind(tape, params, cfg, latent_channels, true)
    }

    pub fn frozen(
        tape: &mut Tape,
        params: &ParamSet,
        cfg: &DenoiserConfig,
        latent_channels: usize,
    ) -> Result<UnetGraph> {
        UnetGraph::bind(tape, params, cfg, latent_channels, false)
    }

    fn bind(
        tape: &mut Tape,
        params: &ParamSet,
        cfg: &DenoiserConfig,
        latent_channels: usize,
        trainable: bool,
    ) -> Result<UnetGraph> {
        cfg.validate()?;
        let mut ids = BTreeMap::new();
        for (name, shape) in unet_param_specs(cfg, latent_channels) {
            let t = params
                .get(&name)
                .ok_or_else(|| DiffError::MissingParam { name: name.clone() })?;
            if t.shape() != shape.as_slice() {
                return Err(DiffError::invalid(
                    "UnetGraph",
                    format!("{name}: shape {:?}, config wants {:?}", t.shape(), shape),
                ));
            }
            let id = if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) };
            ids.insert(name, id);
        }
        Ok(UnetGraph { ids, cfg: *cfg, latent_channels })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.cfg
    }

    pub fn latent_channels(&self) -> usize {
        self.latent_channels
    }

    /// NodeIds in canonical parameter order (matches `ParamSet` layout).
    pub fn ordered_ids(&self) -> Vec<NodeId> {
        unet_param_specs(&self.cfg, self.latent_channels)
            .iter()
            .map(|(n, _)| self.ids[n])
            .collect()
    }

    fn id(&self, name: &str) -> NodeId {
        self.ids[name]
    }

    fn resblock(&self, tape: &mut Tape, prefix: &str, x: NodeId, temb: NodeId) -> Result<NodeId> {
        let cin = tape.value(x).dims5("resblock")?[1];
        let mut h = tape.group_norm(
            x,
            self.id(&format!("{prefix}.gn1.g")),
            self.id(&format!("{prefix}.gn1.b")),
            GN_GROUPS,
            GN_EPS,
        )?;
        h = tape.silu(h);
        h = tape.conv3(
            h,
            self.id(&format!("{prefix}.conv1.w")),
            self.id(&format!("{prefix}.conv1.b")),
            1,
            [1, 1, 1],
        )?;
        let e = tape.linear(temb, self.id(&format!("{prefix}.emb.w")), self.id(&format!("{prefix}.emb.b")))?;
        h = tape.broadcast_channel_add(h, e)?;
        h = tape.group_norm(
            h,
            self.id(&format!("{prefix}.gn2.g")),
            self.id(&format!("{prefix}.gn2.b")),
            GN_GROUPS,
            GN_EPS,
        )?;
        h = tape.silu(h);
        h = tape.conv3(
            h,
            self.id(&format!("{prefix}.conv2.w")),
            self.id(&format!("{prefix}.conv2.b")),
            1,
            [1, 1, 1],
        )?;
        let skip = if cin == self.cfg.base_width {
            x
        } else {
            tape.conv3(
                x,
                self.id(&format!("{prefix}.skip.w")),
                self.id(&format!("{prefix}.skip.b")),
                1,
                [0, 0, 0],
            )?
        };
        Ok(tape.add(skip, h)?)
    }

    /// ε̂ = U-Net([z_t ‖ z_c], γ(t)); `ts` gives one timestep per batch
    /// element. Output shape equals the z_t shape.
    pub fn predict_eps_node(
        &self,
        tape: &mut Tape,
        z_t: NodeId,
        z_c: NodeId,
        ts: &[usize],
    ) -> Result<NodeId> {
        let zs = tape.value(z_t).dims5("predict_eps")?;
        if tape.value(z_c).shape() != tape.value(z_t).shape() {
            return Err(DiffError::invalid(
                "predict_eps",
                format!(
                    "z_t {:?} vs z_c {:?}",
                    tape.value(z_t).shape(),
                    tape.value(z_c).shape()
                ),
            ));
        }
        if zs[1] != self.latent_channels {
            return Err(DiffError::invalid(
                "predict_eps",
                format!("want {} latent channels, got {}", self.latent_channels, zs[1]),
            ));
        }
        if ts.len() != zs[0] {
            return Err(DiffError::invalid(
                "predict_eps",
                format!("{} timesteps for batch {}", ts.len(), zs[0]),
            ));
        }
        let f = self.cfg.factor();
        if zs[3] % f != 0 || zs[4] % f != 0 {
            return Err(DiffError::invalid(
                "predict_eps",
                format!("in-plane extents {}x{} not divisible by 2^levels = {f}", zs[3], zs[4]),
            ));
        }

        let gamma = tape.constant(sinusoidal_embedding(ts, self.cfg.t_embed_dim)?);
        let mut temb = tape.linear(gamma, self.id("temb.l1.w"), self.id("temb.l1.b"))?;
        temb = tape.silu(temb);
        temb = tape.linear(temb, self.id("temb.l2.w"), self.id("temb.l2.b"))?;

        let joint = tape.concat_channels(z_t, z_c)?;
        let mut h = tape.conv3(joint, self.id("in.w"), self.id("in.b"), 1, [1, 1, 1])?;
        let mut skips = Vec::with_capacity(self.cfg.levels);
        for l in 0..self.cfg.levels {
            h = self.resblock(tape, &format!("enc{l}"), h, temb)?;
            skips.push(h);
            h = tape.down_avg2(h)?;
        }
        h = self.resblock(tape, "mid", h, temb)?;
        for l in (0..self.cfg.levels).rev() {
            h = tape.up_nearest2(h)?;
            h = tape.concat_channels(h, skips[l])?;
            h = self.resblock(tape, &format!("dec{l}"), h, temb)?;
        }
        Ok(tape.conv3(h, self.id("out.w"), self.id("out.b"), 1, [1, 1, 1])?)
    }
}
