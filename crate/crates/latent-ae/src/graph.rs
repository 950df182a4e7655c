use std::collections::BTreeMap;

use tensor_engine::params::ParamSet;
use tensor_engine::{rng, NodeId, Tape, Tensor};

use crate::{AEConfig, AeError, Result, GN_EPS, GN_GROUPS};

/// Canonical parameter inventory: names and shapes in the order they are
/// created, optimized, and serialized.
pub fn param_specs(cfg: &AEConfig) -> Vec<(String, Vec<usize>)> {
    let w = cfg.base_width;
    let c = cfg.latent_channels;
    let mut out: Vec<(String, Vec<usize>)> = Vec::new();
    let conv = |out_: &mut Vec<(String, Vec<usize>)>, name: &str, oc: usize, ic: usize| {
        out_.push((format!("{name}.w"), vec![oc, ic, 3, 3, 3]));
        out_.push((format!("{name}.b"), vec![oc]));
    };
    let rb = |out_: &mut Vec<(String, Vec<usize>)>, prefix: &str| {
        out_.push((format!("{prefix}.gn1.g"), vec![w]));
        out_.push((format!("{prefix}.gn1.b"), vec![w]));
        out_.push((format!("{prefix}.conv1.w"), vec![w, w, 3, 3, 3]));
        out_.push((format!("{prefix}.conv1.b"), vec![w]));
        out_.push((format!("{prefix}.gn2.g"), vec![w]));
        out_.push((format!("{prefix}.gn2.b"), vec![w]));
        out_.push((format!("{prefix}.conv2.w"), vec![w, w, 3, 3, 3]));
        out_.push((format!("{prefix}.conv2.b"), vec![w]));
    };

    conv(&mut out, "enc.in", w, 1);
    for s in 0..cfg.stages {
        rb(&mut out, &format!("enc.rb{s}"));
    }
    rb(&mut out, "enc.mid");
    conv(&mut out, "enc.out", c, w);

    conv(&mut out, "dec.in", w, c);
    rb(&mut out, "dec.mid");
    for s in 0..cfg.stages {
        rb(&mut out, &format!("dec.rb{s}"));
    }
    conv(&mut out, "dec.out", 1, w);
    out
}

/// He-style init: conv kernels ~ N(0, 2/fan_in), norms at identity, biases
/// at zero. Deterministic in the seed.
pub fn init_params(cfg: &AEConfig, seed: u64) -> Result<ParamSet> {
    cfg.validate()?;
    let mut r = rng::stream(seed, "ae-init");
    let mut ps = ParamSet::new();
    for (name, shape) in param_specs(cfg) {
        let t = if name.ends_with(".w") {
            let fan_in: usize = shape[1..].iter().product();
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

/// One checkpoint's parameters bound onto a tape, plus the graph builders.
/// `trainable` binding registers gradients; `frozen` binds constants so the
/// autoencoder can sit inside a larger graph without receiving updates.
pub struct AeGraph {
    ids: BTreeMap<String, NodeId>,
    cfg: AEConfig,
}

impl AeGraph {
    pub fn trainable(tape: &mut Tape, params: &ParamSet, cfg: &AEConfig) -> Result<AeGraph> {
        AeGraph::bind(tape, params, cfg, true)
    }

    pub fn frozen(tape: &mut Tape, params: &ParamSet, cfg: &AEConfig) -> Result<AeGraph> {
        AeGraph::bind(tape, params, cfg, false)
    }

    fn bind(tape: &mut Tape, params: &ParamSet, cfg: &AEConfig, trainable: bool) -> Result<AeGraph> {
        cfg.validate()?;
        let mut ids = BTreeMap::new();
        for (name, shape) in param_specs(cfg) {
            let t = params
                .get(&name)
                .ok_or_else(|| AeError::MissingParam { name: name.clone() })?;
            if t.shape() != shape.as_slice() {
                return Err(AeError::invalid(
                    "AeGraph",
                    format!("{name}: shape {:?}, config wants {:?}", t.shape(), shape),
                ));
            }
            let id = if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) };
            ids.insert(name, id);
        }
        Ok(AeGraph { ids, cfg: *cfg })
    }

    pub fn config(&self) -> &AEConfig {
        &self.cfg
    }

    /// NodeIds in canonical parameter order (matches `ParamSet` layout).
    pub fn ordered_ids(&self) -> Vec<NodeId> {
        param_specs(&self.cfg).iter().map(|(n, _)| self.ids[n]).collect()
    }

    fn id(&self, name: &str) -> NodeId {
        self.ids[name]
    }

    fn conv(&self, tape: &mut Tape, name: &str, x: NodeId) -> Result<NodeId> {
        Ok(tape.conv3(x, self.id(&format!("{name}.w")), self.id(&format!("{name}.b")), 1, [1, 1, 1])?)
    }

    fn resblock(&self, tape: &mut Tape, prefix: &str, x: NodeId) -> Result<NodeId> {
        let mut h = tape.group_norm(
            x,
            self.id(&format!("{prefix}.gn1.g")),
            self.id(&format!("{prefix}.gn1.b")),
            GN_GROUPS,
            GN_EPS,
        )?;
        h = tape.silu(h);
        h = self.conv(tape, &format!("{prefix}.conv1"), h)?;
        h = tape.group_norm(
            h,
            self.id(&format!("{prefix}.gn2.g")),
            self.id(&format!("{prefix}.gn2.b")),
            GN_GROUPS,
            GN_EPS,
        )?;
        h = tape.silu(h);
        h = self.conv(tape, &format!("{prefix}.conv2"), h)?;
        Ok(tape.add(x, h)?)
    }

    /// [B, 1, S, N, M] -> [B, C, S, N/2^stages, M/2^stages].
    pub fn encode(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        let xs = tape.value(x).dims5("encode")?;
        if xs[1] != 1 {
            return Err(AeError::invalid("encode", format!("want 1 input channel, got {}", xs[1])));
        }
        self.cfg.check_extents(xs[2], xs[3], xs[4])?;
        let mut h = self.conv(tape, "enc.in", x)?;
        for s in 0..self.cfg.stages {
            h = self.resblock(tape, &format!("enc.rb{s}"), h)?;
            h = tape.down_avg2(h)?;
        }
        h = self.resblock(tape, "enc.mid", h)?;
        let z = self.conv(tape, "enc.out", h)?;
        let f = self.cfg.factor();
        let want = [xs[0], self.cfg.latent_channels, xs[2], xs[3] / f, xs[4] / f];
        debug_assert_eq!(tape.value(z).shape(), want);
        let got = tape.value(z).dims5("encode")?;
        if got != want {
            return Err(AeError::invalid("encode", format!("latent {got:?}, want {want:?}")));
        }
        Ok(z)
    }

    /// [B, C, S, N', M'] -> [B, 1, S, N'·2^stages, M'·2^stages], tanh-bounded.
    pub fn decode(&self, tape: &mut Tape, z: NodeId) -> Result<NodeId> {
        let zs = tape.value(z).dims5("decode")?;
        if zs[1] != self.cfg.latent_channels {
            return Err(AeError::invalid(
                "decode",
                format!("want {} latent channels, got {}", self.cfg.latent_channels, zs[1]),
            ));
        }
        let mut h = self.conv(tape, "dec.in", z)?;
        h = self.resblock(tape, "dec.mid", h)?;
        for s in 0..self.cfg.stages {
            h = tape.up_nearest2(h)?;
            h = self.resblock(tape, &format!("dec.rb{s}"), h)?;
        }
        let out = self.conv(tape, "dec.out", h)?;
        Ok(tape.tanh(out))
    }
}

/// Stacks volumes (all the same shape) into a [B, 1, S, N, M] batch tensor.
pub fn stack_volumes(
    volumes: &[tomo_core::Volume],
    idx: &[usize],
) -> Result<Tensor> {
    let first = &volumes[idx[0]];
    let (s, n, m) = (first.depth(), first.rows(), first.cols());
    let mut data = Vec::with_capacity(idx.len() * s * n * m);
    for &i in idx {
        let v = &volumes[i];
        if (v.depth(), v.rows(), v.cols()) != (s, n, m) {
            return Err(AeError::invalid("stack_volumes", "mixed volume shapes in one batch"));
        }
        data.extend_from_slice(v.values().data());
    }
    Ok(Tensor::new(vec![idx.len(), 1, s, n, m], data)?)
}
