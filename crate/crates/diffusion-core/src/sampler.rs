use latent_ae::{stack_volumes, AeGraph, AECheckpoint};
use rand::Rng;
use tensor_engine::{rng, NodeId, Tape, Tensor};
use tomo_core::{Unit, Volume};

use crate::checkpoint::DiffusionCheckpoint;
use crate::forward::{ddim_step, ddpm_loss_node, q_sample_node};
use crate::schedule::ddim_timesteps;
use crate::unet::UnetGraph;
use crate::{DiffError, Result};

/// Frozen-encoder pass: one normalized volume to its [1, C, S, h, w] latent.
pub fn encode_volume(ae: &AECheckpoint, v: &Volume) -> Result<Tensor> {
    if v.unit() != Unit::Normalized {
        return Err(DiffError::invalid("encode_volume", "volume is not normalized"));
    }
    let mut tape = Tape::new();
    let g = AeGraph::frozen(&mut tape, &ae.params, &ae.config)?;
    let x = tape.constant(stack_volumes(std::slice::from_ref(v), &[0])?);
    let z = g.encode(&mut tape, x)?;
    Ok(tape.value(z).clone())
}

/// Frozen-decoder pass: a single-element latent back to a normalized volume.
pub fn decode_latent(ae: &AECheckpoint, z: &Tensor) -> Result<Volume> {
    let zs = z.dims5("decode_latent")?;
    if zs[0] != 1 {
        return Err(DiffError::invalid("decode_latent", format!("batch {} latents, want 1", zs[0])));
    }
    let mut tape = Tape::new();
    let g = AeGraph::frozen(&mut tape, &ae.params, &ae.config)?;
    let zn = tape.constant(z.clone());
    let x = g.decode(&mut tape, zn)?;
    let xs = tape.value(x).dims5("decode_latent")?;
    let data = tape.value(x).data().to_vec();
    Ok(Volume::new(Tensor::new(vec![xs[2], xs[3], xs[4]], data)?, Unit::Normalized)?)
}

/// ε̂ for a whole batch at one shared timestep, through a frozen denoiser.
pub fn predict_eps(
    ckpt: &DiffusionCheckpoint,
    z_t: &Tensor,
    t: usize,
    z_c: &Tensor,
) -> Result<Tensor> {
    if t == 0 || t > ckpt.schedule.t_max() {
        return Err(DiffError::invalid(
            "predict_eps",
            format!("t = {t} outside [1, {}]", ckpt.schedule.t_max()),
        ));
    }
    let b = z_t.dims5("predict_eps")?[0];
    let mut tape = Tape::new();
    let g = UnetGraph::frozen(&mut tape, &ckpt.params, &ckpt.denoiser, ckpt.latent_channels())?;
    let a = tape.constant(z_t.clone());
    let c = tape.constant(z_c.clone());
    let out = g.predict_eps_node(&mut tape, a, c, &vec![t; b])?;
    Ok(tape.value(out).clone())
}

/// Conditional DDIM synthesis: pure function of (checkpoint, condition,
/// n_steps, seed). z_T is a seeded standard normal; each window of the
/// timestep trajectory is one denoiser call; the final ẑ0 is decoded.
/// No tomographic operator exists on this path.
pub fn sample(
    ckpt: &DiffusionCheckpoint,
    xc: &Volume,
    n_steps: usize,
    seed: u64,
) -> Result<Volume> {
    let zc = encode_volume(&ckpt.ae, xc)?;
    let mut z = rng::standard_normal(&mut rng::stream(seed, "ddim-init"), zc.shape().to_vec());
    let traj = ddim_timesteps(ckpt.schedule.t_max(), n_steps)?;
    for w in traj.windows(2) {
        let eps_hat = predict_eps(ckpt, &z, w[0], &zc)?;
        z = ddim_step(&z, w[0], w[1], &eps_hat, &ckpt.schedule)?;
    }
    decode_latent(&ckpt.ae, &z)
}

/// One pair's DDPM objective on a live tape, denoiser bound trainable. The
/// timestep and noise derive from `seed` alone, so a pair's draw does not
/// depend on its position inside a batch.
pub struct PairLoss {
    pub tape: Tape,
    pub unet: UnetGraph,
    pub loss: NodeId,
    pub t: usize,
    pub value: f64,
}

pub fn ddpm_loss(
    ckpt: &DiffusionCheckpoint,
    x0: &Volume,
    xc: &Volume,
    seed: u64,
) -> Result<PairLoss> {
    let z0 = encode_volume(&ckpt.ae, x0)?;
    let zc = encode_volume(&ckpt.ae, xc)?;
    let t = rng::stream(seed, "ddpm-t").gen_range(1..=ckpt.schedule.t_max());
    let eps = rng::standard_normal(&mut rng::stream(seed, "ddpm-eps"), z0.shape().to_vec());

    let mut tape = Tape::new();
    let unet = UnetGraph::trainable(&mut tape, &ckpt.params, &ckpt.denoiser, ckpt.latent_channels())?;
    let z0n = tape.constant(z0);
    let epsn = tape.constant(eps);
    let zt = q_sample_node(&mut tape, z0n, &[t], epsn, &ckpt.schedule)?;
    let zcn = tape.constant(zc);
    let eps_hat = unet.predict_eps_node(&mut tape, zt, zcn, &[t])?;
    let loss = ddpm_loss_node(&mut tape, epsn, eps_hat)?;
    let value = tape.value(loss).item()?;
    Ok(PairLoss { tape, unet, loss, t, value })
}
