use rand::Rng;
use tensor_engine::adam::{AdamConfig, AdamState};
use tensor_engine::{rng, Tape, Tensor};
use tomo_core::{Unit, Volume};

use crate::graph::{init_params, stack_volumes, AeGraph};
use crate::loss::ae_loss_nodes;
use crate::{AECheckpoint, AEConfig, AeError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub step: u64,
    pub loss: f64,
    pub l1: f64,
    pub edge: f64,
}

/// Renders rows as CSV. f64 Display is shortest-roundtrip, so identical
/// runs serialize to identical bytes.
pub fn log_csv(rows: &[TrainLogRow]) -> String {
    let mut out = String::from("step,loss,l1,edge\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.step, r.loss, r.l1, r.edge));
    }
    out
}

fn ensure_finite(value: f64, step: u64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(AeError::NonFinite { step })
    }
}

/// Trains a fresh autoencoder on normalized volumes, minibatching with
/// replacement. Every random draw is keyed by (seed, purpose, step), so the
/// returned checkpoint is a pure function of (volumes, cfg, seed).
pub fn train_ae(
    volumes: &[Volume],
    cfg: &AEConfig,
    seed: u64,
) -> Result<(AECheckpoint, Vec<TrainLogRow>)> {
    cfg.validate()?;
    if volumes.is_empty() {
        return Err(AeError::invalid("train_ae", "no training volumes"));
    }
    let first = &volumes[0];
    cfg.check_extents(first.depth(), first.rows(), first.cols())?;
    for (i, v) in volumes.iter().enumerate() {
        if v.unit() != Unit::Normalized {
            return Err(AeError::invalid("train_ae", format!("volume {i} is not normalized")));
        }
        if (v.depth(), v.rows(), v.cols()) != (first.depth(), first.rows(), first.cols()) {
            return Err(AeError::invalid("train_ae", format!("volume {i} shape differs from volume 0")));
        }
    }

    let mut params = init_params(cfg, seed)?;
    let names = params.names();
    let mut adam = AdamState::new(&params.tensors(), AdamConfig::with_lr(cfg.lr));
    let mut log = Vec::with_capacity(cfg.steps as usize);

    for step in 1..=cfg.steps {
        let mut r = rng::substream(seed, "ae-batch", step);
        let idx: Vec<usize> = (0..cfg.batch_size).map(|_| r.gen_range(0..volumes.len())).collect();
        let batch = stack_volumes(volumes, &idx)?;

        let mut tape = Tape::new();
        let graph = AeGraph::trainable(&mut tape, &params, cfg)?;
        let x = tape.constant(batch);
        let z = graph.encode(&mut tape, x)?;
        let xhat = graph.decode(&mut tape, z)?;
        let nodes = ae_loss_nodes(&mut tape, xhat, x, cfg.edge_lambda)?;

        let loss = tape.value(nodes.total).item()?;
        ensure_finite(loss, step)?;
        let l1 = tape.value(nodes.l1).item()?;
        let edge = tape.value(nodes.edge).item()?;

        let mut grads = tape.backward(nodes.total)?;
        let grad_list: Vec<Option<Tensor>> =
            graph.ordered_ids().iter().map(|id| grads.take(*id)).collect();
        let mut tensors = params.tensors();
        adam.step(&names, &mut tensors, &grad_list)?;
        params.replace_tensors(tensors)?;

        log.push(TrainLogRow { step, loss, l1, edge });
    }

    let ck = AECheckpoint { config: *cfg, params, step: cfg.steps, seed };
    Ok((ck, log))
}
