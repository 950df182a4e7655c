use tensor_engine::{NodeId, Tape};

use crate::{LossWeights, MetricError, Result};

/// Mean-reduced L1 distances between two 5D fields: raw values, their
/// forward-difference gradients, and their 7-point Laplacians. All three
/// are differentiable tape nodes. The derivative operators annihilate
/// constants, so a uniform offset shows up only in the first term.
pub fn image_domain_losses(
    tape: &mut Tape,
    xhat: NodeId,
    x0: NodeId,
) -> Result<(NodeId, NodeId, NodeId)> {
    let sa = tape.value(xhat).shape().to_vec();
    let sb = tape.value(x0).shape().to_vec();
    if sa != sb {
        return Err(MetricError::shape(
            "image_domain_losses",
            format!("shape mismatch {sa:?} vs {sb:?}"),
        ));
    }
    if sa.len() != 5 {
        return Err(MetricError::shape(
            "image_domain_losses",
            format!("expected [B,C,D,H,W], got {sa:?}"),
        ));
    }
    // the operators are linear, so op(a) - op(b) = op(a - b)
    let diff = tape.sub(xhat, x0)?;
    let l1 = {
        let a = tape.abs(diff);
        tape.mean_all(a)
    };
    let edge = {
        let g = tape.spatial_gradient(diff)?;
        let a = tape.abs(g);
        tape.mean_all(a)
    };
    let lap = {
        let l = tape.laplacian(diff)?;
        let a = tape.abs(l);
        tape.mean_all(a)
    };
    Ok((l1, edge, lap))
}

/// Weighted sum of the scalar loss nodes. Terms with zero weight are not
/// added at all, so a disabled term cannot perturb the result even at the
/// bits level. Rejects non-finite term values by name.
pub fn total_loss_node(
    tape: &mut Tape,
    ddpm: NodeId,
    parts: (NodeId, NodeId, NodeId),
    eq: Option<NodeId>,
    w: &LossWeights,
) -> Result<NodeId> {
    let (l1, edge, lap) = parts;
    let mut named: Vec<(&str, NodeId, f64)> = vec![
        ("ddpm", ddpm, 1.0),
        ("l1", l1, w.l1),
        ("edge", edge, w.edge),
        ("lap", lap, w.lap),
    ];
    if let Some(eq) = eq {
        named.push(("eq", eq, w.eq));
    }
    for (term, node, _) in &named {
        let v = tape.value(*node).item()?;
        if !v.is_finite() {
            return Err(MetricError::non_finite(term));
        }
    }
    let mut total = ddpm;
    for (_, node, weight) in named.into_iter().skip(1) {
        if weight != 0.0 {
            let scaled = tape.scale(node, weight);
            total = tape.add(total, scaled)?;
        }
    }
    Ok(total)
}

/// Plain-number counterpart of [`total_loss_node`] for logging and reports.
pub fn total_loss(
    ddpm: f64,
    parts: (f64, f64, f64),
    eq: Option<f64>,
    w: &LossWeights,
) -> Result<f64> {
    let (l1, edge, lap) = parts;
    let mut named = vec![("ddpm", ddpm, 1.0), ("l1", l1, w.l1), ("edge", edge, w.edge), ("lap", lap, w.lap)];
    if let Some(eq) = eq {
        named.push(("eq", eq, w.eq));
    }
    for (term, v, _) in &named {
        if !v.is_finite() {
            return Err(MetricError::non_finite(term));
        }
    }
    let mut total = ddpm;
    for (_, v, weight) in named.into_iter().skip(1) {
        if weight != 0.0 {
            total += weight * v;
        }
    }
    Ok(total)
}
