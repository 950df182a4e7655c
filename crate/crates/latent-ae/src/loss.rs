use tensor_engine::{NodeId, Tape, Tensor};

use crate::{AeError, Result};

pub struct AeLossNodes {
    pub total: NodeId,
    pub l1: NodeId,
    pub edge: NodeId,
}

/// Pretraining objective: mean |x̂ − x| plus λ · mean |∇x̂ − ∇x| with the
/// forward-difference gradient field (both means taken over the full
/// tensor, so the edge term averages its 3 directional channels).
pub fn ae_loss_nodes(tape: &mut Tape, xhat: NodeId, x: NodeId, lambda: f64) -> Result<AeLossNodes> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(AeError::invalid("ae_loss", format!("lambda {lambda}")));
    }
    if tape.value(xhat).shape() != tape.value(x).shape() {
        return Err(AeError::invalid(
            "ae_loss",
            format!("{:?} vs {:?}", tape.value(xhat).shape(), tape.value(x).shape()),
        ));
    }
    let diff = tape.sub(xhat, x)?;
    let a = tape.abs(diff);
    let l1 = tape.mean_all(a);
    let grad = tape.spatial_gradient(diff)?;
    let ga = tape.abs(grad);
    let edge = tape.mean_all(ga);
    // λ = 0 keeps the edge node for logging but out of the total's graph
    let total = if lambda == 0.0 {
        l1
    } else {
        let scaled = tape.scale(edge, lambda);
        tape.add(l1, scaled)?
    };
    Ok(AeLossNodes { total, l1, edge })
}

/// Plain-value mirror of [`ae_loss_nodes`] for tools and tests.
pub fn ae_loss(xhat: &Tensor, x: &Tensor, lambda: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let a = tape.constant(xhat.clone());
    let b = tape.constant(x.clone());
    let nodes = ae_loss_nodes(&mut tape, a, b, lambda)?;
    Ok(tape.value(nodes.total).item()?)
}
