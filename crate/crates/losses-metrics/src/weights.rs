use crate::{MetricError, Result};

/// Non-negative weights for the composite training objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub l1: f64,
    pub edge: f64,
    pub lap: f64,
    pub eq: f64,
}

impl LossWeights {
    pub fn new(l1: f64, edge: f64, lap: f64, eq: f64) -> Result<Self> {
        for (name, v) in [("l1", l1), ("edge", edge), ("lap", lap), ("eq", eq)] {
            if !v.is_finite() || v < 0.0 {
                return Err(MetricError::invalid(
                    "LossWeights",
                    format!("weight {name} must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(LossWeights { l1, edge, lap, eq })
    }

    /// Published operating point: 0.6 / 0.2 / 0.2 / 0.1.
    pub fn reference() -> Self {
        LossWeights { l1: 0.6, edge: 0.2, lap: 0.2, eq: 0.1 }
    }

    /// Same image weights with the rotational-consistency term switched off.
    pub fn without_eq(self) -> Self {
        LossWeights { eq: 0.0, ..self }
    }
}
