use tomo_core::{Unit, Volume};

use crate::{Result, SimError};

/// Clips an HU volume to the fixed window and maps it affinely onto
/// [-1, 1] (window midpoint 500 HU maps to 0).
pub fn hu_normalize(v: &Volume) -> Result<Volume> {
    if v.unit() != Unit::Hu {
        return Err(SimError::invalid("hu_normalize", format!("expected HU, got {:?}", v.unit())));
    }
    Ok(v.to_unit(Unit::Normalized))
}

/// Inverse of [`hu_normalize`] on the clipped range.
pub fn hu_denormalize(v: &Volume) -> Result<Volume> {
    if v.unit() != Unit::Normalized {
        return Err(SimError::invalid(
            "hu_denormalize",
            format!("expected normalized, got {:?}", v.unit()),
        ));
    }
    Ok(v.to_unit(Unit::Hu))
}
