//! Voxel value conventions shared across the pipeline.
//!
//! The display window [−1000, 2000] HU maps affinely onto [−1, 1]; water
//! attenuates 0.02 per voxel, so μ = 0.02·(1 + HU/1000) and, equivalently,
//! μ = 0.03·(n + 1) for normalized n. Air sits at −1000 HU / −1 / 0 in the
//! three conventions, which keeps rotation's exterior fill at zero exactly
//! where the projector needs linearity.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Hu,
    Normalized,
    Attenuation,
}

impl Unit {
    /// Value assumed outside the reconstructed field of view.
    pub fn air_fill(self) -> f64 {
        match self {
            Unit::Hu => -1000.0,
            Unit::Normalized => -1.0,
            Unit::Attenuation => 0.0,
        }
    }
}

/// Water attenuation per voxel.
pub const MU_WATER: f64 = 0.02;
pub const HU_WINDOW_LO: f64 = -1000.0;
pub const HU_WINDOW_HI: f64 = 2000.0;

/// Clips to the display window, then maps it affinely onto [−1, 1].
pub fn hu_to_normalized(hu: f64) -> f64 {
    (hu.clamp(HU_WINDOW_LO, HU_WINDOW_HI) - 500.0) / 1500.0
}

/// Exact inverse of [`hu_to_normalized`] on the window.
pub fn normalized_to_hu(n: f64) -> f64 {
    1500.0 * n + 500.0
}

/// Linear; callers feed values ≥ −1000 HU (air) to keep μ ≥ 0.
pub fn hu_to_attenuation(hu: f64) -> f64 {
    MU_WATER * (1.0 + hu / 1000.0)
}

pub fn attenuation_to_hu(mu: f64) -> f64 {
    1000.0 * (mu / MU_WATER - 1.0)
}

/// Composition of normalized→HU→μ collapsed to one affine map.
pub fn normalized_to_attenuation(n: f64) -> f64 {
    0.03 * (n + 1.0)
}

pub fn attenuation_to_normalized(mu: f64) -> f64 {
    mu / 0.03 - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_anchors() {
        assert_eq!(hu_to_normalized(-1000.0), -1.0);
        assert_eq!(hu_to_normalized(2000.0), 1.0);
        assert_eq!(hu_to_normalized(500.0), 0.0);
        assert_eq!(hu_to_normalized(3000.0), 1.0);
        assert_eq!(hu_to_normalized(-4000.0), -1.0);
    }

    #[test]
    fn air_maps_to_zero_attenuation_in_every_convention() {
        assert_eq!(hu_to_attenuation(-1000.0), 0.0);
        assert_eq!(normalized_to_attenuation(-1.0), 0.0);
        assert_eq!(Unit::Attenuation.air_fill(), 0.0);
        assert_eq!(Unit::Hu.air_fill(), -1000.0);
        assert_eq!(Unit::Normalized.air_fill(), -1.0);
    }

    #[test]
    fn water_reads_standard_values() {
        assert_eq!(hu_to_attenuation(0.0), MU_WATER);
        assert!((normalized_to_attenuation(hu_to_normalized(0.0)) - MU_WATER).abs() < 1e-15);
    }

    #[test]
    fn conversions_round_trip() {
        for i in 0..200 {
            let hu = -1000.0 + 15.0 * i as f64;
            let n = hu_to_normalized(hu);
            assert!((normalized_to_hu(n) - hu).abs() < 1e-9, "hu {hu}");
            let mu = hu_to_attenuation(hu);
            assert!((attenuation_to_hu(mu) - hu).abs() < 1e-9, "hu {hu}");
            assert!((normalized_to_attenuation(n) - mu).abs() < 1e-15, "hu {hu}");
            assert!((attenuation_to_normalized(mu) - n).abs() < 1e-13, "hu {hu}");
        }
    }
}
