use rayon::prelude::*;

use crate::project;
use crate::units::Unit;
use crate::volume::{SinogramStack, Volume};
use crate::{Result, TomoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterWindow {
    RamLak,
    Hann,
}

/// Spatial-domain ramp kernel on offsets −half..=half:
/// h[0] = 1/(4Δs²), h[n] = −1/(π²n²Δs²) for odd n, 0 for even n ≠ 0.
/// The Hann variant apodizes it as 0.5·h[n] + 0.25·(h[n−1] + h[n+1]).
fn ramp_kernel(half: usize, ds: f64, window: FilterWindow) -> Vec<f64> {
    let base = |n: i64| -> f64 {
        if n == 0 {
            1.0 / (4.0 * ds * ds)
        } else if n.rem_euclid(2) == 1 {
            -1.0 / (std::f64::consts::PI.powi(2) * (n * n) as f64 * ds * ds)
        } else {
            0.0
        }
    };
    let n = 2 * half + 1;
    let mut h = vec![0.0; n];
    for (i, slot) in h.iter_mut().enumerate() {
        let off = i as i64 - half as i64;
        *slot = match window {
            FilterWindow::RamLak => base(off),
            FilterWindow::Hann => 0.5 * base(off) + 0.25 * (base(off - 1) + base(off + 1)),
        };
    }
    h
}

/// Filtered backprojection: convolves each detector row with the ramp kernel
/// and backprojects through the matched transpose. The transpose spreads each
/// ray with unit-step density, so pixel-driven backprojection equals
/// Δs·Aᵀ; with the Δs from the convolution quadrature the overall scale is
/// Δφ·Δs²/2 (the 1/2 because angles cover the full circle, counting every
/// line twice).
pub fn fbp(s: &SinogramStack, window: FilterWindow) -> Result<Volume> {
    let g = *s.geometry();
    if g.n_det < 8 {
        return Err(TomoError::invalid("fbp", format!("n_det {} < 8", g.n_det)));
    }
    let nd = g.n_det;
    let h = ramp_kernel(nd - 1, g.det_spacing, window);
    let vals = s.values().data();
    let mut filtered = vec![0.0; vals.len()];
    filtered
        .par_chunks_mut(nd)
        .zip(vals.par_chunks(nd))
        .for_each(|(out_row, in_row)| {
            for d in 0..nd {
                let mut acc = 0.0;
                for (k, &p) in in_row.iter().enumerate() {
                    // kernel offset d−k ∈ [−(nd−1), nd−1] indexes h at d−k+nd−1
                    acc += p * h[d + (nd - 1) - k];
                }
                out_row[d] = acc;
            }
        });
    let scale = g.delta_phi() * g.det_spacing * g.det_spacing / 2.0;
    let mut vol = project::backproject_raw(&filtered, s.depth(), &g);
    for v in &mut vol {
        *v *= scale;
    }
    Volume::from_parts(s.depth(), g.n_rows, g.n_cols, vol, Unit::Attenuation)
}
