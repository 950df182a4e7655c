use rayon::prelude::*;

use crate::interp;
use crate::volume::Volume;
use crate::Result;

/// |φ − k·π/2| below this snaps to the exact k-quarter-turn permutation.
const QUARTER_SNAP: f64 = 1e-12;

/// Rotates every slice counter-clockwise by `phi` about the slice center with
/// bilinear resampling; samples falling outside the grid read the unit's air
/// value. Quarter turns on square slices reduce to exact index permutations,
/// so they introduce no interpolation blur at all.
pub fn rotate_inplane(v: &Volume, phi: f64) -> Result<Volume> {
    let fill = v.unit().air_fill();
    let out = rotate_raw(v.values().data(), v.depth(), v.rows(), v.cols(), phi, fill);
    Volume::from_parts(v.depth(), v.rows(), v.cols(), out, v.unit())
}

fn quarter_turn(phi: f64) -> Option<u8> {
    let k = (phi / std::f64::consts::FRAC_PI_2).round();
    if (phi - k * std::f64::consts::FRAC_PI_2).abs() < QUARTER_SNAP {
        Some((k as i64).rem_euclid(4) as u8)
    } else {
        None
    }
}

pub(crate) fn rotate_raw(
    vol: &[f64],
    depth: usize,
    rows: usize,
    cols: usize,
    phi: f64,
    fill: f64,
) -> Vec<f64> {
    let plane = rows * cols;
    match quarter_turn(phi) {
        Some(0) => return vol.to_vec(),
        Some(2) => {
            let mut out = vec![0.0; vol.len()];
            for s in 0..depth {
                let src = &vol[s * plane..(s + 1) * plane];
                let dst = &mut out[s * plane..(s + 1) * plane];
                for r in 0..rows {
                    for c in 0..cols {
                        dst[r * cols + c] = src[(rows - 1 - r) * cols + (cols - 1 - c)];
                    }
                }
            }
            return out;
        }
        Some(q @ (1 | 3)) if rows == cols => {
            let n = rows;
            let mut out = vec![0.0; vol.len()];
            for s in 0..depth {
                let src = &vol[s * plane..(s + 1) * plane];
                let dst = &mut out[s * plane..(s + 1) * plane];
                for r in 0..n {
                    for c in 0..n {
                        dst[r * n + c] = if q == 1 {
                            src[(n - 1 - c) * n + r]
                        } else {
                            src[c * n + (n - 1 - r)]
                        };
                    }
                }
            }
            return out;
        }
        _ => {}
    }

    let (sin_p, cos_p) = phi.sin_cos();
    let cy = (rows as f64 - 1.0) / 2.0;
    let cx = (cols as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; vol.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(s, dst)| {
        let src = &vol[s * plane..(s + 1) * plane];
        for r in 0..rows {
            let y = r as f64 - cy;
            for c in 0..cols {
                let x = c as f64 - cx;
                // source position = R_{−φ} applied to the output position
                let sx = x * cos_p + y * sin_p;
                let sy = -x * sin_p + y * cos_p;
                dst[r * cols + c] = interp::gather(src, rows, cols, sy + cy, sx + cx, fill);
            }
        }
    });
    out
}

/// Exact transpose of [`rotate_raw`] with zero fill (the linear part of the
/// rotation): scatters each incoming gradient entry back through the same
/// four bilinear weights its output pixel was gathered with.
pub(crate) fn rotate_adjoint_raw(
    grad: &[f64],
    depth: usize,
    rows: usize,
    cols: usize,
    phi: f64,
) -> Vec<f64> {
    let plane = rows * cols;
    match quarter_turn(phi) {
        Some(0) => return grad.to_vec(),
        Some(2) => return rotate_raw(grad, depth, rows, cols, phi, 0.0),
        Some(1 | 3) if rows == cols => {
            // permutation transpose = inverse rotation
            return rotate_raw(grad, depth, rows, cols, -phi, 0.0);
        }
        _ => {}
    }

    let (sin_p, cos_p) = phi.sin_cos();
    let cy = (rows as f64 - 1.0) / 2.0;
    let cx = (cols as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; grad.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(s, dst)| {
        let g = &grad[s * plane..(s + 1) * plane];
        for r in 0..rows {
            let y = r as f64 - cy;
            for c in 0..cols {
                let x = c as f64 - cx;
                let sx = x * cos_p + y * sin_p;
                let sy = -x * sin_p + y * cos_p;
                interp::scatter(dst, rows, cols, sy + cy, sx + cx, g[r * cols + c]);
            }
        }
    });
    out
}
