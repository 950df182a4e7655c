use crate::volume::SinogramStack;
use crate::Result;

/// |k − round(k)| below this snaps to the exact integer row permutation.
const INTEGER_SNAP: f64 = 1e-9;

/// Circularly shifts every slice's rows along the angle axis so that
/// out(θ) = in(θ − φ). Fractional shifts interpolate linearly between the
/// two bracketing rows; integer multiples of Δφ are exact permutations.
/// The transpose of a φ shift is the −φ shift, including fractional φ.
pub fn shift_angles(s: &SinogramStack, phi: f64) -> Result<SinogramStack> {
    let g = *s.geometry();
    let out = shift_raw(s.values().data(), s.depth(), g.n_angles, g.n_det, phi / g.delta_phi());
    SinogramStack::new(
        tensor_engine::Tensor::new(vec![s.depth(), g.n_angles, g.n_det], out)?,
        g,
    )
}

/// `k` is the shift in units of angular steps.
pub(crate) fn shift_raw(vals: &[f64], depth: usize, na: usize, nd: usize, k: f64) -> Vec<f64> {
    let plane = na * nd;
    let mut out = vec![0.0; vals.len()];
    let kr = k.round();
    if (k - kr).abs() < INTEGER_SNAP {
        let ki = kr as i64;
        for s in 0..depth {
            for a in 0..na {
                let src = (a as i64 - ki).rem_euclid(na as i64) as usize;
                let from = s * plane + src * nd;
                let to = s * plane + a * nd;
                out[to..to + nd].copy_from_slice(&vals[from..from + nd]);
            }
        }
        return out;
    }
    let ki = k.floor() as i64;
    let f = k - k.floor();
    for s in 0..depth {
        for a in 0..na {
            let hi = (a as i64 - ki).rem_euclid(na as i64) as usize;
            let lo = (a as i64 - ki - 1).rem_euclid(na as i64) as usize;
            let from_hi = s * plane + hi * nd;
            let from_lo = s * plane + lo * nd;
            let to = s * plane + a * nd;
            for d in 0..nd {
                out[to + d] = (1.0 - f) * vals[from_hi + d] + f * vals[from_lo + d];
            }
        }
    }
    out
}
