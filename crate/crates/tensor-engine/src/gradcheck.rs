//! Central finite differences, kept deliberately ignorant of the tape so the
//! two derivative paths stay independent.

/// d f / d x[i] via central differences with a magnitude-aware step.
pub fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
    let h = 1e-5 * x[i].abs().max(1.0);
    let mut xp = x.to_vec();
    xp[i] += h;
    let fp = f(&xp);
    xp[i] = x[i] - h;
    let fm = f(&xp);
    (fp - fm) / (2.0 * h)
}

/// Relative gap between an analytic and a numeric derivative.
pub fn rel_gap(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

/// Checks a sample of coordinates; returns the worst relative gap.
pub fn check_coords(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    coords: &[usize],
) -> f64 {
    let mut worst = 0.0f64;
    for &i in coords {
        let num = central_diff(f, x, i);
        worst = worst.max(rel_gap(analytic[i], num));
    }
    worst
}

/// Evenly spread coordinate sample for large tensors.
pub fn sample_coords(len: usize, want: usize) -> Vec<usize> {
    if len <= want {
        return (0..len).collect();
    }
    (0..want).map(|k| k * len / want).collect()
}
