//! Self-consistency of the rotation/projection pair: when the candidate
//! volume *is* the volume that produced the sinogram, the rotational
//! residual must be tiny for every angle on the acquisition grid.

use tomo_core::{
    equivariance_residual, forward_project, Geometry, Unit, Volume,
};

/// Smooth multi-blob attenuation volume supported well inside the
/// inscribed circle (zero outside, so rotations see only real support).
fn blob_volume(depth: usize, n: usize) -> Volume {
    let c = (n as f64 - 1.0) / 2.0;
    let max_r = c - 4.0;
    let blobs = [
        (0.0, 0.0, 14.0, 1.0),
        (-9.0, 6.0, 5.0, 0.7),
        (8.0, -4.0, 6.0, 0.5),
        (3.0, 10.0, 4.0, 0.9),
    ];
    let mut data = vec![0.0f64; depth * n * n];
    for s in 0..depth {
        let zp = 1.0 - 0.05 * s as f64 / depth.max(1) as f64;
        for r in 0..n {
            for col in 0..n {
                let x = col as f64 - c;
                let y = r as f64 - c;
                let rad = (x * x + y * y).sqrt();
                let taper = ((max_r - rad) / 3.0).clamp(0.0, 1.0);
                let mut v = 0.0;
                for (bx, by, sig, amp) in blobs {
                    let d2 = (x - bx).powi(2) + (y - by).powi(2);
                    v += amp * (-d2 / (2.0 * sig * sig)).exp();
                }
                data[(s * n + r) * n + col] = 0.04 * zp * v * taper;
            }
        }
    }
    Volume::from_parts(depth, n, n, data, Unit::Attenuation).unwrap()
}

#[test]
fn consistent_pair_has_small_residual_on_grid_angles() {
    let geom = Geometry::new(96, 96, 1.0, 64, 64).unwrap();
    let x0 = blob_volume(4, 64);
    let y0 = forward_project(&x0, &geom).unwrap();
    let dphi = geom.delta_phi();

    let angles: Vec<f64> = [1i64, 7, 23, -5, 41]
        .iter()
        .map(|m| *m as f64 * dphi)
        .collect();
    let residual = equivariance_residual(&x0, &y0, &angles).unwrap();
    let norm_sq = y0.norm_sq();
    assert!(
        residual < 1e-3 * norm_sq,
        "residual {residual:.6e} vs 1e-3*|y0|^2 = {:.6e}",
        1e-3 * norm_sq
    );
}

#[test]
fn consistent_pair_is_machine_exact_at_quarter_turns() {
    let geom = Geometry::new(96, 96, 1.0, 64, 64).unwrap();
    let x0 = blob_volume(3, 64);
    let y0 = forward_project(&x0, &geom).unwrap();
    let dphi = geom.delta_phi();

    // 24, 48, 72 steps of 2*pi/96 are exact quarter turns
    let angles: Vec<f64> = [24i64, 48, 72].iter().map(|m| *m as f64 * dphi).collect();
    let residual = equivariance_residual(&x0, &y0, &angles).unwrap();
    let norm_sq = y0.norm_sq();
    assert!(
        residual < 1e-20 * norm_sq,
        "quarter-turn residual {residual:.6e} should be machine-level (|y0|^2 = {norm_sq:.3e})"
    );
}

#[test]
fn inconsistent_pair_is_clearly_flagged() {
    let geom = Geometry::new(96, 96, 1.0, 64, 64).unwrap();
    let x0 = blob_volume(3, 64);
    let y0 = forward_project(&x0, &geom).unwrap();
    let dphi = geom.delta_phi();
    let angles: Vec<f64> = [1i64, 7, 23].iter().map(|m| *m as f64 * dphi).collect();

    let consistent = equivariance_residual(&x0, &y0, &angles).unwrap();

    // move a blob: same norm scale, wrong structure
    let n = 64usize;
    let c = (n as f64 - 1.0) / 2.0;
    let mut shifted = x0.values().data().to_vec();
    for s in 0..3usize {
        for r in 0..n {
            for col in 0..n {
                let x = col as f64 - c;
                let y = r as f64 - c;
                let d2 = (x - 16.0).powi(2) + (y + 12.0).powi(2);
                shifted[(s * n + r) * n + col] += 0.03 * (-d2 / 18.0).exp();
            }
        }
    }
    let xbad = Volume::from_parts(3, n, n, shifted, Unit::Attenuation).unwrap();
    let inconsistent = equivariance_residual(&xbad, &y0, &angles).unwrap();

    assert!(
        inconsistent > 50.0 * consistent.max(1e-30),
        "perturbed volume residual {inconsistent:.3e} not well above consistent {consistent:.3e}"
    );
}
