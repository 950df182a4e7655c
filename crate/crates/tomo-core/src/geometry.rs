use std::f64::consts::TAU;

use crate::{Result, TomoError};

/// Parallel-beam acquisition over the full circle [0, 2π).
///
/// Angle index `a` maps to θ = a·Δφ with Δφ = 2π/n_angles (always derived,
/// never stored, so Δφ·n_angles = 2π holds to the last bit of the division).
/// Detector bin `d` sits at offset (d − (n_det−1)/2)·det_spacing along the
/// detector axis n̂(θ) = (cos θ, sin θ); rays run along d̂(θ) = (−sin θ, cos θ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub n_angles: usize,
    pub n_det: usize,
    pub det_spacing: f64,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl Geometry {
    pub fn new(
        n_angles: usize,
        n_det: usize,
        det_spacing: f64,
        n_rows: usize,
        n_cols: usize,
    ) -> Result<Self> {
        if n_angles < 2 {
            return Err(TomoError::invalid("geometry", format!("n_angles {n_angles} < 2")));
        }
        if n_det == 0 || n_rows == 0 || n_cols == 0 {
            return Err(TomoError::invalid(
                "geometry",
                format!("zero extent: n_det {n_det}, image {n_rows}x{n_cols}"),
            ));
        }
        if !(det_spacing.is_finite() && det_spacing > 0.0) {
            return Err(TomoError::invalid("geometry", format!("det_spacing {det_spacing}")));
        }
        Ok(Geometry { n_angles, n_det, det_spacing, n_rows, n_cols })
    }

    pub fn delta_phi(&self) -> f64 {
        TAU / self.n_angles as f64
    }

    pub fn angle(&self, a: usize) -> f64 {
        a as f64 * self.delta_phi()
    }

    /// Signed detector offset of bin `d` from the rotation center.
    pub fn det_offset(&self, d: usize) -> f64 {
        (d as f64 - (self.n_det as f64 - 1.0) / 2.0) * self.det_spacing
    }

    /// (cos θ_a, sin θ_a) for every angle. When 4 | n_angles the table is
    /// built from the first quadrant by exact quarter-turn sign swaps, so
    /// shifting a sinogram by n_angles/4 rows agrees bitwise with rotating
    /// the volume by π/2 — the identity the consistency loss leans on.
    pub(crate) fn trig_table(&self) -> Vec<(f64, f64)> {
        let n = self.n_angles;
        let dphi = self.delta_phi();
        if n % 4 == 0 {
            let q = n / 4;
            let mut out = Vec::with_capacity(n);
            for a in 0..q {
                let th = a as f64 * dphi;
                out.push((th.cos(), th.sin()));
            }
            for k in 1..4 {
                for a in 0..q {
                    let (c, s) = out[(k - 1) * q + a];
                    out.push((-s, c));
                }
            }
            out
        } else {
            (0..n)
                .map(|a| {
                    let th = a as f64 * dphi;
                    (th.cos(), th.sin())
                })
                .collect()
        }
    }

    /// Unit-length sampling along each ray: enough centered steps to cross
    /// the slice diagonal from any direction.
    pub(crate) fn ray_steps(&self) -> (usize, f64) {
        let radius = 0.5 * (self.n_rows as f64).hypot(self.n_cols as f64) + 1.0;
        let n_steps = (2.0 * radius).ceil() as usize;
        let t0 = -((n_steps - 1) as f64) / 2.0;
        (n_steps, t0)
    }
}
