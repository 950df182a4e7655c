use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use tensor_engine::Tensor;

use crate::geometry::Geometry;
use crate::interp;
use crate::units::Unit;
use crate::volume::{SinogramStack, Volume};
use crate::{Result, TomoError};

/// Forward/backprojection invocations since process start, one tick per
/// stack-level call. Monotone; callers that must not touch the projector
/// assert a zero delta around their critical section.
static PROJECTOR_CALLS: AtomicU64 = AtomicU64::new(0);

pub fn projector_calls() -> u64 {
    PROJECTOR_CALLS.load(Ordering::Relaxed)
}

/// Ray-driven line integrals: for every slice, angle, and detector bin, sums
/// bilinear samples taken at unit steps along the ray (so values carry
/// attenuation·length units). Linear in the volume.
pub fn forward_project(v: &Volume, g: &Geometry) -> Result<SinogramStack> {
    if v.unit() == Unit::Hu {
        return Err(TomoError::invalid(
            "forward_project",
            "HU volumes have a nonzero exterior; convert to attenuation or normalized first",
        ));
    }
    if !v.matches(g) {
        return Err(TomoError::shape(
            "forward_project",
            format!("volume {}x{} vs geometry {}x{}", v.rows(), v.cols(), g.n_rows, g.n_cols),
        ));
    }
    let out = project_raw(v.values().data(), v.depth(), g);
    let values = Tensor::new(vec![v.depth(), g.n_angles, g.n_det], out)?;
    SinogramStack::new(values, *g)
}

/// Exact algebraic transpose of [`forward_project`]: scatters each sinogram
/// bin back along its ray with the same bilinear weights.
pub fn backproject(s: &SinogramStack) -> Result<Volume> {
    let g = *s.geometry();
    let out = backproject_raw(s.values().data(), s.depth(), &g);
    Volume::from_parts(s.depth(), g.n_rows, g.n_cols, out, Unit::Attenuation)
}

pub(crate) fn project_raw(vol: &[f64], depth: usize, g: &Geometry) -> Vec<f64> {
    PROJECTOR_CALLS.fetch_add(1, Ordering::Relaxed);
    let (rows, cols) = (g.n_rows, g.n_cols);
    let plane = rows * cols;
    let (na, nd) = (g.n_angles, g.n_det);
    let trig = g.trig_table();
    let (n_steps, t0) = g.ray_steps();
    let cy = (rows as f64 - 1.0) / 2.0;
    let cx = (cols as f64 - 1.0) / 2.0;

    let mut out = vec![0.0; depth * na * nd];
    out.par_chunks_mut(nd).enumerate().for_each(|(idx, det_row)| {
        let s_i = idx / na;
        let a = idx % na;
        let (cos_t, sin_t) = trig[a];
        let slice = &vol[s_i * plane..(s_i + 1) * plane];
        for (d, out_bin) in det_row.iter_mut().enumerate() {
            let off = g.det_offset(d);
            let bx = off * cos_t;
            let by = off * sin_t;
            let mut acc = 0.0;
            for i in 0..n_steps {
                let t = t0 + i as f64;
                let x = bx - t * sin_t;
                let y = by + t * cos_t;
                acc += interp::gather(slice, rows, cols, y + cy, x + cx, 0.0);
            }
            *out_bin = acc;
        }
    });
    out
}

pub(crate) fn backproject_raw(sino: &[f64], depth: usize, g: &Geometry) -> Vec<f64> {
    PROJECTOR_CALLS.fetch_add(1, Ordering::Relaxed);
    let (rows, cols) = (g.n_rows, g.n_cols);
    let plane = rows * cols;
    let (na, nd) = (g.n_angles, g.n_det);
    let trig = g.trig_table();
    let (n_steps, t0) = g.ray_steps();
    let cy = (rows as f64 - 1.0) / 2.0;
    let cx = (cols as f64 - 1.0) / 2.0;

    let mut out = vec![0.0; depth * plane];
    // scatter writes stay inside one slice, so parallelism is per slice and
    // the (angle, bin, step) order within a slice is fixed
    out.par_chunks_mut(plane).enumerate().for_each(|(s_i, slice)| {
        let base = s_i * na * nd;
        for a in 0..na {
            let (cos_t, sin_t) = trig[a];
            for d in 0..nd {
                let val = sino[base + a * nd + d];
                if val == 0.0 {
                    continue;
                }
                let off = g.det_offset(d);
                let bx = off * cos_t;
                let by = off * sin_t;
                for i in 0..n_steps {
                    let t = t0 + i as f64;
                    let x = bx - t * sin_t;
                    let y = by + t * cos_t;
                    interp::scatter(slice, rows, cols, y + cy, x + cx, val);
                }
            }
        }
    });
    out
}
