//! Rotational-consistency residual tying a reconstruction to measured
//! projections: r(x̂) = Σᵢ ‖T_{φᵢ} y₀ − A R_{φᵢ} x̂‖², with T the circular
//! angular shift, R in-plane rotation, and A the projector, all sharing one
//! geometry. Because the projector/backprojector and the rotation/its
//! transpose are matched pairs, the analytic gradient
//! 2·Σᵢ R_{φᵢ}ᵀ Aᵀ (A R_{φᵢ} x̂ − T_{φᵢ} y₀) is exact for the discrete
//! operators, not an approximation of a continuous one.

use std::rc::Rc;

use tensor_engine::{CustomOp, NodeId, Tape, Tensor};

use crate::geometry::Geometry;
use crate::project::{backproject_raw, project_raw};
use crate::rotate::{rotate_adjoint_raw, rotate_raw};
use crate::shift::shift_raw;
use crate::units::Unit;
use crate::volume::{SinogramStack, Volume};
use crate::{Result, TomoError};

fn check_pair(xhat: &Volume, y0: &SinogramStack) -> Result<()> {
    if xhat.unit() != Unit::Attenuation {
        return Err(TomoError::invalid(
            "equivariance",
            "expects an attenuation-valued volume (convert first)",
        ));
    }
    let g = y0.geometry();
    if !xhat.matches(g) || xhat.depth() != y0.depth() {
        return Err(TomoError::shape(
            "equivariance",
            format!(
                "volume {}x{}x{} vs sinogram depth {} geometry {}x{}",
                xhat.depth(),
                xhat.rows(),
                xhat.cols(),
                y0.depth(),
                g.n_rows,
                g.n_cols
            ),
        ));
    }
    Ok(())
}

/// Σᵢ ‖T_{φᵢ} y₀ − A R_{φᵢ} x̂‖²₂.
pub fn equivariance_residual(xhat: &Volume, y0: &SinogramStack, angles: &[f64]) -> Result<f64> {
    check_pair(xhat, y0)?;
    let g = *y0.geometry();
    let depth = xhat.depth();
    let mut total = 0.0;
    for &phi in angles {
        let rotated = rotate_raw(xhat.values().data(), depth, g.n_rows, g.n_cols, phi, 0.0);
        let projected = project_raw(&rotated, depth, &g);
        let target = shift_raw(y0.values().data(), depth, g.n_angles, g.n_det, phi / g.delta_phi());
        total += projected
            .iter()
            .zip(&target)
            .map(|(p, t)| (t - p) * (t - p))
            .sum::<f64>();
    }
    Ok(total)
}

/// Residual along with its exact gradient w.r.t. the volume, shaped like it.
pub fn equivariance_gradient(
    xhat: &Volume,
    y0: &SinogramStack,
    angles: &[f64],
) -> Result<(f64, Tensor)> {
    check_pair(xhat, y0)?;
    let g = *y0.geometry();
    let depth = xhat.depth();
    let mut total = 0.0;
    let mut grad = vec![0.0; xhat.values().numel()];
    for &phi in angles {
        let rotated = rotate_raw(xhat.values().data(), depth, g.n_rows, g.n_cols, phi, 0.0);
        let projected = project_raw(&rotated, depth, &g);
        let target = shift_raw(y0.values().data(), depth, g.n_angles, g.n_det, phi / g.delta_phi());
        let diff: Vec<f64> = projected.iter().zip(&target).map(|(p, t)| p - t).collect();
        total += diff.iter().map(|d| d * d).sum::<f64>();
        let bp = backproject_raw(&diff, depth, &g);
        let pulled = rotate_adjoint_raw(&bp, depth, g.n_rows, g.n_cols, phi);
        for (gv, p) in grad.iter_mut().zip(&pulled) {
            *gv += 2.0 * p;
        }
    }
    Ok((total, Tensor::new(xhat.values().shape().to_vec(), grad)?))
}

/// In-plane rotation of a [..., rows, cols] slice stack as a tape op (zero
/// exterior fill, so it is purely linear and its vjp is the exact transpose).
pub struct RotateSlices {
    pub depth: usize,
    pub rows: usize,
    pub cols: usize,
    pub phi: f64,
}

impl CustomOp for RotateSlices {
    fn name(&self) -> &'static str {
        "rotate_slices"
    }

    fn apply(&self, x: &Tensor) -> tensor_engine::Result<Tensor> {
        let want = self.depth * self.rows * self.cols;
        if x.numel() != want {
            return Err(tensor_engine::EngineError::shape(
                "rotate_slices",
                format!("expected {} values, got {:?}", want, x.shape()),
            ));
        }
        let out = rotate_raw(x.data(), self.depth, self.rows, self.cols, self.phi, 0.0);
        Tensor::new(x.shape().to_vec(), out)
    }

    fn vjp(&self, grad_out: &Tensor, input_shape: &[usize]) -> tensor_engine::Result<Tensor> {
        let out = rotate_adjoint_raw(grad_out.data(), self.depth, self.rows, self.cols, self.phi);
        Tensor::new(input_shape.to_vec(), out)
    }
}

/// Forward projection of a [..., rows, cols] slice stack as a tape op; the
/// vjp is the matched backprojector.
pub struct ProjectSlices {
    pub depth: usize,
    pub geom: Geometry,
}

impl CustomOp for ProjectSlices {
    fn name(&self) -> &'static str {
        "project_slices"
    }

    fn apply(&self, x: &Tensor) -> tensor_engine::Result<Tensor> {
        let want = self.depth * self.geom.n_rows * self.geom.n_cols;
        if x.numel() != want {
            return Err(tensor_engine::EngineError::shape(
                "project_slices",
                format!("expected {} values, got {:?}", want, x.shape()),
            ));
        }
        let out = project_raw(x.data(), self.depth, &self.geom);
        Tensor::new(vec![self.depth, self.geom.n_angles, self.geom.n_det], out)
    }

    fn vjp(&self, grad_out: &Tensor, input_shape: &[usize]) -> tensor_engine::Result<Tensor> {
        let out = backproject_raw(grad_out.data(), self.depth, &self.geom);
        Tensor::new(input_shape.to_vec(), out)
    }
}

/// Builds the residual on the tape from a *normalized-unit* volume node
/// (any shape holding depth·rows·cols values): converts to attenuation via
/// the affine map μ = 0.03·(n + 1), then accumulates the per-angle terms.
/// Returns a scalar node; scaling (λ, normalizers) is the caller's business.
pub fn equivariance_loss_node(
    tape: &mut Tape,
    xhat_normalized: NodeId,
    y0: &SinogramStack,
    angles: &[f64],
) -> Result<NodeId> {
    if angles.is_empty() {
        return Err(TomoError::invalid("equivariance", "empty angle list"));
    }
    let g = *y0.geometry();
    let depth = y0.depth();
    let scaled = tape.scale(xhat_normalized, 0.03);
    let att = tape.add_scalar(scaled, 0.03);
    let mut total: Option<NodeId> = None;
    for &phi in angles {
        let rot = tape.custom(
            att,
            Rc::new(RotateSlices { depth, rows: g.n_rows, cols: g.n_cols, phi }),
        )?;
        let proj = tape.custom(rot, Rc::new(ProjectSlices { depth, geom: g }))?;
        let target = shift_raw(y0.values().data(), depth, g.n_angles, g.n_det, phi / g.delta_phi());
        let target = tape.constant(Tensor::new(vec![depth, g.n_angles, g.n_det], target)?);
        let diff = tape.sub(proj, target)?;
        let term = tape.sum_squares(diff);
        total = Some(match total {
            Some(t) => tape.add(t, term)?,
            None => term,
        });
    }
    Ok(total.expect("angles checked non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward_project;
    use tensor_engine::rng;

    fn smooth_disk_volume(n: usize, depth: usize) -> Volume {
        // Gaussian bump well inside the inscribed circle
        let c = (n as f64 - 1.0) / 2.0;
        let mut data = vec![0.0; depth * n * n];
        for s in 0..depth {
            for r in 0..n {
                for col in 0..n {
                    let dx = col as f64 - c;
                    let dy = r as f64 - c;
                    let r2 = dx * dx + dy * dy;
                    let sigma = n as f64 / 8.0;
                    data[(s * n + r) * n + col] =
                        0.04 * (1.0 + s as f64 * 0.3) * (-r2 / (2.0 * sigma * sigma)).exp();
                }
            }
        }
        Volume::from_parts(depth, n, n, data, Unit::Attenuation).unwrap()
    }

    #[test]
    fn zero_angle_residual_of_consistent_pair_is_zero() {
        let g = Geometry::new(16, 24, 1.0, 16, 16).unwrap();
        let x = smooth_disk_volume(16, 2);
        let y = forward_project(&x, &g).unwrap();
        let r = equivariance_residual(&x, &y, &[0.0]).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn zero_volume_residual_is_sinogram_norm() {
        let g = Geometry::new(16, 24, 1.0, 16, 16).unwrap();
        let x = smooth_disk_volume(16, 1);
        let y = forward_project(&x, &g).unwrap();
        let zero = Volume::filled(1, 16, 16, 0.0, Unit::Attenuation).unwrap();
        let r = equivariance_residual(&zero, &y, &[0.0]).unwrap();
        assert!((r - y.norm_sq()).abs() < 1e-12 * y.norm_sq());
    }

    #[test]
    fn wrong_units_are_rejected() {
        let g = Geometry::new(8, 12, 1.0, 8, 8).unwrap();
        let y = SinogramStack::zeros(1, g);
        let x = Volume::filled(1, 8, 8, 0.0, Unit::Normalized).unwrap();
        assert!(equivariance_residual(&x, &y, &[0.0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = Geometry::new(12, 12, 1.0, 9, 9).unwrap();
        let x = smooth_disk_volume(9, 1);
        let y = forward_project(&smooth_disk_volume(9, 1), &g).unwrap();
        // make x and the target inconsistent so the gradient is nonzero
        let mut bumped = x.values().data().to_vec();
        let mut r = rng::stream(21, "eq-grad");
        for v in &mut bumped {
            *v += 0.002 * rng::uniform(&mut r, vec![1], -1.0, 1.0).data()[0];
        }
        let x = Volume::from_parts(1, 9, 9, bumped, Unit::Attenuation).unwrap();
        let angles = [0.9, 2.4];
        let (_, grad) = equivariance_gradient(&x, &y, &angles).unwrap();
        let mut probe = |vals: &[f64]| {
            let v = Volume::from_parts(1, 9, 9, vals.to_vec(), Unit::Attenuation).unwrap();
            equivariance_residual(&v, &y, &angles).unwrap()
        };
        let coords = tensor_engine::gradcheck::sample_coords(81, 12);
        let worst = tensor_engine::gradcheck::check_coords(
            &mut probe,
            x.values().data(),
            grad.data(),
            &coords,
        );
        assert!(worst < 1e-6, "worst rel gap {worst}");
    }

    #[test]
    fn tape_node_agrees_with_plain_gradient() {
        let g = Geometry::new(12, 12, 1.0, 9, 9).unwrap();
        let x_att = smooth_disk_volume(9, 1);
        let y = forward_project(&x_att, &g).unwrap();
        // the tape path takes normalized values and converts internally
        let x_norm = x_att.to_unit(Unit::Normalized);
        let angles = [0.0, 1.1];

        let mut tape = Tape::new();
        let xn = tape.param(x_norm.values().clone());
        let loss = equivariance_loss_node(&mut tape, xn, &y, &angles).unwrap();
        let loss_val = tape.value(loss).item().unwrap();
        let grads = tape.backward(loss).unwrap();
        let tape_grad = grads.get(xn).unwrap();

        let plain = equivariance_residual(&x_norm.to_unit(Unit::Attenuation), &y, &angles).unwrap();
        assert!((loss_val - plain).abs() <= 1e-9 * plain.max(1e-12), "{loss_val} vs {plain}");

        let (_, g_att) = equivariance_gradient(&x_norm.to_unit(Unit::Attenuation), &y, &angles).unwrap();
        // chain rule through μ = 0.03·n + 0.03; tolerance is relative to the
        // gradient's overall scale so entries that are numerically zero in
        // both paths (summed in different orders) still compare equal
        let scale = g_att.max_abs().max(1e-12);
        for (a, b) in tape_grad.data().iter().zip(g_att.data()) {
            assert!((a - 0.03 * b).abs() < 1e-9 * scale, "{a} vs {}", 0.03 * b);
        }
    }
}
