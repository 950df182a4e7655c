use tensor_engine::{NodeId, Tape, Tensor};

use crate::{DiffError, Result, Schedule};

fn check_same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(DiffError::invalid(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// z_t = √α̅_t · z0 + √(1−α̅_t) · ε.
pub fn q_sample(z0: &Tensor, t: usize, eps: &Tensor, sched: &Schedule) -> Result<Tensor> {
    check_same_shape("q_sample", z0, eps)?;
    if t == 0 {
        return Err(DiffError::invalid("q_sample", "t = 0 is the identity; draw t in [1, T]"));
    }
    let a = sched.alpha_bar(t)?;
    let (ca, ce) = (a.sqrt(), (1.0 - a).sqrt());
    let data = z0.data().iter().zip(eps.data()).map(|(z, e)| ca * z + ce * e).collect();
    Ok(Tensor::new(z0.shape().to_vec(), data)?)
}

/// ẑ0 = (z_t − √(1−α̅_t) · ε̂) / √α̅_t — the exact inverse of `q_sample`
/// when ε̂ is the noise actually applied.
pub fn recover_z0(z_t: &Tensor, t: usize, eps_hat: &Tensor, sched: &Schedule) -> Result<Tensor> {
    check_same_shape("recover_z0", z_t, eps_hat)?;
    if t == 0 {
        return Err(DiffError::invalid("recover_z0", "t = 0 is the identity; use t in [1, T]"));
    }
    let a = sched.alpha_bar(t)?;
    let (ra, ce) = (1.0 / a.sqrt(), (1.0 - a).sqrt());
    let data = z_t.data().iter().zip(eps_hat.data()).map(|(z, e)| (z - ce * e) * ra).collect();
    Ok(Tensor::new(z_t.shape().to_vec(), data)?)
}

/// Tape form of `q_sample` with one timestep per batch element.
pub fn q_sample_node(
    tape: &mut Tape,
    z0: NodeId,
    ts: &[usize],
    eps: NodeId,
    sched: &Schedule,
) -> Result<NodeId> {
    let (ca, ce) = per_batch_coefs(ts, sched, false)?;
    let a = tape.per_batch_scale(z0, &ca)?;
    let e = tape.per_batch_scale(eps, &ce)?;
    Ok(tape.add(a, e)?)
}

/// Tape form of `recover_z0` with one timestep per batch element.
pub fn recover_z0_node(
    tape: &mut Tape,
    z_t: NodeId,
    ts: &[usize],
    eps_hat: NodeId,
    sched: &Schedule,
) -> Result<NodeId> {
    let (ca, ce) = per_batch_coefs(ts, sched, true)?;
    let z = tape.per_batch_scale(z_t, &ca)?;
    let e = tape.per_batch_scale(eps_hat, &ce)?;
    Ok(tape.sub(z, e)?)
}

/// (√α̅ and √(1−α̅)) per element — or their recover-form counterparts
/// (1/√α̅ and √(1−α̅)/√α̅) when `invert` is set.
fn per_batch_coefs(ts: &[usize], sched: &Schedule, invert: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    if ts.is_empty() {
        return Err(DiffError::invalid("per_batch_coefs", "empty timestep list"));
    }
    let mut ca = Vec::with_capacity(ts.len());
    let mut ce = Vec::with_capacity(ts.len());
    for &t in ts {
        if t == 0 {
            return Err(DiffError::invalid("per_batch_coefs", "t = 0; draw t in [1, T]"));
        }
        let a = sched.alpha_bar(t)?;
        if invert {
            ca.push(1.0 / a.sqrt());
            ce.push((1.0 - a).sqrt() / a.sqrt());
        } else {
            ca.push(a.sqrt());
            ce.push((1.0 - a).sqrt());
        }
    }
    Ok((ca, ce))
}

/// One deterministic DDIM update from t to t_prev (< t; t_prev = 0 targets
/// the clean-data endpoint α̅_0 = 1):
/// z_{t_prev} = √α̅_{t_prev} · ẑ0 + √(1−α̅_{t_prev}) · ε̂.
pub fn ddim_step(
    z_t: &Tensor,
    t: usize,
    t_prev: usize,
    eps_hat: &Tensor,
    sched: &Schedule,
) -> Result<Tensor> {
    if t_prev >= t {
        return Err(DiffError::invalid(
            "ddim_step",
            format!("t_prev = {t_prev} must be < t = {t}"),
        ));
    }
    let z0_hat = recover_z0(z_t, t, eps_hat, sched)?;
    let a_prev = sched.alpha_bar(t_prev)?;
    let (ca, ce) = (a_prev.sqrt(), (1.0 - a_prev).sqrt());
    let data = z0_hat
        .data()
        .iter()
        .zip(eps_hat.data())
        .map(|(z, e)| ca * z + ce * e)
        .collect();
    Ok(Tensor::new(z_t.shape().to_vec(), data)?)
}

/// Mean squared error between target and predicted noise, as a scalar node.
pub fn ddpm_loss_node(tape: &mut Tape, eps: NodeId, eps_hat: NodeId) -> Result<NodeId> {
    let n = tape.value(eps).numel();
    check_same_shape("ddpm_loss", tape.value(eps), tape.value(eps_hat))?;
    let diff = tape.sub(eps, eps_hat)?;
    let ss = tape.sum_squares(diff);
    Ok(tape.scale(ss, 1.0 / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::make_schedule;
    use tensor_engine::rng;

    fn sched() -> Schedule {
        make_schedule(50, 1e-3, 0.04).unwrap()
    }

    #[test]
    fn zero_noise_scales_by_sqrt_alpha_bar() {
        let s = sched();
        let z0 = Tensor::new(vec![2, 2], vec![1.0, -2.0, 0.5, 4.0]).unwrap();
        let eps = Tensor::zeros(vec![2, 2]);
        let zt = q_sample(&z0, 7, &eps, &s).unwrap();
        let c = s.alpha_bar(7).unwrap().sqrt();
        for (a, b) in zt.data().iter().zip(z0.data()) {
            assert_eq!(*a, c * b);
        }
        // and recover with a zero estimate divides it back out
        let back = recover_z0(&zt, 7, &eps, &s).unwrap();
        for (a, b) in back.data().iter().zip(z0.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn recover_inverts_q_sample_with_shared_noise() {
        let s = sched();
        let mut r = rng::stream(3, "t");
        for trial in 0..50 {
            let t = 1 + (trial % s.t_max());
            let z0 = rng::standard_normal(&mut r, vec![3, 5]);
            let eps = rng::standard_normal(&mut r, vec![3, 5]);
            let zt = q_sample(&z0, t, &eps, &s).unwrap();
            let back = recover_z0(&zt, t, &eps, &s).unwrap();
            let worst = back
                .data()
                .iter()
                .zip(z0.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-12, "t = {t}: {worst:.2e}");
        }
    }

    #[test]
    fn node_forms_match_the_plain_forms_per_element() {
        let s = sched();
        let mut r = rng::stream(4, "t");
        let z0 = rng::standard_normal(&mut r, vec![2, 3, 1, 2, 2]);
        let eps = rng::standard_normal(&mut r, vec![2, 3, 1, 2, 2]);
        let ts = [5usize, 40];

        let mut tape = Tape::new();
        let a = tape.constant(z0.clone());
        let e = tape.constant(eps.clone());
        let zt = q_sample_node(&mut tape, a, &ts, e, &s).unwrap();
        let back = recover_z0_node(&mut tape, zt, &ts, e, &s).unwrap();

        let half = z0.numel() / 2;
        for (b, &t) in ts.iter().enumerate() {
            let z0_b = Tensor::new(vec![half], z0.data()[b * half..(b + 1) * half].to_vec()).unwrap();
            let eps_b = Tensor::new(vec![half], eps.data()[b * half..(b + 1) * half].to_vec()).unwrap();
            let want = q_sample(&z0_b, t, &eps_b, &s).unwrap();
            assert_eq!(tape.value(zt).data()[b * half..(b + 1) * half], *want.data());
        }
        for (a, b) in tape.value(back).data().iter().zip(z0.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_ddim_step_to_zero_with_true_noise_returns_z0() {
        let s = sched();
        let mut r = rng::stream(5, "t");
        let z0 = rng::standard_normal(&mut r, vec![4, 4]);
        let eps = rng::standard_normal(&mut r, vec![4, 4]);
        for t in [1, 13, 50] {
            let zt = q_sample(&z0, t, &eps, &s).unwrap();
            let out = ddim_step(&zt, t, 0, &eps, &s).unwrap();
            let worst = out
                .data()
                .iter()
                .zip(z0.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-12, "t = {t}: {worst:.2e}");
        }
    }

    #[test]
    fn ddim_ordering_and_time_bounds_are_enforced() {
        let s = sched();
        let z = Tensor::zeros(vec![2, 2]);
        assert!(ddim_step(&z, 5, 5, &z, &s).is_err());
        assert!(ddim_step(&z, 5, 9, &z, &s).is_err());
        assert!(ddim_step(&z, 51, 0, &z, &s).is_err());
        assert!(q_sample(&z, 0, &z, &s).is_err());
        assert!(q_sample(&z, 51, &z, &s).is_err());
        assert!(recover_z0(&z, 0, &z, &s).is_err());
        let short = Tensor::zeros(vec![2, 1]);
        assert!(q_sample(&z, 5, &short, &s).is_err());
    }

    #[test]
    fn mse_node_matches_a_hand_value_and_a_zero_oracle() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = tape.constant(Tensor::new(vec![2, 2], vec![0.0, 2.0, 5.0, 3.0]).unwrap());
        let l = ddpm_loss_node(&mut tape, a, b).unwrap();
        // (1 + 0 + 4 + 1) / 4
        assert!((tape.value(l).item().unwrap() - 1.5).abs() < 1e-15);
        let z = ddpm_loss_node(&mut tape, a, a).unwrap();
        assert_eq!(tape.value(z).item().unwrap(), 0.0);
    }
}
