//! Value-level checks for every tape op, oracle values frozen inline.

use tensor_engine::{Tape, Tensor};

fn t5(b: usize, c: usize, d: usize, h: usize, w: usize, f: impl FnMut(usize) -> f64) -> Tensor {
    Tensor::from_fn(vec![b, c, d, h, w], f)
}

#[test]
fn conv3_zero_input_gives_zero() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(vec![1, 2, 2, 4, 4]));
    let w = tape.constant(Tensor::from_fn(vec![3, 2, 3, 3, 3], |i| (i as f64) * 0.01 - 0.2));
    let b = tape.constant(Tensor::zeros(vec![3]));
    let y = tape.conv3(x, w, b, 1, [1, 1, 1]).unwrap();
    assert_eq!(tape.value(y).shape(), &[1, 3, 2, 4, 4]);
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
}

#[test]
fn conv3_ones_with_ones_kernel_counts_neighbors() {
    // 3x3 plane of ones, 3x3 kernel of ones, in-plane pad: center sees 9,
    // corner sees 4.
    let mut tape = Tape::new();
    let x = tape.constant(t5(1, 1, 1, 3, 3, |_| 1.0));
    let w = tape.constant(t5(1, 1, 1, 3, 3, |_| 1.0));
    let b = tape.constant(Tensor::zeros(vec![1]));
    let y = tape.conv3(x, w, b, 1, [0, 1, 1]).unwrap();
    let v = tape.value(y).data();
    assert_eq!(tape.value(y).shape(), &[1, 1, 1, 3, 3]);
    assert_eq!(v[4], 9.0);
    assert_eq!(v[0], 4.0);
    assert_eq!(v[2], 4.0);
    assert_eq!(v[6], 4.0);
    assert_eq!(v[8], 4.0);
    assert_eq!(v[1], 6.0);
}

#[test]
fn conv3_identity_kernel_preserves_input() {
    let mut tape = Tape::new();
    let xv = t5(2, 1, 3, 4, 5, |i| (i as f64).sin());
    let x = tape.constant(xv.clone());
    let w = tape.constant(Tensor::new(vec![1, 1, 1, 1, 1], vec![1.0]).unwrap());
    let b = tape.constant(Tensor::zeros(vec![1]));
    let y = tape.conv3(x, w, b, 1, [0, 0, 0]).unwrap();
    assert_eq!(tape.value(y).data(), xv.data());
}

#[test]
fn conv3_channel_mismatch_names_both_shapes() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(vec![1, 3, 2, 4, 4]));
    let w = tape.constant(Tensor::zeros(vec![2, 4, 1, 3, 3]));
    let b = tape.constant(Tensor::zeros(vec![2]));
    let err = tape.conv3(x, w, b, 1, [0, 1, 1]).unwrap_err().to_string();
    assert!(err.contains("[1, 3, 2, 4, 4]") && err.contains("[2, 4, 1, 3, 3]"), "{err}");
}

#[test]
fn conv3_is_linear_in_the_input() {
    let mut tape = Tape::new();
    let a = t5(1, 2, 2, 4, 4, |i| (i as f64 * 0.7).sin());
    let bb = t5(1, 2, 2, 4, 4, |i| (i as f64 * 0.3).cos());
    let comb = Tensor::new(
        a.shape().to_vec(),
        a.data().iter().zip(bb.data()).map(|(x, y)| 2.0 * x - 0.5 * y).collect(),
    )
    .unwrap();
    let w = tape.constant(Tensor::from_fn(vec![2, 2, 1, 3, 3], |i| (i as f64 * 0.11).sin()));
    let zero_bias = tape.constant(Tensor::zeros(vec![2]));

    let na = tape.constant(a);
    let nb = tape.constant(bb);
    let nc = tape.constant(comb);
    let ya = tape.conv3(na, w, zero_bias, 1, [0, 1, 1]).unwrap();
    let yb = tape.conv3(nb, w, zero_bias, 1, [0, 1, 1]).unwrap();
    let yc = tape.conv3(nc, w, zero_bias, 1, [0, 1, 1]).unwrap();

    let lhs = tape.value(yc).data();
    for (i, v) in lhs.iter().enumerate() {
        let want = 2.0 * tape.value(ya).data()[i] - 0.5 * tape.value(yb).data()[i];
        assert!((v - want).abs() < 1e-12, "slot {i}: {v} vs {want}");
    }
}

#[test]
fn silu_fixed_points() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(vec![3], vec![0.0, -60.0, 1.0]).unwrap());
    let y = tape.silu(x);
    let v = tape.value(y).data();
    assert_eq!(v[0], 0.0);
    assert!(v[1].abs() < 1e-20, "large negative should vanish, got {}", v[1]);
    assert!((v[2] - 0.7310585786300049).abs() < 1e-15);
}

#[test]
fn group_norm_constant_input_returns_beta() {
    let mut tape = Tape::new();
    let x = tape.constant(t5(2, 4, 2, 3, 3, |_| 5.0));
    let gamma = tape.constant(Tensor::full(vec![4], 1.0));
    let beta = tape.constant(Tensor::new(vec![4], vec![0.1, 0.2, 0.3, 0.4]).unwrap());
    let y = tape.group_norm(x, gamma, beta, 2, 1e-5).unwrap();
    let v = tape.value(y);
    let vol = 2 * 3 * 3;
    for c in 0..4 {
        let want = [0.1, 0.2, 0.3, 0.4][c];
        for s in 0..vol {
            assert!((v.data()[c * vol + s] - want).abs() < 1e-9);
        }
    }
}

#[test]
fn group_norm_gamma_zero_returns_beta() {
    let mut tape = Tape::new();
    let x = tape.constant(t5(1, 2, 1, 2, 2, |i| (i as f64).cos() * 3.0));
    let gamma = tape.constant(Tensor::zeros(vec![2]));
    let beta = tape.constant(Tensor::new(vec![2], vec![-1.5, 2.5]).unwrap());
    let y = tape.group_norm(x, gamma, beta, 1, 1e-6).unwrap();
    for (i, v) in tape.value(y).data().iter().enumerate() {
        let want = if i < 4 { -1.5 } else { 2.5 };
        assert_eq!(*v, want);
    }
}

#[test]
fn group_norm_two_values_normalize_to_unit() {
    // {1, 3}: mean 2, biased var 1, so outputs approach {-1, +1} as eps -> 0.
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(vec![1, 1, 1, 1, 2], vec![1.0, 3.0]).unwrap());
    let gamma = tape.constant(Tensor::full(vec![1], 1.0));
    let beta = tape.constant(Tensor::zeros(vec![1]));
    let y = tape.group_norm(x, gamma, beta, 1, 1e-12).unwrap();
    let v = tape.value(y).data();
    assert!((v[0] + 1.0).abs() < 1e-9);
    assert!((v[1] - 1.0).abs() < 1e-9);
}

#[test]
fn group_norm_rejects_bad_group_count() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(vec![1, 6, 1, 2, 2]));
    let gamma = tape.constant(Tensor::full(vec![6], 1.0));
    let beta = tape.constant(Tensor::zeros(vec![6]));
    let err = tape.group_norm(x, gamma, beta, 4, 1e-5).unwrap_err().to_string();
    assert!(err.contains('6') && err.contains('4'), "{err}");
}

#[test]
fn resample_round_trip_on_constant() {
    let mut tape = Tape::new();
    let x = tape.constant(t5(1, 2, 3, 4, 6, |_| 2.5));
    let d = tape.down_avg2(x).unwrap();
    assert_eq!(tape.value(d).shape(), &[1, 2, 3, 2, 3]);
    let u = tape.up_nearest2(d).unwrap();
    assert_eq!(tape.value(u).shape(), &[1, 2, 3, 4, 6]);
    assert!(tape.value(u).data().iter().all(|&v| v == 2.5));
}

#[test]
fn down_avg2_averages_quads() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(vec![1, 1, 1, 2, 2], vec![0.0, 2.0, 4.0, 6.0]).unwrap());
    let y = tape.down_avg2(x).unwrap();
    assert_eq!(tape.value(y).data(), &[3.0]);
}

#[test]
fn resample_keeps_depth() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(vec![2, 3, 7, 8, 8]));
    let d = tape.down_avg2(x).unwrap();
    assert_eq!(tape.value(d).shape()[2], 7);
    let u = tape.up_nearest2(d).unwrap();
    assert_eq!(tape.value(u).shape()[2], 7);
}

#[test]
fn concat_layout_and_empty_case() {
    let mut tape = Tape::new();
    let a = tape.constant(t5(2, 2, 1, 2, 2, |i| i as f64));
    let b = tape.constant(t5(2, 1, 1, 2, 2, |i| 100.0 + i as f64));
    let y = tape.concat_channels(a, b).unwrap();
    assert_eq!(tape.value(y).shape(), &[2, 3, 1, 2, 2]);
    // batch 0: a channels then b channels
    assert_eq!(&tape.value(y).data()[0..8], &tape.value(a).data()[0..8]);
    assert_eq!(&tape.value(y).data()[8..12], &tape.value(b).data()[0..4]);
    // batch 1
    assert_eq!(&tape.value(y).data()[12..20], &tape.value(a).data()[8..16]);

    let empty = tape.constant(Tensor::zeros(vec![2, 0, 1, 2, 2]));
    let same = tape.concat_channels(a, empty).unwrap();
    assert_eq!(tape.value(same).data(), tape.value(a).data());
}

#[test]
fn spatial_gradient_constant_is_zero() {
    let mut tape = Tape::new();
    let x = tape.constant(t5(1, 2, 3, 4, 4, |_| 7.0));
    let y = tape.spatial_gradient(x).unwrap();
    assert_eq!(tape.value(y).shape(), &[1, 6, 3, 4, 4]);
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
}

#[test]
fn spatial_gradient_ramp_recovers_slope() {
    // v = 3*row: the row-difference channel is 3 away from the trailing edge.
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::from_fn(vec![1, 1, 2, 4, 4], |i| {
        let row = (i / 4) % 4;
        3.0 * row as f64
    }));
    let y = tape.spatial_gradient(x).unwrap();
    let v = tape.value(y);
    let vol = 2 * 4 * 4;
    for d in 0..2 {
        for r in 0..4 {
            for c in 0..4 {
                let idx = (d * 4 + r) * 4 + c;
                let want_h = if r < 3 { 3.0 } else { 0.0 };
                assert_eq!(v.data()[vol + idx], want_h, "h-diff at {idx}");
                assert_eq!(v.data()[idx], 0.0, "d-diff at {idx}");
                assert_eq!(v.data()[2 * vol + idx], 0.0, "w-diff at {idx}");
            }
        }
    }
}

#[test]
fn spatial_gradient_impulse_stencil() {
    // Unit impulse at (1,1,1) in 3x3x3: the forward difference along each
    // axis is +1 at the predecessor and -1 at the impulse.
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::from_fn(vec![1, 1, 3, 3, 3], |i| if i == 13 { 1.0 } else { 0.0 }));
    let y = tape.spatial_gradient(x).unwrap();
    let v = tape.value(y).data();
    let vol = 27;
    let at = |axis: usize, d: usize, h: usize, w: usize| v[axis * vol + (d * 3 + h) * 3 + w];
    assert_eq!(at(0, 0, 1, 1), 1.0);
    assert_eq!(at(0, 1, 1, 1), -1.0);
    assert_eq!(at(1, 1, 0, 1), 1.0);
    assert_eq!(at(1, 1, 1, 1), -1.0);
    assert_eq!(at(2, 1, 1, 0), 1.0);
    assert_eq!(at(2, 1, 1, 1), -1.0);
}

#[test]
fn laplacian_constant_and_ramp() {
    let mut tape = Tape::new();
    let c = tape.constant(t5(1, 1, 3, 4, 4, |_| 3.25));
    let lc = tape.laplacian(c).unwrap();
    assert!(tape.value(lc).data().iter().all(|&v| v == 0.0));

    let ramp = tape.constant(Tensor::from_fn(vec![1, 1, 3, 5, 5], |i| (i % 5) as f64));
    let lr = tape.laplacian(ramp).unwrap();
    let v = tape.value(lr);
    for d in 0..3 {
        for h in 0..5 {
            for w in 1..4 {
                assert_eq!(v.data()[(d * 5 + h) * 5 + w], 0.0, "interior ({d},{h},{w})");
            }
        }
    }
}

#[test]
fn laplacian_impulse_stencil() {
    let mut tape = Tape::new();
    let n = 5;
    let center = (2 * n + 2) * n + 2;
    let x = tape.constant(Tensor::from_fn(vec![1, 1, n, n, n], |i| if i == center { 1.0 } else { 0.0 }));
    let y = tape.laplacian(x).unwrap();
    let v = tape.value(y).data();
    assert_eq!(v[center], -6.0);
    for off in [
        (n * n) as isize,
        -((n * n) as isize),
        n as isize,
        -(n as isize),
        1,
        -1,
    ] {
        assert_eq!(v[(center as isize + off) as usize], 1.0, "neighbor {off}");
    }
}

#[test]
fn select_batch_and_per_batch_scale() {
    let mut tape = Tape::new();
    let x = tape.constant(t5(3, 1, 1, 2, 2, |i| i as f64));
    let s = tape.select_batch(x, 1).unwrap();
    assert_eq!(tape.value(s).shape(), &[1, 1, 1, 2, 2]);
    assert_eq!(tape.value(s).data(), &[4.0, 5.0, 6.0, 7.0]);

    let scaled = tape.per_batch_scale(x, &[1.0, 10.0, 0.5]).unwrap();
    assert_eq!(tape.value(scaled).data()[0], 0.0);
    assert_eq!(tape.value(scaled).data()[4], 40.0);
    assert_eq!(tape.value(scaled).data()[8], 4.0);
}

#[test]
fn reductions_and_scalar_ops() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(vec![4], vec![1.0, -2.0, 3.0, 0.5]).unwrap());
    let s = tape.sum_all(x);
    assert_eq!(tape.value(s).item().unwrap(), 2.5);
    let m = tape.mean_all(x);
    assert_eq!(tape.value(m).item().unwrap(), 0.625);
    let q = tape.sum_squares(x);
    assert_eq!(tape.value(q).item().unwrap(), 14.25);
    let sc = tape.scale(x, 2.0);
    assert_eq!(tape.value(sc).data(), &[2.0, -4.0, 6.0, 1.0]);
    let ad = tape.add_scalar(x, 1.0);
    assert_eq!(tape.value(ad).data(), &[2.0, -1.0, 4.0, 1.5]);
    let t = tape.tanh(x);
    assert!((tape.value(t).data()[0] - 0.7615941559557649).abs() < 1e-15);
    let a = tape.abs(x);
    assert_eq!(tape.value(a).data(), &[1.0, 2.0, 3.0, 0.5]);
}
