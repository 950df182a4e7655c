//! Every differentiable op against central finite differences. The loss used
//! almost everywhere is sum((op(x) - c)^2) with a fixed random c, which feeds
//! each output element a distinct upstream gradient.

use std::rc::Rc;

use tensor_engine::gradcheck::{check_coords, rel_gap, sample_coords};
use tensor_engine::{rng, CustomOp, EngineError, NodeId, Tape, Tensor};

const OP_TOL: f64 = 1e-6;

/// Registers `x0` as the tape's param, builds the loss via `build`, and
/// compares the analytic gradient against central differences at a spread of
/// coordinates.
fn fd_check(name: &str, x0: &Tensor, build: &dyn Fn(&mut Tape, NodeId) -> NodeId, tol: f64) {
    let mut tape = Tape::new();
    let shape = x0.shape().to_vec();
    let param = tape.param(x0.clone());
    let loss = build(&mut tape, param);
    let grads = tape.backward(loss).unwrap();
    let analytic = grads.get(param).expect("param gradient").data().to_vec();

    let mut f = |v: &[f64]| {
        let mut t = Tape::new();
        let p = t.param(Tensor::new(shape.clone(), v.to_vec()).unwrap());
        let loss = build(&mut t, p);
        t.value(loss).item().unwrap()
    };
    let coords = sample_coords(x0.numel(), 24);
    let worst = check_coords(&mut f, x0.data(), &analytic, &coords);
    assert!(worst < tol, "{name}: worst relative gap {worst:.3e} >= {tol:.0e}");
}

#[test]
fn conv3_gradients_match_fd() {
    let mut r = rng::stream(11, "gradcheck");
    let x0 = rng::standard_normal(&mut r, vec![2, 2, 2, 4, 4]);
    let w0 = rng::standard_normal(&mut r, vec![3, 2, 3, 3, 3]);
    let b0 = rng::standard_normal(&mut r, vec![3]);
    let c = rng::standard_normal(&mut r, vec![2, 3, 2, 4, 4]);

    // input gradient
    {
        let (w0, b0, c) = (w0.clone(), b0.clone(), c.clone());
        fd_check("conv3/x", &x0, &move |tape, x| {
            let w = tape.constant(w0.clone());
            let b = tape.constant(b0.clone());
            let y = tape.conv3(x, w, b, 1, [1, 1, 1]).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    // weight gradient
    {
        let (x0c, b0, c) = (x0.clone(), b0.clone(), c.clone());
        fd_check("conv3/w", &w0, &move |tape, w| {
            let x = tape.constant(x0c.clone());
            let b = tape.constant(b0.clone());
            let y = tape.conv3(x, w, b, 1, [1, 1, 1]).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    // bias gradient
    {
        let (x0c, w0, c) = (x0.clone(), w0.clone(), c.clone());
        fd_check("conv3/b", &b0, &move |tape, b| {
            let x = tape.constant(x0c.clone());
            let w = tape.constant(w0.clone());
            let y = tape.conv3(x, w, b, 1, [1, 1, 1]).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
}

#[test]
fn conv3_stride2_gradient_matches_fd() {
    let mut r = rng::stream(12, "gradcheck");
    let x0 = rng::standard_normal(&mut r, vec![1, 1, 3, 6, 6]);
    let w0 = rng::standard_normal(&mut r, vec![2, 1, 3, 3, 3]);
    let b0 = rng::standard_normal(&mut r, vec![2]);
    let c = rng::standard_normal(&mut r, vec![1, 2, 2, 3, 3]);
    fd_check("conv3/stride2", &x0, &move |tape, x| {
        let w = tape.constant(w0.clone());
        let b = tape.constant(b0.clone());
        let y = tape.conv3(x, w, b, 2, [1, 1, 1]).unwrap();
        let cc = tape.constant(c.clone());
        let d = tape.sub(y, cc).unwrap();
        tape.sum_squares(d)
    }, OP_TOL);
}

#[test]
fn group_norm_gradients_match_fd() {
    let mut r = rng::stream(13, "gradcheck");
    let x0 = rng::standard_normal(&mut r, vec![2, 4, 2, 3, 3]);
    let g0 = rng::uniform(&mut r, vec![4], 0.5, 1.5);
    let be0 = rng::standard_normal(&mut r, vec![4]);
    let c = rng::standard_normal(&mut r, vec![2, 4, 2, 3, 3]);

    {
        let (g0, be0, c) = (g0.clone(), be0.clone(), c.clone());
        fd_check("group_norm/x", &x0, &move |tape, x| {
            let ga = tape.constant(g0.clone());
            let be = tape.constant(be0.clone());
            let y = tape.group_norm(x, ga, be, 2, 1e-5).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    {
        let (x0c, be0, c) = (x0.clone(), be0.clone(), c.clone());
        fd_check("group_norm/gamma", &g0, &move |tape, ga| {
            let x = tape.constant(x0c.clone());
            let be = tape.constant(be0.clone());
            let y = tape.group_norm(x, ga, be, 2, 1e-5).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    {
        let (x0c, g0, c) = (x0.clone(), g0.clone(), c.clone());
        fd_check("group_norm/beta", &be0, &move |tape, be| {
            let x = tape.constant(x0c.clone());
            let ga = tape.constant(g0.clone());
            let y = tape.group_norm(x, ga, be, 2, 1e-5).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
}

#[test]
fn pointwise_and_structural_op_gradients_match_fd() {
    let mut r = rng::stream(14, "gradcheck");

    let x0 = rng::standard_normal(&mut r, vec![1, 2, 2, 4, 4]);
    let c5 = rng::standard_normal(&mut r, vec![1, 2, 2, 4, 4]);

    // silu
    {
        let c = c5.clone();
        fd_check("silu", &x0, &move |tape, x| {
            let y = tape.silu(x);
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    // tanh
    {
        let c = c5.clone();
        fd_check("tanh", &x0, &move |tape, x| {
            let y = tape.tanh(x);
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    // abs: keep probes away from the kink
    {
        let c = c5.clone();
        let far = x0.map(|v| if v.abs() < 0.2 { v.signum() * 0.2 + v } else { v });
        fd_check("abs", &far, &move |tape, x| {
            let y = tape.abs(x);
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    // add and scale together
    {
        let o = rng::standard_normal(&mut r, vec![1, 2, 2, 4, 4]);
        let c = c5.clone();
        fd_check("add+scale+add_scalar", &x0, &move |tape, x| {
            let on = tape.constant(o.clone());
            let y = tape.add(x, on).unwrap();
            let y = tape.scale(y, -1.7);
            let y = tape.add_scalar(y, 0.3);
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    // down_avg2 / up_nearest2
    {
        let c = rng::standard_normal(&mut r, vec![1, 2, 2, 2, 2]);
        fd_check("down_avg2", &x0, &move |tape, x| {
            let y = tape.down_avg2(x).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    {
        let c = rng::standard_normal(&mut r, vec![1, 2, 2, 8, 8]);
        fd_check("up_nearest2", &x0, &move |tape, x| {
            let y = tape.up_nearest2(x).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    // spatial_gradient
    {
        let c = rng::standard_normal(&mut r, vec![1, 6, 2, 4, 4]);
        fd_check("spatial_gradient", &x0, &move |tape, x| {
            let y = tape.spatial_gradient(x).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    // laplacian
    {
        let c = c5.clone();
        fd_check("laplacian", &x0, &move |tape, x| {
            let y = tape.laplacian(x).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    // concat_channels: gradient must route to both inputs; param is the left one
    {
        let other = rng::standard_normal(&mut r, vec![1, 3, 2, 4, 4]);
        let c = rng::standard_normal(&mut r, vec![1, 5, 2, 4, 4]);
        fd_check("concat_channels", &x0, &move |tape, x| {
            let o = tape.constant(other.clone());
            let y = tape.concat_channels(x, o).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    {
        let x3 = rng::standard_normal(&mut r, vec![3, 1, 1, 2, 2]);
        let c = rng::standard_normal(&mut r, vec![1, 1, 1, 2, 2]);
        fd_check("select_batch", &x3, &move |tape, x| {
            let y = tape.select_batch(x, 2).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    {
        let x3 = rng::standard_normal(&mut r, vec![3, 1, 1, 2, 2]);
        let c = rng::standard_normal(&mut r, vec![3, 1, 1, 2, 2]);
        fd_check("per_batch_scale", &x3, &move |tape, x| {
            let y = tape.per_batch_scale(x, &[0.5, -1.5, 2.0]).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    // broadcast_channel_add: check the embedding side (the broadcast one)
    {
        let e0 = rng::standard_normal(&mut r, vec![1, 2]);
        let c = c5.clone();
        let x0c = x0.clone();
        fd_check("broadcast_channel_add/e", &e0, &move |tape, e| {
            let x = tape.constant(x0c.clone());
            let y = tape.broadcast_channel_add(x, e).unwrap();
            let cc = tape.constant(c.clone());
            let d = tape.sub(y, cc).unwrap();
            tape.sum_squares(d)
        }, OP_TOL);
    }
    // linear
    {
        let w0 = rng::standard_normal(&mut r, vec![5, 3]);
        let b0 = rng::standard_normal(&mut r, vec![3]);
        let x2 = rng::standard_normal(&mut r, vec![2, 5]);
        let c = rng::standard_normal(&mut r, vec![2, 3]);
        {
            let (w0, b0, c) = (w0.clone(), b0.clone(), c.clone());
            fd_check("linear/x", &x2, &move |tape, x| {
                let w = tape.constant(w0.clone());
                let b = tape.constant(b0.clone());
                let y = tape.linear(x, w, b).unwrap();
                let cc = tape.constant(c.clone());
                let d = tape.sub(y, cc).unwrap();
                tape.sum_squares(d)
            }, OP_TOL);
        }
        {
            let (x2, b0, c) = (x2.clone(), b0.clone(), c.clone());
            fd_check("linear/w", &w0, &move |tape, w| {
                let x = tape.constant(x2.clone());
                let b = tape.constant(b0.clone());
                let y = tape.linear(x, w, b).unwrap();
                let cc = tape.constant(c.clone());
                let d = tape.sub(y, cc).unwrap();
                tape.sum_squares(d)
            }, OP_TOL);
        }
    }
    // mean_all on its own
    {
        fd_check("mean_all", &x0, &|tape, x| tape.mean_all(x), OP_TOL);
    }
}

#[test]
fn backward_of_sum_is_ones_and_half_sumsq_is_x() {
    let mut r = rng::stream(15, "gradcheck");
    let x0 = rng::standard_normal(&mut r, vec![7]);

    let mut tape = Tape::new();
    let x = tape.param(x0.clone());
    let s = tape.sum_all(x);
    let g = tape.backward(s).unwrap();
    assert!(g.get(x).unwrap().data().iter().all(|&v| v == 1.0));

    let mut tape = Tape::new();
    let x = tape.param(x0.clone());
    let q = tape.sum_squares(x);
    let half = tape.scale(q, 0.5);
    let g = tape.backward(half).unwrap();
    for (a, b) in g.get(x).unwrap().data().iter().zip(x0.data()) {
        assert!(rel_gap(*a, *b) < 1e-12);
    }
}

#[test]
fn composite_network_gradient_matches_fd() {
    // conv -> group_norm -> silu -> down -> concat -> conv -> tanh -> mean:
    // the same shape of composition the real models use.
    let mut r = rng::stream(16, "gradcheck");
    let x0 = rng::standard_normal(&mut r, vec![1, 2, 2, 4, 4]);
    let w1 = rng::standard_normal(&mut r, vec![4, 2, 1, 3, 3]).map(|v| v * 0.4);
    let b1 = rng::standard_normal(&mut r, vec![4]).map(|v| v * 0.1);
    let ga = rng::uniform(&mut r, vec![4], 0.8, 1.2);
    let be = rng::standard_normal(&mut r, vec![4]).map(|v| v * 0.1);
    let w2 = rng::standard_normal(&mut r, vec![1, 6, 1, 3, 3]).map(|v| v * 0.4);
    let b2 = rng::standard_normal(&mut r, vec![1]).map(|v| v * 0.1);
    let side = rng::standard_normal(&mut r, vec![1, 2, 2, 2, 2]);

    let build = move |tape: &mut Tape, x: NodeId| {
        let w1n = tape.constant(w1.clone());
        let b1n = tape.constant(b1.clone());
        let h = tape.conv3(x, w1n, b1n, 1, [0, 1, 1]).unwrap();
        let gan = tape.constant(ga.clone());
        let ben = tape.constant(be.clone());
        let h = tape.group_norm(h, gan, ben, 2, 1e-5).unwrap();
        let h = tape.silu(h);
        let h = tape.down_avg2(h).unwrap();
        let s = tape.constant(side.clone());
        let h = tape.concat_channels(h, s).unwrap();
        let w2n = tape.constant(w2.clone());
        let b2n = tape.constant(b2.clone());
        let h = tape.conv3(h, w2n, b2n, 1, [0, 1, 1]).unwrap();
        let h = tape.tanh(h);
        tape.mean_all(h)
    };
    fd_check("composite", &x0, &build, OP_TOL);
}

struct DoubleFirstHalve {
    out_len: usize,
}

impl CustomOp for DoubleFirstHalve {
    fn name(&self) -> &'static str {
        "double_first_halve"
    }
    fn apply(&self, x: &Tensor) -> tensor_engine::Result<Tensor> {
        if x.numel() < self.out_len {
            return Err(EngineError::invalid("double_first_halve", "input too short"));
        }
        let data = x.data()[..self.out_len].iter().map(|v| 2.0 * v).collect();
        Tensor::new(vec![self.out_len], data)
    }
    fn vjp(&self, grad_out: &Tensor, input_shape: &[usize]) -> tensor_engine::Result<Tensor> {
        let n: usize = input_shape.iter().product();
        let mut g = vec![0.0; n];
        for (i, v) in grad_out.data().iter().enumerate() {
            g[i] = 2.0 * v;
        }
        Tensor::new(input_shape.to_vec(), g)
    }
}

#[test]
fn custom_linear_op_gradient_matches_fd() {
    let mut r = rng::stream(17, "gradcheck");
    let x0 = rng::standard_normal(&mut r, vec![6]);
    let c = rng::standard_normal(&mut r, vec![3]);
    fd_check("custom", &x0, &move |tape, x| {
        let y = tape.custom(x, Rc::new(DoubleFirstHalve { out_len: 3 })).unwrap();
        let cc = tape.constant(c.clone());
        let d = tape.sub(y, cc).unwrap();
        tape.sum_squares(d)
    }, OP_TOL);
}

#[test]
fn forward_and_backward_are_bit_deterministic() {
    let run = || {
        let mut r = rng::stream(77, "determinism");
        let x0 = rng::standard_normal(&mut r, vec![2, 2, 3, 8, 8]);
        let w = rng::standard_normal(&mut r, vec![4, 2, 3, 3, 3]);
        let b = rng::standard_normal(&mut r, vec![4]);
        let mut tape = Tape::new();
        let xn = tape.param(x0);
        let wn = tape.param(w);
        let bn = tape.param(b);
        let y = tape.conv3(xn, wn, bn, 1, [1, 1, 1]).unwrap();
        let y = tape.silu(y);
        let loss = tape.sum_squares(y);
        let g = tape.backward(loss).unwrap();
        (
            tape.value(loss).item().unwrap(),
            g.get(xn).unwrap().clone(),
            g.get(wn).unwrap().clone(),
        )
    };
    let (l1, gx1, gw1) = run();
    let (l2, gx2, gw2) = run();
    assert_eq!(l1.to_bits(), l2.to_bits());
    assert_eq!(gx1, gx2);
    assert_eq!(gw1, gw2);
}
