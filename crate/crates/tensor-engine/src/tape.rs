//! Wengert tape: eager ops that record enough to replay exact VJPs in reverse.

use std::rc::Rc;

use crate::kernels;
use crate::{EngineError, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

/// A linear (or affine) map foreign to the tape. `vjp` must apply the exact
/// transpose of the linear part so finite-difference checks agree.
pub trait CustomOp {
    fn name(&self) -> &'static str;
    fn apply(&self, x: &Tensor) -> Result<Tensor>;
    fn vjp(&self, grad_out: &Tensor, input_shape: &[usize]) -> Result<Tensor>;
}

#[derive(Clone)]
enum Op {
    Leaf,
    Conv3 { x: NodeId, w: NodeId, b: NodeId, stride: usize, pad: [usize; 3] },
    GroupNorm { x: NodeId, gamma: NodeId, beta: NodeId, groups: usize },
    Silu { x: NodeId },
    Tanh { x: NodeId },
    Abs { x: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Scale { x: NodeId, c: f64 },
    AddScalar { x: NodeId },
    PerBatchScale { x: NodeId, coefs: Vec<f64> },
    DownAvg2 { x: NodeId },
    UpNearest2 { x: NodeId },
    ConcatChannels { a: NodeId, b: NodeId },
    SelectBatch { x: NodeId, index: usize },
    SpatialGradient { x: NodeId },
    Laplacian { x: NodeId },
    Linear { x: NodeId, w: NodeId, b: NodeId },
    BroadcastChannelAdd { x: NodeId, e: NodeId },
    SumAll { x: NodeId },
    MeanAll { x: NodeId },
    SumSquares { x: NodeId },
    Custom { x: NodeId, f: Rc<dyn CustomOp> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    /// Saved forward statistics (group_norm keeps mean/inv_std per group).
    aux: Vec<f64>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

pub struct Gradients {
    store: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.store[id.0].as_ref()
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        self.store[id.0].take()
    }
}

fn accumulate(slot: &mut Option<Tensor>, shape: &[usize], contrib: &[f64]) {
    match slot {
        Some(t) => {
            for (a, b) in t.data_mut().iter_mut().zip(contrib) {
                *a += b;
            }
        }
        None => {
            let mut t = Tensor::zeros(shape.to_vec());
            t.data_mut().copy_from_slice(contrib);
            *slot = Some(t);
        }
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool, aux: Vec<f64>) -> NodeId {
        self.nodes.push(Node { value, op, requires_grad, aux });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Leaf that never receives a gradient (inputs, frozen weights).
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, false, vec![])
    }

    /// Leaf that accumulates a gradient (trainable parameter).
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, true, vec![])
    }

    // -- network ops --------------------------------------------------------

    pub fn conv3(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: [usize; 3],
    ) -> Result<NodeId> {
        let xs = self.value(x).dims5("conv3")?;
        let ws = self.value(w).dims5("conv3")?;
        if stride == 0 {
            return Err(EngineError::invalid("conv3", "stride must be >= 1"));
        }
        if ws[2] % 2 == 0 || ws[3] % 2 == 0 || ws[4] % 2 == 0 {
            return Err(EngineError::invalid("conv3", format!("kernel extents must be odd, got {:?}", &ws[2..])));
        }
        if xs[1] != ws[1] {
            return Err(EngineError::shape(
                "conv3",
                format!("input channels {} (shape {:?}) != kernel channels {} (shape {:?})", xs[1], xs, ws[1], ws),
            ));
        }
        let bs = self.value(b).shape().to_vec();
        if bs != [ws[0]] {
            return Err(EngineError::shape("conv3", format!("bias shape {:?}, want [{}]", bs, ws[0])));
        }
        for (ext, (k, p)) in xs[2..].iter().zip(ws[2..].iter().zip(pad.iter())) {
            if ext + 2 * p < *k {
                return Err(EngineError::shape(
                    "conv3",
                    format!("kernel {:?} does not fit input {:?} with pad {:?}", ws, xs, pad),
                ));
            }
        }
        let (data, os) = kernels::conv3_forward(
            self.value(x).data(),
            xs,
            self.value(w).data(),
            ws,
            self.value(b).data(),
            stride,
            pad,
        );
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(Tensor::new(os.to_vec(), data)?, Op::Conv3 { x, w, b, stride, pad }, rg, vec![]))
    }

    pub fn group_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        groups: usize,
        eps: f64,
    ) -> Result<NodeId> {
        let xs = self.value(x).dims5("group_norm")?;
        if groups == 0 || xs[1] % groups != 0 {
            return Err(EngineError::invalid(
                "group_norm",
                format!("channels {} not divisible by groups {}", xs[1], groups),
            ));
        }
        if eps <= 0.0 {
            return Err(EngineError::invalid("group_norm", "eps must be > 0"));
        }
        let want = vec![xs[1]];
        if self.value(gamma).shape() != want || self.value(beta).shape() != want {
            return Err(EngineError::shape(
                "group_norm",
                format!(
                    "gamma {:?} / beta {:?}, want {:?}",
                    self.value(gamma).shape(),
                    self.value(beta).shape(),
                    want
                ),
            ));
        }
        let (data, stats) = kernels::group_norm_forward(
            self.value(x).data(),
            xs,
            groups,
            self.value(gamma).data(),
            self.value(beta).data(),
            eps,
        );
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        Ok(self.push(
            Tensor::new(xs.to_vec(), data)?,
            Op::GroupNorm { x, gamma, beta, groups },
            rg,
            stats,
        ))
    }

    pub fn silu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|t| t / (1.0 + (-t).exp()));
        let rg = self.rg(x);
        self.push(v, Op::Silu { x }, rg, vec![])
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(f64::tanh);
        let rg = self.rg(x);
        self.push(v, Op::Tanh { x }, rg, vec![])
    }

    pub fn abs(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(f64::abs);
        let rg = self.rg(x);
        self.push(v, Op::Abs { x }, rg, vec![])
    }

    fn binary_shapes(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(EngineError::shape(
                op,
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_shapes("add", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let v = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Add { a, b }, rg, vec![]))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_shapes("sub", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x - y)
            .collect();
        let v = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Sub { a, b }, rg, vec![]))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let v = self.value(x).map(|t| c * t);
        let rg = self.rg(x);
        self.push(v, Op::Scale { x, c }, rg, vec![])
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> NodeId {
        let v = self.value(x).map(|t| t + c);
        let rg = self.rg(x);
        self.push(v, Op::AddScalar { x }, rg, vec![])
    }

    /// Multiplies every element of batch b by coefs[b]; x is [B, ...].
    pub fn per_batch_scale(&mut self, x: NodeId, coefs: &[f64]) -> Result<NodeId> {
        let shape = self.value(x).shape().to_vec();
        if shape.is_empty() || shape[0] != coefs.len() {
            return Err(EngineError::shape(
                "per_batch_scale",
                format!("batch {:?} vs {} coefficients", shape.first(), coefs.len()),
            ));
        }
        let per = self.value(x).numel() / shape[0].max(1);
        let mut data = self.value(x).data().to_vec();
        for (bi, chunk) in data.chunks_mut(per).enumerate() {
            let c = coefs[bi];
            for v in chunk {
                *v *= c;
            }
        }
        let v = Tensor::new(shape, data)?;
        let rg = self.rg(x);
        Ok(self.push(v, Op::PerBatchScale { x, coefs: coefs.to_vec() }, rg, vec![]))
    }

    pub fn down_avg2(&mut self, x: NodeId) -> Result<NodeId> {
        let xs = self.value(x).dims5("down_avg2")?;
        if xs[3] % 2 != 0 || xs[4] % 2 != 0 {
            return Err(EngineError::shape(
                "down_avg2",
                format!("in-plane extents must be even, got {:?}", xs),
            ));
        }
        let (data, os) = kernels::down_avg2_forward(self.value(x).data(), xs);
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(os.to_vec(), data)?, Op::DownAvg2 { x }, rg, vec![]))
    }

    pub fn up_nearest2(&mut self, x: NodeId) -> Result<NodeId> {
        let xs = self.value(x).dims5("up_nearest2")?;
        let (data, os) = kernels::up_nearest2_forward(self.value(x).data(), xs);
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(os.to_vec(), data)?, Op::UpNearest2 { x }, rg, vec![]))
    }

    pub fn concat_channels(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let asp = self.value(a).dims5("concat_channels")?;
        let bsp = self.value(b).dims5("concat_channels")?;
        if asp[0] != bsp[0] || asp[2..] != bsp[2..] {
            return Err(EngineError::shape(
                "concat_channels",
                format!("{:?} vs {:?} (all extents but channels must match)", asp, bsp),
            ));
        }
        let vol = asp[2] * asp[3] * asp[4];
        let (ca, cb) = (asp[1], bsp[1]);
        let mut data = Vec::with_capacity((ca + cb) * asp[0] * vol);
        for bi in 0..asp[0] {
            data.extend_from_slice(&self.value(a).data()[bi * ca * vol..][..ca * vol]);
            data.extend_from_slice(&self.value(b).data()[bi * cb * vol..][..cb * vol]);
        }
        let v = Tensor::new(vec![asp[0], ca + cb, asp[2], asp[3], asp[4]], data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::ConcatChannels { a, b }, rg, vec![]))
    }

    pub fn select_batch(&mut self, x: NodeId, index: usize) -> Result<NodeId> {
        let xs = self.value(x).dims5("select_batch")?;
        if index >= xs[0] {
            return Err(EngineError::invalid(
                "select_batch",
                format!("index {} out of batch {}", index, xs[0]),
            ));
        }
        let per = xs[1] * xs[2] * xs[3] * xs[4];
        let data = self.value(x).data()[index * per..][..per].to_vec();
        let v = Tensor::new(vec![1, xs[1], xs[2], xs[3], xs[4]], data)?;
        let rg = self.rg(x);
        Ok(self.push(v, Op::SelectBatch { x, index }, rg, vec![]))
    }

    pub fn spatial_gradient(&mut self, x: NodeId) -> Result<NodeId> {
        let xs = self.value(x).dims5("spatial_gradient")?;
        let (data, os) = kernels::spatial_gradient_forward(self.value(x).data(), xs);
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(os.to_vec(), data)?, Op::SpatialGradient { x }, rg, vec![]))
    }

    pub fn laplacian(&mut self, x: NodeId) -> Result<NodeId> {
        let xs = self.value(x).dims5("laplacian")?;
        let data = kernels::laplacian_forward(self.value(x).data(), xs);
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(xs.to_vec(), data)?, Op::Laplacian { x }, rg, vec![]))
    }

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let [bs, i] = self.value(x).dims2("linear")?;
        let [wi, o] = self.value(w).dims2("linear")?;
        if wi != i || self.value(b).shape() != [o] {
            return Err(EngineError::shape(
                "linear",
                format!(
                    "x {:?}, w {:?}, b {:?}",
                    self.value(x).shape(),
                    self.value(w).shape(),
                    self.value(b).shape()
                ),
            ));
        }
        let data = kernels::linear_forward(
            self.value(x).data(),
            bs,
            i,
            o,
            self.value(w).data(),
            self.value(b).data(),
        );
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(Tensor::new(vec![bs, o], data)?, Op::Linear { x, w, b }, rg, vec![]))
    }

    /// x is [B, C, D, H, W]; e is [B, C]; adds e per channel everywhere.
    pub fn broadcast_channel_add(&mut self, x: NodeId, e: NodeId) -> Result<NodeId> {
        let xs = self.value(x).dims5("broadcast_channel_add")?;
        let es = self.value(e).dims2("broadcast_channel_add")?;
        if es != [xs[0], xs[1]] {
            return Err(EngineError::shape(
                "broadcast_channel_add",
                format!("feature {:?} vs embedding {:?}", xs, es),
            ));
        }
        let vol = xs[2] * xs[3] * xs[4];
        let mut data = self.value(x).data().to_vec();
        let ev = self.value(e).data();
        for bc in 0..xs[0] * xs[1] {
            let c = ev[bc];
            for v in &mut data[bc * vol..(bc + 1) * vol] {
                *v += c;
            }
        }
        let v = Tensor::new(xs.to_vec(), data)?;
        let rg = self.rg(x) || self.rg(e);
        Ok(self.push(v, Op::BroadcastChannelAdd { x, e }, rg, vec![]))
    }

    // -- reductions ---------------------------------------------------------

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(x).sum());
        let rg = self.rg(x);
        self.push(v, Op::SumAll { x }, rg, vec![])
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(x).mean());
        let rg = self.rg(x);
        self.push(v, Op::MeanAll { x }, rg, vec![])
    }

    pub fn sum_squares(&mut self, x: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(x).sum_squares());
        let rg = self.rg(x);
        self.push(v, Op::SumSquares { x }, rg, vec![])
    }

    pub fn custom(&mut self, x: NodeId, f: Rc<dyn CustomOp>) -> Result<NodeId> {
        let v = f.apply(self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(v, Op::Custom { x, f }, rg, vec![]))
    }

    // -- reverse pass -------------------------------------------------------

    /// Seeds d(loss)/d(loss) = 1 and replays the graph once in reverse.
    /// Leaves that do not reach the loss simply end up with no gradient.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(EngineError::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            ));
        }
        let mut store: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        store[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                store[idx] = None;
                continue;
            }
            let gy = match store[idx].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[idx];
            match node.op.clone() {
                Op::Leaf => {
                    store[idx] = Some(gy);
                    continue;
                }
                Op::Conv3 { x, w, b, stride, pad } => {
                    let xs = self.value(x).dims5("conv3")?;
                    let ws = self.value(w).dims5("conv3")?;
                    if self.rg(x) {
                        let gx = kernels::conv3_backward_input(gy.data(), self.value(w).data(), xs, ws, stride, pad);
                        accumulate(&mut store[x.0], &xs, &gx);
                    }
                    if self.rg(w) {
                        let gw = kernels::conv3_backward_weight(gy.data(), self.value(x).data(), xs, ws, stride, pad);
                        accumulate(&mut store[w.0], &ws, &gw);
                    }
                    if self.rg(b) {
                        let os = gy.dims5("conv3")?;
                        let gb = kernels::conv3_backward_bias(gy.data(), os);
                        accumulate(&mut store[b.0], &[ws[0]], &gb);
                    }
                }
                Op::GroupNorm { x, gamma, beta, groups } => {
                    let xs = self.value(x).dims5("group_norm")?;
                    let (gx, gg, gb) = kernels::group_norm_backward(
                        self.value(x).data(),
                        xs,
                        groups,
                        self.value(gamma).data(),
                        &node.aux,
                        gy.data(),
                    );
                    if self.rg(x) {
                        accumulate(&mut store[x.0], &xs, &gx);
                    }
                    if self.rg(gamma) {
                        accumulate(&mut store[gamma.0], &[xs[1]], &gg);
                    }
                    if self.rg(beta) {
                        accumulate(&mut store[beta.0], &[xs[1]], &gb);
                    }
                }
                Op::Silu { x } => {
                    if self.rg(x) {
                        let xv = self.value(x).data();
                        let g: Vec<f64> = gy
                            .data()
                            .iter()
                            .zip(xv)
                            .map(|(g, &t)| {
                                let s = 1.0 / (1.0 + (-t).exp());
                                g * (s + t * s * (1.0 - s))
                            })
                            .collect();
                        accumulate(&mut store[x.0], self.value(x).shape(), &g);
                    }
                }
                Op::Tanh { x } => {
                    if self.rg(x) {
                        let yv = node.value.data();
                        let g: Vec<f64> =
                            gy.data().iter().zip(yv).map(|(g, y)| g * (1.0 - y * y)).collect();
                        accumulate(&mut store[x.0], self.value(x).shape(), &g);
                    }
                }
                Op::Abs { x } => {
                    if self.rg(x) {
                        let xv = self.value(x).data();
                        let g: Vec<f64> = gy
                            .data()
                            .iter()
                            .zip(xv)
                            .map(|(g, &t)| {
                                if t > 0.0 {
                                    *g
                                } else if t < 0.0 {
                                    -*g
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        accumulate(&mut store[x.0], self.value(x).shape(), &g);
                    }
                }
                Op::Add { a, b } => {
                    if self.rg(a) {
                        accumulate(&mut store[a.0], self.value(a).shape(), gy.data());
                    }
                    if self.rg(b) {
                        accumulate(&mut store[b.0], self.value(b).shape(), gy.data());
                    }
                }
                Op::Sub { a, b } => {
                    if self.rg(a) {
                        accumulate(&mut store[a.0], self.value(a).shape(), gy.data());
                    }
                    if self.rg(b) {
                        let neg: Vec<f64> = gy.data().iter().map(|g| -g).collect();
                        accumulate(&mut store[b.0], self.value(b).shape(), &neg);
                    }
                }
                Op::Scale { x, c } => {
                    if self.rg(x) {
                        let g: Vec<f64> = gy.data().iter().map(|g| c * g).collect();
                        accumulate(&mut store[x.0], self.value(x).shape(), &g);
                    }
                }
                Op::AddScalar { x } => {
                    if self.rg(x) {
                        accumulate(&mut store[x.0], self.value(x).shape(), gy.data());
                    }
                }
                Op::PerBatchScale { x, coefs } => {
                    if self.rg(x) {
                        let per = self.value(x).numel() / coefs.len().max(1);
                        let mut g = gy.data().to_vec();
                        for (bi, chunk) in g.chunks_mut(per).enumerate() {
                            for v in chunk {
                                *v *= coefs[bi];
                            }
                        }
                        accumulate(&mut store[x.0], self.value(x).shape(), &g);
                    }
                }
                Op::DownAvg2 { x } => {
                    if self.rg(x) {
                        let xs = self.value(x).dims5("down_avg2")?;
                        let g = kernels::down_avg2_backward(gy.data(), xs);
                        accumulate(&mut store[x.0], &xs, &g);
                    }
                }
                Op::UpNearest2 { x } => {
                    if self.rg(x) {
                        let xs = self.value(x).dims5("up_nearest2")?;
                        let g = kernels::up_nearest2_backward(gy.data(), xs);
                        accumulate(&mut store[x.0], &xs, &g);
                    }
                }
                Op::ConcatChannels { a, b } => {
                    let asp = self.value(a).dims5("concat_channels")?;
                    let bsp = self.value(b).dims5("concat_channels")?;
                    let vol = asp[2] * asp[3] * asp[4];
                    let (ca, cb) = (asp[1], bsp[1]);
                    if self.rg(a) {
                        let mut g = vec![0.0; asp.iter().product()];
                        for bi in 0..asp[0] {
                            g[bi * ca * vol..][..ca * vol].copy_from_slice(
                                &gy.data()[bi * (ca + cb) * vol..][..ca * vol],
                            );
                        }
                        accumulate(&mut store[a.0], &asp, &g);
                    }
                    if self.rg(b) {
                        let mut g = vec![0.0; bsp.iter().product()];
                        for bi in 0..bsp[0] {
                            g[bi * cb * vol..][..cb * vol].copy_from_slice(
                                &gy.data()[bi * (ca + cb) * vol + ca * vol..][..cb * vol],
                            );
                        }
                        accumulate(&mut store[b.0], &bsp, &g);
                    }
                }
                Op::SelectBatch { x, index } => {
                    if self.rg(x) {
                        let xs = self.value(x).dims5("select_batch")?;
                        let per = xs[1] * xs[2] * xs[3] * xs[4];
                        let mut g = vec![0.0; xs.iter().product()];
                        g[index * per..][..per].copy_from_slice(gy.data());
                        accumulate(&mut store[x.0], &xs, &g);
                    }
                }
                Op::SpatialGradient { x } => {
                    if self.rg(x) {
                        let xs = self.value(x).dims5("spatial_gradient")?;
                        let g = kernels::spatial_gradient_backward(gy.data(), xs);
                        accumulate(&mut store[x.0], &xs, &g);
                    }
                }
                Op::Laplacian { x } => {
                    if self.rg(x) {
                        let xs = self.value(x).dims5("laplacian")?;
                        let g = kernels::laplacian_backward(gy.data(), xs);
                        accumulate(&mut store[x.0], &xs, &g);
                    }
                }
                Op::Linear { x, w, b } => {
                    let [bs, i] = self.value(x).dims2("linear")?;
                    let [_, o] = self.value(w).dims2("linear")?;
                    let (gx, gw, gb) = kernels::linear_backward(
                        gy.data(),
                        self.value(x).data(),
                        bs,
                        i,
                        o,
                        self.value(w).data(),
                    );
                    if self.rg(x) {
                        accumulate(&mut store[x.0], &[bs, i], &gx);
                    }
                    if self.rg(w) {
                        accumulate(&mut store[w.0], &[i, o], &gw);
                    }
                    if self.rg(b) {
                        accumulate(&mut store[b.0], &[o], &gb);
                    }
                }
                Op::BroadcastChannelAdd { x, e } => {
                    let xs = self.value(x).dims5("broadcast_channel_add")?;
                    let vol = xs[2] * xs[3] * xs[4];
                    if self.rg(x) {
                        accumulate(&mut store[x.0], &xs, gy.data());
                    }
                    if self.rg(e) {
                        let mut g = vec![0.0; xs[0] * xs[1]];
                        for bc in 0..xs[0] * xs[1] {
                            g[bc] = gy.data()[bc * vol..(bc + 1) * vol].iter().sum();
                        }
                        accumulate(&mut store[e.0], &[xs[0], xs[1]], &g);
                    }
                }
                Op::SumAll { x } => {
                    if self.rg(x) {
                        let g0 = gy.data()[0];
                        let g = vec![g0; self.value(x).numel()];
                        accumulate(&mut store[x.0], self.value(x).shape(), &g);
                    }
                }
                Op::MeanAll { x } => {
                    if self.rg(x) {
                        let n = self.value(x).numel().max(1) as f64;
                        let g = vec![gy.data()[0] / n; self.value(x).numel()];
                        accumulate(&mut store[x.0], self.value(x).shape(), &g);
                    }
                }
                Op::SumSquares { x } => {
                    if self.rg(x) {
                        let g0 = gy.data()[0];
                        let g: Vec<f64> =
                            self.value(x).data().iter().map(|v| 2.0 * g0 * v).collect();
                        accumulate(&mut store[x.0], self.value(x).shape(), &g);
                    }
                }
                Op::Custom { x, f } => {
                    if self.rg(x) {
                        let g = f.vjp(&gy, self.value(x).shape())?;
                        if g.shape() != self.value(x).shape() {
                            return Err(EngineError::shape(
                                "custom",
                                format!(
                                    "{} vjp returned {:?}, want {:?}",
                                    f.name(),
                                    g.shape(),
                                    self.value(x).shape()
                                ),
                            ));
                        }
                        accumulate(&mut store[x.0], self.value(x).shape(), g.data());
                    }
                }
            }
        }

        // Interior node grads were consumed during the sweep; only leaves
        // (and the loss seed) remain useful. Clear everything non-leaf.
        for (idx, node) in self.nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf) {
                store[idx] = None;
            }
        }
        Ok(Gradients { store })
    }
}
