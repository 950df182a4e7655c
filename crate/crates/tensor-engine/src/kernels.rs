//! Raw kernels behind the tape ops. All loops run in a fixed order (parallel
//! work is partitioned by output index, inner sums stay sequential), so results
//! are bit-identical across reruns and thread counts.

use rayon::prelude::*;

// ---------------------------------------------------------------------------
// conv3: direct 3D convolution on [B, C, D, H, W], zero padding.
// ---------------------------------------------------------------------------

pub fn conv3_out_dims(xs: [usize; 5], ws: [usize; 5], stride: usize, pad: [usize; 3]) -> [usize; 5] {
    let [b, _ci, d, h, w] = xs;
    let [co, _cw, kd, kh, kw] = ws;
    let od = (d + 2 * pad[0] - kd) / stride + 1;
    let oh = (h + 2 * pad[1] - kh) / stride + 1;
    let ow = (w + 2 * pad[2] - kw) / stride + 1;
    [b, co, od, oh, ow]
}

pub fn conv3_forward(
    x: &[f64],
    xs: [usize; 5],
    w: &[f64],
    ws: [usize; 5],
    bias: &[f64],
    stride: usize,
    pad: [usize; 3],
) -> (Vec<f64>, [usize; 5]) {
    let [b, ci, d, h, wd] = xs;
    let [co, _, kd, kh, kw] = ws;
    let os = conv3_out_dims(xs, ws, stride, pad);
    let [_, _, od, oh, ow] = os;
    let mut out = vec![0.0; b * co * od * oh * ow];

    // One task per output (b, co, od) plane.
    out.par_chunks_mut(oh * ow).enumerate().for_each(|(plane, op)| {
        let odi = plane % od;
        let coi = (plane / od) % co;
        let bi = plane / (od * co);
        op.fill(bias[coi]);
        for cii in 0..ci {
            for kdi in 0..kd {
                let id = (odi * stride + kdi) as isize - pad[0] as isize;
                if id < 0 || id >= d as isize {
                    continue;
                }
                let xplane = &x[(((bi * ci + cii) * d + id as usize) * h) * wd..][..h * wd];
                for khi in 0..kh {
                    let wrow = &w[((((coi * ci + cii) * kd + kdi) * kh) + khi) * kw..][..kw];
                    for ohi in 0..oh {
                        let ih = (ohi * stride + khi) as isize - pad[1] as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let xrow = &xplane[ih as usize * wd..][..wd];
                        let orow = &mut op[ohi * ow..][..ow];
                        if stride == 1 {
                            for kwi in 0..kw {
                                let cw = wrow[kwi];
                                if cw == 0.0 {
                                    continue;
                                }
                                let off = kwi as isize - pad[2] as isize;
                                let lo = (-off).max(0) as usize;
                                let hi = ow.min((wd as isize - off).max(0) as usize);
                                let src = &xrow[(lo as isize + off) as usize..];
                                for (o, xv) in orow[lo..hi].iter_mut().zip(src) {
                                    *o += cw * xv;
                                }
                            }
                        } else {
                            for owi in 0..ow {
                                let mut acc = 0.0;
                                for kwi in 0..kw {
                                    let iw = (owi * stride + kwi) as isize - pad[2] as isize;
                                    if iw >= 0 && iw < wd as isize {
                                        acc += wrow[kwi] * xrow[iw as usize];
                                    }
                                }
                                orow[owi] += acc;
                            }
                        }
                    }
                }
            }
        }
    });
    (out, os)
}

/// Gradient w.r.t. the input, stride 1 fast path + general fallback.
pub fn conv3_backward_input(
    gy: &[f64],
    w: &[f64],
    xs: [usize; 5],
    ws: [usize; 5],
    stride: usize,
    pad: [usize; 3],
) -> Vec<f64> {
    let [b, ci, d, h, wd] = xs;
    let [co, _, kd, kh, kw] = ws;
    let [_, _, od, oh, ow] = conv3_out_dims(xs, ws, stride, pad);
    let mut gx = vec![0.0; b * ci * d * h * wd];

    gx.par_chunks_mut(h * wd).enumerate().for_each(|(plane, gxp)| {
        let id = plane % d;
        let cii = (plane / d) % ci;
        let bi = plane / (d * ci);
        for coi in 0..co {
            for kdi in 0..kd {
                let num = id as isize + pad[0] as isize - kdi as isize;
                if num < 0 || num % stride as isize != 0 {
                    continue;
                }
                let odi = (num / stride as isize) as usize;
                if odi >= od {
                    continue;
                }
                let gyplane = &gy[(((bi * co + coi) * od + odi) * oh) * ow..][..oh * ow];
                for khi in 0..kh {
                    let wrow = &w[((((coi * ci + cii) * kd + kdi) * kh) + khi) * kw..][..kw];
                    for ihi in 0..h {
                        let numh = ihi as isize + pad[1] as isize - khi as isize;
                        if numh < 0 || numh % stride as isize != 0 {
                            continue;
                        }
                        let ohi = (numh / stride as isize) as usize;
                        if ohi >= oh {
                            continue;
                        }
                        let gyrow = &gyplane[ohi * ow..][..ow];
                        let gxrow = &mut gxp[ihi * wd..][..wd];
                        if stride == 1 {
                            for kwi in 0..kw {
                                let cw = wrow[kwi];
                                if cw == 0.0 {
                                    continue;
                                }
                                // iw = ow + kw - pad  =>  ow = iw + pad - kw
                                let off = pad[2] as isize - kwi as isize;
                                let lo = (-off).max(0) as usize;
                                let hi = wd.min((ow as isize - off).max(0) as usize);
                                let src = &gyrow[(lo as isize + off) as usize..];
                                for (g, yv) in gxrow[lo..hi].iter_mut().zip(src) {
                                    *g += cw * yv;
                                }
                            }
                        } else {
                            for iwi in 0..wd {
                                let mut acc = 0.0;
                                for kwi in 0..kw {
                                    let numw = iwi as isize + pad[2] as isize - kwi as isize;
                                    if numw >= 0 && numw % stride as isize == 0 {
                                        let owi = (numw / stride as isize) as usize;
                                        if owi < ow {
                                            acc += wrow[kwi] * gyrow[owi];
                                        }
                                    }
                                }
                                gxrow[iwi] += acc;
                            }
                        }
                    }
                }
            }
        }
    });
    gx
}

pub fn conv3_backward_weight(
    gy: &[f64],
    x: &[f64],
    xs: [usize; 5],
    ws: [usize; 5],
    stride: usize,
    pad: [usize; 3],
) -> Vec<f64> {
    let [b, ci, d, h, wd] = xs;
    let [co, _, kd, kh, kw] = ws;
    let [_, _, od, oh, ow] = conv3_out_dims(xs, ws, stride, pad);
    let mut gw = vec![0.0; co * ci * kd * kh * kw];

    // One task per output channel: each gw element written by exactly one task.
    gw.par_chunks_mut(ci * kd * kh * kw).enumerate().for_each(|(coi, gwc)| {
        for bi in 0..b {
            let gyplane = &gy[(((bi * co + coi) * od) * oh) * ow..][..od * oh * ow];
            for cii in 0..ci {
                for kdi in 0..kd {
                    for khi in 0..kh {
                        for odi in 0..od {
                            let id = (odi * stride + kdi) as isize - pad[0] as isize;
                            if id < 0 || id >= d as isize {
                                continue;
                            }
                            for ohi in 0..oh {
                                let ih = (ohi * stride + khi) as isize - pad[1] as isize;
                                if ih < 0 || ih >= h as isize {
                                    continue;
                                }
                                let xrow = &x[(((bi * ci + cii) * d + id as usize) * h
                                    + ih as usize)
                                    * wd..][..wd];
                                let gyrow = &gyplane[(odi * oh + ohi) * ow..][..ow];
                                let grow = &mut gwc[((cii * kd + kdi) * kh + khi) * kw..][..kw];
                                if stride == 1 {
                                    for kwi in 0..kw {
                                        let off = kwi as isize - pad[2] as isize;
                                        let lo = (-off).max(0) as usize;
                                        let hi = ow.min((wd as isize - off).max(0) as usize);
                                        let src = &xrow[(lo as isize + off) as usize..];
                                        let mut acc = 0.0;
                                        for (yv, xv) in gyrow[lo..hi].iter().zip(src) {
                                            acc += yv * xv;
                                        }
                                        grow[kwi] += acc;
                                    }
                                } else {
                                    for kwi in 0..kw {
                                        let mut acc = 0.0;
                                        for owi in 0..ow {
                                            let iw = (owi * stride + kwi) as isize
                                                - pad[2] as isize;
                                            if iw >= 0 && iw < wd as isize {
                                                acc += gyrow[owi] * xrow[iw as usize];
                                            }
                                        }
                                        grow[kwi] += acc;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    gw
}

pub fn conv3_backward_bias(gy: &[f64], os: [usize; 5]) -> Vec<f64> {
    let [b, co, od, oh, ow] = os;
    let plane = od * oh * ow;
    let mut gb = vec![0.0; co];
    for bi in 0..b {
        for coi in 0..co {
            let s: f64 = gy[((bi * co + coi) * plane)..][..plane].iter().sum();
            gb[coi] += s;
        }
    }
    gb
}

// ---------------------------------------------------------------------------
// group_norm on [B, C, D, H, W]: biased variance over each (batch, group).
// ---------------------------------------------------------------------------

/// Returns (y, stats) with stats = [mean, inv_std] per (b, g).
pub fn group_norm_forward(
    x: &[f64],
    xs: [usize; 5],
    groups: usize,
    gamma: &[f64],
    beta: &[f64],
    eps: f64,
) -> (Vec<f64>, Vec<f64>) {
    let [b, c, d, h, w] = xs;
    let spatial = d * h * w;
    let cg = c / groups;
    let m = (cg * spatial) as f64;
    let mut y = vec![0.0; x.len()];
    let mut stats = vec![0.0; b * groups * 2];

    for bi in 0..b {
        for g in 0..groups {
            let base = (bi * c + g * cg) * spatial;
            let blk = &x[base..base + cg * spatial];
            let mean: f64 = blk.iter().sum::<f64>() / m;
            let var: f64 = blk.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
            let inv = 1.0 / (var + eps).sqrt();
            stats[(bi * groups + g) * 2] = mean;
            stats[(bi * groups + g) * 2 + 1] = inv;
            for cc in 0..cg {
                let ch = g * cg + cc;
                let (ga, be) = (gamma[ch], beta[ch]);
                let src = &blk[cc * spatial..][..spatial];
                let dst = &mut y[base + cc * spatial..][..spatial];
                for (o, v) in dst.iter_mut().zip(src) {
                    *o = ga * (v - mean) * inv + be;
                }
            }
        }
    }
    (y, stats)
}

pub fn group_norm_backward(
    x: &[f64],
    xs: [usize; 5],
    groups: usize,
    gamma: &[f64],
    stats: &[f64],
    gy: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let [b, c, d, h, w] = xs;
    let spatial = d * h * w;
    let cg = c / groups;
    let m = (cg * spatial) as f64;
    let mut gx = vec![0.0; x.len()];
    let mut ggamma = vec![0.0; c];
    let mut gbeta = vec![0.0; c];

    for bi in 0..b {
        for g in 0..groups {
            let base = (bi * c + g * cg) * spatial;
            let mean = stats[(bi * groups + g) * 2];
            let inv = stats[(bi * groups + g) * 2 + 1];
            // s1 = sum of gamma-weighted upstream, s2 = sum weighted by xhat.
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for cc in 0..cg {
                let ga = gamma[g * cg + cc];
                let xb = &x[base + cc * spatial..][..spatial];
                let gb = &gy[base + cc * spatial..][..spatial];
                for (v, u) in xb.iter().zip(gb) {
                    let xhat = (v - mean) * inv;
                    s1 += ga * u;
                    s2 += ga * u * xhat;
                }
            }
            for cc in 0..cg {
                let ch = g * cg + cc;
                let ga = gamma[ch];
                let xb = &x[base + cc * spatial..][..spatial];
                let gb = &gy[base + cc * spatial..][..spatial];
                let dst = &mut gx[base + cc * spatial..][..spatial];
                let mut dga = 0.0;
                let mut dbe = 0.0;
                for ((v, u), o) in xb.iter().zip(gb).zip(dst.iter_mut()) {
                    let xhat = (v - mean) * inv;
                    *o = inv * (ga * u - s1 / m - xhat * s2 / m);
                    dga += u * xhat;
                    dbe += u;
                }
                ggamma[ch] += dga;
                gbeta[ch] += dbe;
            }
        }
    }
    (gx, ggamma, gbeta)
}

// ---------------------------------------------------------------------------
// In-plane resampling on [B, C, D, H, W].
// ---------------------------------------------------------------------------

pub fn down_avg2_forward(x: &[f64], xs: [usize; 5]) -> (Vec<f64>, [usize; 5]) {
    let [b, c, d, h, w] = xs;
    let (oh, ow) = (h / 2, w / 2);
    let mut y = vec![0.0; b * c * d * oh * ow];
    for p in 0..b * c * d {
        let xp = &x[p * h * w..][..h * w];
        let yp = &mut y[p * oh * ow..][..oh * ow];
        for i in 0..oh {
            for j in 0..ow {
                yp[i * ow + j] = 0.25
                    * (xp[2 * i * w + 2 * j]
                        + xp[2 * i * w + 2 * j + 1]
                        + xp[(2 * i + 1) * w + 2 * j]
                        + xp[(2 * i + 1) * w + 2 * j + 1]);
            }
        }
    }
    (y, [b, c, d, oh, ow])
}

pub fn down_avg2_backward(gy: &[f64], xs: [usize; 5]) -> Vec<f64> {
    let [b, c, d, h, w] = xs;
    let (oh, ow) = (h / 2, w / 2);
    let mut gx = vec![0.0; b * c * d * h * w];
    for p in 0..b * c * d {
        let gp = &gy[p * oh * ow..][..oh * ow];
        let xp = &mut gx[p * h * w..][..h * w];
        for i in 0..oh {
            for j in 0..ow {
                let g = 0.25 * gp[i * ow + j];
                xp[2 * i * w + 2 * j] += g;
                xp[2 * i * w + 2 * j + 1] += g;
                xp[(2 * i + 1) * w + 2 * j] += g;
                xp[(2 * i + 1) * w + 2 * j + 1] += g;
            }
        }
    }
    gx
}

pub fn up_nearest2_forward(x: &[f64], xs: [usize; 5]) -> (Vec<f64>, [usize; 5]) {
    let [b, c, d, h, w] = xs;
    let (oh, ow) = (h * 2, w * 2);
    let mut y = vec![0.0; b * c * d * oh * ow];
    for p in 0..b * c * d {
        let xp = &x[p * h * w..][..h * w];
        let yp = &mut y[p * oh * ow..][..oh * ow];
        for i in 0..oh {
            for j in 0..ow {
                yp[i * ow + j] = xp[(i / 2) * w + j / 2];
            }
        }
    }
    (y, [b, c, d, oh, ow])
}

pub fn up_nearest2_backward(gy: &[f64], xs: [usize; 5]) -> Vec<f64> {
    let [b, c, d, h, w] = xs;
    let (oh, ow) = (h * 2, w * 2);
    let mut gx = vec![0.0; b * c * d * h * w];
    for p in 0..b * c * d {
        let gp = &gy[p * oh * ow..][..oh * ow];
        let xp = &mut gx[p * h * w..][..h * w];
        for i in 0..oh {
            for j in 0..ow {
                xp[(i / 2) * w + j / 2] += gp[i * ow + j];
            }
        }
    }
    gx
}

// ---------------------------------------------------------------------------
// Forward-difference gradient and 7-point Laplacian stencils.
// ---------------------------------------------------------------------------

/// [B, C, D, H, W] -> [B, 3C, D, H, W]; channels 3c, 3c+1, 3c+2 hold the
/// forward differences along depth, rows, cols; trailing boundary is zero.
pub fn spatial_gradient_forward(x: &[f64], xs: [usize; 5]) -> (Vec<f64>, [usize; 5]) {
    let [b, c, d, h, w] = xs;
    let vol = d * h * w;
    let mut y = vec![0.0; b * 3 * c * vol];
    for bi in 0..b {
        for ci in 0..c {
            let xb = &x[(bi * c + ci) * vol..][..vol];
            let base = (bi * 3 * c + 3 * ci) * vol;
            for dd in 0..d {
                for hh in 0..h {
                    for ww in 0..w {
                        let idx = (dd * h + hh) * w + ww;
                        if dd + 1 < d {
                            y[base + idx] = xb[idx + h * w] - xb[idx];
                        }
                        if hh + 1 < h {
                            y[base + vol + idx] = xb[idx + w] - xb[idx];
                        }
                        if ww + 1 < w {
                            y[base + 2 * vol + idx] = xb[idx + 1] - xb[idx];
                        }
                    }
                }
            }
        }
    }
    (y, [b, 3 * c, d, h, w])
}

pub fn spatial_gradient_backward(gy: &[f64], xs: [usize; 5]) -> Vec<f64> {
    let [b, c, d, h, w] = xs;
    let vol = d * h * w;
    let mut gx = vec![0.0; b * c * vol];
    for bi in 0..b {
        for ci in 0..c {
            let gxb = &mut gx[(bi * c + ci) * vol..][..vol];
            let base = (bi * 3 * c + 3 * ci) * vol;
            for dd in 0..d {
                for hh in 0..h {
                    for ww in 0..w {
                        let idx = (dd * h + hh) * w + ww;
                        if dd + 1 < d {
                            let g = gy[base + idx];
                            gxb[idx + h * w] += g;
                            gxb[idx] -= g;
                        }
                        if hh + 1 < h {
                            let g = gy[base + vol + idx];
                            gxb[idx + w] += g;
                            gxb[idx] -= g;
                        }
                        if ww + 1 < w {
                            let g = gy[base + 2 * vol + idx];
                            gxb[idx + 1] += g;
                            gxb[idx] -= g;
                        }
                    }
                }
            }
        }
    }
    gx
}

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// 7-point Laplacian with replicate boundary; shape preserved.
pub fn laplacian_forward(x: &[f64], xs: [usize; 5]) -> Vec<f64> {
    let [b, c, d, h, w] = xs;
    let vol = d * h * w;
    let mut y = vec![0.0; x.len()];
    for p in 0..b * c {
        let xb = &x[p * vol..][..vol];
        let yb = &mut y[p * vol..][..vol];
        for dd in 0..d as isize {
            for hh in 0..h as isize {
                for ww in 0..w as isize {
                    let at = |z: isize, r: isize, q: isize| {
                        xb[(clamp_idx(z, d) * h + clamp_idx(r, h)) * w + clamp_idx(q, w)]
                    };
                    let idx = (dd as usize * h + hh as usize) * w + ww as usize;
                    yb[idx] = at(dd - 1, hh, ww)
                        + at(dd + 1, hh, ww)
                        + at(dd, hh - 1, ww)
                        + at(dd, hh + 1, ww)
                        + at(dd, hh, ww - 1)
                        + at(dd, hh, ww + 1)
                        - 6.0 * xb[idx];
                }
            }
        }
    }
    y
}

/// Exact transpose of the clamped stencil (scatter with the same indices).
pub fn laplacian_backward(gy: &[f64], xs: [usize; 5]) -> Vec<f64> {
    let [b, c, d, h, w] = xs;
    let vol = d * h * w;
    let mut gx = vec![0.0; gy.len()];
    for p in 0..b * c {
        let gb = &gy[p * vol..][..vol];
        let xb = &mut gx[p * vol..][..vol];
        for dd in 0..d as isize {
            for hh in 0..h as isize {
                for ww in 0..w as isize {
                    let idx = (dd as usize * h + hh as usize) * w + ww as usize;
                    let g = gb[idx];
                    if g == 0.0 {
                        continue;
                    }
                    let mut sc = |z: isize, r: isize, q: isize, v: f64| {
                        xb[(clamp_idx(z, d) * h + clamp_idx(r, h)) * w + clamp_idx(q, w)] += v;
                    };
                    sc(dd - 1, hh, ww, g);
                    sc(dd + 1, hh, ww, g);
                    sc(dd, hh - 1, ww, g);
                    sc(dd, hh + 1, ww, g);
                    sc(dd, hh, ww - 1, g);
                    sc(dd, hh, ww + 1, g);
                    xb[idx] -= 6.0 * g;
                }
            }
        }
    }
    gx
}

// ---------------------------------------------------------------------------
// Dense linear layer on [B, I] with weight [I, O], bias [O].
// ---------------------------------------------------------------------------

pub fn linear_forward(x: &[f64], bs: usize, i: usize, o: usize, w: &[f64], bias: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; bs * o];
    for bi in 0..bs {
        let xr = &x[bi * i..][..i];
        let yr = &mut y[bi * o..][..o];
        yr.copy_from_slice(bias);
        for (ii, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wr = &w[ii * o..][..o];
            for (yv, wv) in yr.iter_mut().zip(wr) {
                *yv += xv * wv;
            }
        }
    }
    y
}

pub fn linear_backward(
    gy: &[f64],
    x: &[f64],
    bs: usize,
    i: usize,
    o: usize,
    w: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; bs * i];
    let mut gw = vec![0.0; i * o];
    let mut gb = vec![0.0; o];
    for bi in 0..bs {
        let gr = &gy[bi * o..][..o];
        let xr = &x[bi * i..][..i];
        let gxr = &mut gx[bi * i..][..i];
        for ii in 0..i {
            let wr = &w[ii * o..][..o];
            let mut acc = 0.0;
            for (gv, wv) in gr.iter().zip(wr) {
                acc += gv * wv;
            }
            gxr[ii] = acc;
            let gwr = &mut gw[ii * o..][..o];
            let xv = xr[ii];
            for (gwv, gv) in gwr.iter_mut().zip(gr) {
                *gwv += xv * gv;
            }
        }
        for (gbv, gv) in gb.iter_mut().zip(gr) {
            *gbv += gv;
        }
    }
    (gx, gw, gb)
}
