//! Pure tensor operations: forward kernels and their analytic adjoints.
//! Layers wrap these with parameter storage; everything here is stateless.
//!
//! All spatial ops use "same" padding in the TensorFlow convention: output
//! dims are `ceil(in / stride)` and the total padding `(out-1)*stride + k - in`
//! is split with the smaller half before. Convolutions pad with zeros, max
//! pooling pads with negative infinity so padding can never win a window.

use super::tensor::{Scalar, Tensor4};

/// Returns `(pad_before, out_len)` for one axis.
#[inline]
pub fn same_padding(in_len: usize, k: usize, stride: usize) -> (usize, usize) {
    let out = in_len.div_ceil(stride);
    let pad_total = ((out - 1) * stride + k).saturating_sub(in_len);
    (pad_total / 2, out)
}

// ── convolution ─────────────────────────────────────────────────────────────

/// 2D convolution, stride (1,1), zero padding to preserve spatial dims.
/// Weights are `[kh][kw][cin][cout]` row-major, no bias.
pub fn conv2d_same<S: Scalar>(
    x: &Tensor4<S>,
    w: &[S],
    kh: usize,
    kw: usize,
    cout: usize,
) -> Tensor4<S> {
    let [b, h, wd, cin] = x.dims();
    debug_assert_eq!(w.len(), kh * kw * cin * cout);
    let (ph, _) = same_padding(h, kh, 1);
    let (pw, _) = same_padding(wd, kw, 1);
    let mut y = Tensor4::zeros([b, h, wd, cout]);
    let xd = x.data();
    let yd = y.data_mut();
    for bi in 0..b {
        for oh in 0..h {
            for kr in 0..kh {
                let ih = (oh + kr) as isize - ph as isize;
                if ih < 0 || ih >= h as isize {
                    continue;
                }
                let ih = ih as usize;
                for ow in 0..wd {
                    let yrow = ((bi * h + oh) * wd + ow) * cout;
                    for kc in 0..kw {
                        let iw = (ow + kc) as isize - pw as isize;
                        if iw < 0 || iw >= wd as isize {
                            continue;
                        }
                        let xrow = ((bi * h + ih) * wd + iw as usize) * cin;
                        let wbase = (kr * kw + kc) * cin * cout;
                        for ci in 0..cin {
                            let xv = xd[xrow + ci];
                            if xv == S::zero() {
                                continue;
                            }
                            let wrow = &w[wbase + ci * cout..wbase + (ci + 1) * cout];
                            let yr = &mut yd[yrow..yrow + cout];
                            for (o, &wv) in yr.iter_mut().zip(wrow) {
                                *o += xv * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

/// Adjoint of [`conv2d_same`]: gradients wrt input and weights.
pub fn conv2d_same_backward<S: Scalar>(
    x: &Tensor4<S>,
    w: &[S],
    kh: usize,
    kw: usize,
    cout: usize,
    dy: &Tensor4<S>,
) -> (Tensor4<S>, Vec<S>) {
    let [b, h, wd, cin] = x.dims();
    debug_assert_eq!(dy.dims(), [b, h, wd, cout]);
    let (ph, _) = same_padding(h, kh, 1);
    let (pw, _) = same_padding(wd, kw, 1);
    let mut dx = Tensor4::zeros([b, h, wd, cin]);
    let mut dw = vec![S::zero(); w.len()];
    let xd = x.data();
    let dyd = dy.data();
    let dxd = dx.data_mut();
    for bi in 0..b {
        for oh in 0..h {
            for kr in 0..kh {
                let ih = (oh + kr) as isize - ph as isize;
                if ih < 0 || ih >= h as isize {
                    continue;
                }
                let ih = ih as usize;
                for ow in 0..wd {
                    let dyrow = ((bi * h + oh) * wd + ow) * cout;
                    let dyr = &dyd[dyrow..dyrow + cout];
                    for kc in 0..kw {
                        let iw = (ow + kc) as isize - pw as isize;
                        if iw < 0 || iw >= wd as isize {
                            continue;
                        }
                        let xrow = ((bi * h + ih) * wd + iw as usize) * cin;
                        let wbase = (kr * kw + kc) * cin * cout;
                        for ci in 0..cin {
                            let wrow = &w[wbase + ci * cout..wbase + (ci + 1) * cout];
                            let mut acc = S::zero();
                            for (&g, &wv) in dyr.iter().zip(wrow) {
                                acc += g * wv;
                            }
                            dxd[xrow + ci] += acc;
                            let xv = xd[xrow + ci];
                            if xv != S::zero() {
                                let dwr = &mut dw[wbase + ci * cout..wbase + (ci + 1) * cout];
                                for (o, &g) in dwr.iter_mut().zip(dyr) {
                                    *o += xv * g;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (dx, dw)
}

/// Depthwise 2D convolution, stride (1,1), same padding, multiplier 1.
/// Weights are `[kh][kw][c]` row-major.
pub fn depthwise_conv2d_same<S: Scalar>(
    x: &Tensor4<S>,
    w: &[S],
    kh: usize,
    kw: usize,
) -> Tensor4<S> {
    let [b, h, wd, c] = x.dims();
    debug_assert_eq!(w.len(), kh * kw * c);
    let (ph, _) = same_padding(h, kh, 1);
    let (pw, _) = same_padding(wd, kw, 1);
    let mut y = Tensor4::zeros([b, h, wd, c]);
    let xd = x.data();
    let yd = y.data_mut();
    for bi in 0..b {
        for oh in 0..h {
            for kr in 0..kh {
                let ih = (oh + kr) as isize - ph as isize;
                if ih < 0 || ih >= h as isize {
                    continue;
                }
                let ih = ih as usize;
                for ow in 0..wd {
                    let yrow = ((bi * h + oh) * wd + ow) * c;
                    for kc in 0..kw {
                        let iw = (ow + kc) as isize - pw as isize;
                        if iw < 0 || iw >= wd as isize {
                            continue;
                        }
                        let xrow = ((bi * h + ih) * wd + iw as usize) * c;
                        let wrow = &w[(kr * kw + kc) * c..(kr * kw + kc + 1) * c];
                        let yr = &mut yd[yrow..yrow + c];
                        let xr = &xd[xrow..xrow + c];
                        for i in 0..c {
                            yr[i] += xr[i] * wrow[i];
                        }
                    }
                }
            }
        }
    }
    y
}

pub fn depthwise_conv2d_same_backward<S: Scalar>(
    x: &Tensor4<S>,
    w: &[S],
    kh: usize,
    kw: usize,
    dy: &Tensor4<S>,
) -> (Tensor4<S>, Vec<S>) {
    let [b, h, wd, c] = x.dims();
    debug_assert_eq!(dy.dims(), x.dims());
    let (ph, _) = same_padding(h, kh, 1);
    let (pw, _) = same_padding(wd, kw, 1);
    let mut dx = Tensor4::zeros(x.dims());
    let mut dw = vec![S::zero(); w.len()];
    let xd = x.data();
    let dyd = dy.data();
    let dxd = dx.data_mut();
    for bi in 0..b {
        for oh in 0..h {
            for kr in 0..kh {
                let ih = (oh + kr) as isize - ph as isize;
                if ih < 0 || ih >= h as isize {
                    continue;
                }
                let ih = ih as usize;
                for ow in 0..wd {
                    let dyrow = ((bi * h + oh) * wd + ow) * c;
                    for kc in 0..kw {
                        let iw = (ow + kc) as isize - pw as isize;
                        if iw < 0 || iw >= wd as isize {
                            continue;
                        }
                        let xrow = ((bi * h + ih) * wd + iw as usize) * c;
                        let wbase = (kr * kw + kc) * c;
                        for i in 0..c {
                            let g = dyd[dyrow + i];
                            dxd[xrow + i] += g * w[wbase + i];
                            dw[wbase + i] += g * xd[xrow + i];
                        }
                    }
                }
            }
        }
    }
    (dx, dw)
}

// ── pooling ─────────────────────────────────────────────────────────────────

/// Max pooling with same padding; padded positions hold negative infinity.
/// Returns the output and, per output element, the flat index of the input
/// element that won (first in scan order on ties).
pub fn maxpool_same<S: Scalar>(
    x: &Tensor4<S>,
    pool: (usize, usize),
    stride: (usize, usize),
) -> (Tensor4<S>, Vec<usize>) {
    let [b, h, w, c] = x.dims();
    let (ph, oh) = same_padding(h, pool.0, stride.0);
    let (pw, ow) = same_padding(w, pool.1, stride.1);
    let mut y = Tensor4::filled([b, oh, ow, c], S::neg_infinity());
    let mut arg = vec![usize::MAX; b * oh * ow * c];
    let xd = x.data();
    let yd = y.data_mut();
    for bi in 0..b {
        for oy in 0..oh {
            let h0 = (oy * stride.0) as isize - ph as isize;
            for ox in 0..ow {
                let w0 = (ox * stride.1) as isize - pw as isize;
                let yrow = ((bi * oh + oy) * ow + ox) * c;
                for kr in 0..pool.0 {
                    let ih = h0 + kr as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    for kc in 0..pool.1 {
                        let iw = w0 + kc as isize;
                        if iw < 0 || iw >= w as isize {
                            continue;
                        }
                        let xrow = ((bi * h + ih as usize) * w + iw as usize) * c;
                        for ci in 0..c {
                            let v = xd[xrow + ci];
                            if v > yd[yrow + ci] {
                                yd[yrow + ci] = v;
                                arg[yrow + ci] = xrow + ci;
                            }
                        }
                    }
                }
            }
        }
    }
    debug_assert!(arg.iter().all(|&i| i != usize::MAX));
    (y, arg)
}

/// Routes each output gradient to the input element that won its window.
pub fn maxpool_backward<S: Scalar>(
    dy: &Tensor4<S>,
    argmax: &[usize],
    x_dims: [usize; 4],
) -> Tensor4<S> {
    debug_assert_eq!(dy.len(), argmax.len());
    let mut dx = Tensor4::zeros(x_dims);
    let dxd = dx.data_mut();
    for (&g, &i) in dy.data().iter().zip(argmax) {
        dxd[i] += g;
    }
    dx
}

/// Average pooling with same padding; padded positions are excluded from the
/// mean, so edge windows average over their valid elements only.
pub fn avgpool_same<S: Scalar>(
    x: &Tensor4<S>,
    pool: (usize, usize),
    stride: (usize, usize),
) -> Tensor4<S> {
    let [b, h, w, c] = x.dims();
    let (ph, oh) = same_padding(h, pool.0, stride.0);
    let (pw, ow) = same_padding(w, pool.1, stride.1);
    let mut y = Tensor4::zeros([b, oh, ow, c]);
    let xd = x.data();
    let yd = y.data_mut();
    for bi in 0..b {
        for oy in 0..oh {
            let h0 = (oy * stride.0) as isize - ph as isize;
            for ox in 0..ow {
                let w0 = (ox * stride.1) as isize - pw as isize;
                let yrow = ((bi * oh + oy) * ow + ox) * c;
                let mut count = 0usize;
                for kr in 0..pool.0 {
                    let ih = h0 + kr as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    for kc in 0..pool.1 {
                        let iw = w0 + kc as isize;
                        if iw < 0 || iw >= w as isize {
                            continue;
                        }
                        count += 1;
                        let xrow = ((bi * h + ih as usize) * w + iw as usize) * c;
                        for ci in 0..c {
                            yd[yrow + ci] += xd[xrow + ci];
                        }
                    }
                }
                let inv = S::one() / S::from_f64(count as f64);
                for ci in 0..c {
                    yd[yrow + ci] *= inv;
                }
            }
        }
    }
    y
}

pub fn avgpool_backward<S: Scalar>(
    dy: &Tensor4<S>,
    x_dims: [usize; 4],
    pool: (usize, usize),
    stride: (usize, usize),
) -> Tensor4<S> {
    let [b, h, w, c] = x_dims;
    let [_, oh, ow, _] = dy.dims();
    let (ph, _) = same_padding(h, pool.0, stride.0);
    let (pw, _) = same_padding(w, pool.1, stride.1);
    let mut dx = Tensor4::zeros(x_dims);
    let dyd = dy.data();
    let dxd = dx.data_mut();
    for bi in 0..b {
        for oy in 0..oh {
            let h0 = (oy * stride.0) as isize - ph as isize;
            for ox in 0..ow {
                let w0 = (ox * stride.1) as isize - pw as isize;
                let mut count = 0usize;
                for kr in 0..pool.0 {
                    let ih = h0 + kr as isize;
                    if ih >= 0 && ih < h as isize {
                        for kc in 0..pool.1 {
                            let iw = w0 + kc as isize;
                            if iw >= 0 && iw < w as isize {
                                count += 1;
                            }
                        }
                    }
                }
                let inv = S::one() / S::from_f64(count as f64);
                let dyrow = ((bi * oh + oy) * ow + ox) * c;
                for kr in 0..pool.0 {
                    let ih = h0 + kr as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    for kc in 0..pool.1 {
                        let iw = w0 + kc as isize;
                        if iw < 0 || iw >= w as isize {
                            continue;
                        }
                        let xrow = ((bi * h + ih as usize) * w + iw as usize) * c;
                        for ci in 0..c {
                            dxd[xrow + ci] += dyd[dyrow + ci] * inv;
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Global max over the spatial axes: `[b,h,w,c] -> [b,1,1,c]`.
pub fn global_max_pool<S: Scalar>(x: &Tensor4<S>) -> (Tensor4<S>, Vec<usize>) {
    let [b, h, w, c] = x.dims();
    let mut y = Tensor4::filled([b, 1, 1, c], S::neg_infinity());
    let mut arg = vec![usize::MAX; b * c];
    let xd = x.data();
    let yd = y.data_mut();
    for bi in 0..b {
        for s in 0..h * w {
            let xrow = (bi * h * w + s) * c;
            for ci in 0..c {
                let v = xd[xrow + ci];
                if v > yd[bi * c + ci] {
                    yd[bi * c + ci] = v;
                    arg[bi * c + ci] = xrow + ci;
                }
            }
        }
    }
    (y, arg)
}

pub fn global_max_pool_backward<S: Scalar>(
    dy: &Tensor4<S>,
    argmax: &[usize],
    x_dims: [usize; 4],
) -> Tensor4<S> {
    let mut dx = Tensor4::zeros(x_dims);
    let dxd = dx.data_mut();
    for (&g, &i) in dy.data().iter().zip(argmax) {
        dxd[i] += g;
    }
    dx
}

// ── dense ───────────────────────────────────────────────────────────────────

/// Fully connected layer on flattened activations `[b,1,1,in] -> [b,1,1,out]`.
/// Weights are `[in][out]` row-major.
pub fn dense<S: Scalar>(x: &Tensor4<S>, w: &[S], bias: Option<&[S]>, out: usize) -> Tensor4<S> {
    let [b, h, wd, cin] = x.dims();
    debug_assert_eq!((h, wd), (1, 1), "dense expects flattened input");
    debug_assert_eq!(w.len(), cin * out);
    let mut y = Tensor4::zeros([b, 1, 1, out]);
    let xd = x.data();
    let yd = y.data_mut();
    for bi in 0..b {
        let yr = &mut yd[bi * out..(bi + 1) * out];
        if let Some(bias) = bias {
            yr.copy_from_slice(bias);
        }
        for i in 0..cin {
            let xv = xd[bi * cin + i];
            if xv == S::zero() {
                continue;
            }
            let wr = &w[i * out..(i + 1) * out];
            for (o, &wv) in yr.iter_mut().zip(wr) {
                *o += xv * wv;
            }
        }
    }
    y
}

/// Adjoint of [`dense`]: `(dx, dw, db)`; `db` is `None` when bias is absent.
pub fn dense_backward<S: Scalar>(
    x: &Tensor4<S>,
    w: &[S],
    out: usize,
    has_bias: bool,
    dy: &Tensor4<S>,
) -> (Tensor4<S>, Vec<S>, Option<Vec<S>>) {
    let [b, _, _, cin] = x.dims();
    let mut dx = Tensor4::zeros(x.dims());
    let mut dw = vec![S::zero(); cin * out];
    let mut db = if has_bias {
        Some(vec![S::zero(); out])
    } else {
        None
    };
    let xd = x.data();
    let dyd = dy.data();
    let dxd = dx.data_mut();
    for bi in 0..b {
        let dyr = &dyd[bi * out..(bi + 1) * out];
        if let Some(db) = db.as_mut() {
            for (a, &g) in db.iter_mut().zip(dyr) {
                *a += g;
            }
        }
        for i in 0..cin {
            let wr = &w[i * out..(i + 1) * out];
            let mut acc = S::zero();
            for (&g, &wv) in dyr.iter().zip(wr) {
                acc += g * wv;
            }
            dxd[bi * cin + i] = acc;
            let xv = xd[bi * cin + i];
            if xv != S::zero() {
                let dwr = &mut dw[i * out..(i + 1) * out];
                for (o, &g) in dwr.iter_mut().zip(dyr) {
                    *o += xv * g;
                }
            }
        }
    }
    (dx, dw, db)
}

// ── activations ─────────────────────────────────────────────────────────────

#[inline]
pub fn sigmoid<S: Scalar>(v: S) -> S {
    S::one() / (S::one() + (-v).exp())
}

pub fn relu_forward<S: Scalar>(x: &Tensor4<S>) -> Tensor4<S> {
    x.map(|v| if v > S::zero() { v } else { S::zero() })
}

pub fn relu_backward<S: Scalar>(x: &Tensor4<S>, dy: &Tensor4<S>) -> Tensor4<S> {
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        if v <= S::zero() {
            *d = S::zero();
        }
    }
    dx
}

pub fn swish_forward<S: Scalar>(x: &Tensor4<S>) -> Tensor4<S> {
    x.map(|v| v * sigmoid(v))
}

pub fn swish_backward<S: Scalar>(x: &Tensor4<S>, dy: &Tensor4<S>) -> Tensor4<S> {
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        let s = sigmoid(v);
        *d = *d * (s + v * s * (S::one() - s));
    }
    dx
}

pub fn sigmoid_forward<S: Scalar>(x: &Tensor4<S>) -> Tensor4<S> {
    x.map(sigmoid)
}

/// Backward through sigmoid given its output `y`.
pub fn sigmoid_backward<S: Scalar>(y: &Tensor4<S>, dy: &Tensor4<S>) -> Tensor4<S> {
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(y.data()) {
        *d = *d * v * (S::one() - v);
    }
    dx
}

// ── softmax ─────────────────────────────────────────────────────────────────

/// Softmax over the channel axis at every `(b,h,w)` position, with max
/// subtraction for stability.
pub fn softmax_channels<S: Scalar>(x: &Tensor4<S>) -> Tensor4<S> {
    let [b, h, w, c] = x.dims();
    let mut y = x.clone();
    let yd = y.data_mut();
    for row in 0..b * h * w {
        let r = &mut yd[row * c..(row + 1) * c];
        let mut mx = r[0];
        for &v in r.iter() {
            if v > mx {
                mx = v;
            }
        }
        let mut sum = S::zero();
        for v in r.iter_mut() {
            *v = (*v - mx).exp();
            sum += *v;
        }
        for v in r.iter_mut() {
            *v /= sum;
        }
    }
    y
}

/// Backward through softmax given its output `y`:
/// `dx_i = y_i * (dy_i - sum_j dy_j y_j)` per row.
pub fn softmax_backward<S: Scalar>(y: &Tensor4<S>, dy: &Tensor4<S>) -> Tensor4<S> {
    let [b, h, w, c] = y.dims();
    let mut dx = Tensor4::zeros(y.dims());
    let yd = y.data();
    let dyd = dy.data();
    let dxd = dx.data_mut();
    for row in 0..b * h * w {
        let yr = &yd[row * c..(row + 1) * c];
        let dyr = &dyd[row * c..(row + 1) * c];
        let mut dot = S::zero();
        for i in 0..c {
            dot += yr[i] * dyr[i];
        }
        let dxr = &mut dxd[row * c..(row + 1) * c];
        for i in 0..c {
            dxr[i] = yr[i] * (dyr[i] - dot);
        }
    }
    dx
}

// ── nearest-neighbor resize ─────────────────────────────────────────────────

#[inline]
fn nearest_src(dst: usize, src_len: usize, dst_len: usize) -> usize {
    dst * src_len / dst_len
}

/// Nearest-neighbor spatial resize to `(th, tw)`. With an integer upscale
/// factor this is block replication: a 2x upscale turns each element into a
/// 2x2 block.
pub fn resize_nearest<S: Scalar>(x: &Tensor4<S>, th: usize, tw: usize) -> Tensor4<S> {
    let [b, h, w, c] = x.dims();
    let mut y = Tensor4::zeros([b, th, tw, c]);
    let xd = x.data();
    let yd = y.data_mut();
    for bi in 0..b {
        for oh in 0..th {
            let ih = nearest_src(oh, h, th);
            for ow in 0..tw {
                let iw = nearest_src(ow, w, tw);
                let xrow = ((bi * h + ih) * w + iw) * c;
                let yrow = ((bi * th + oh) * tw + ow) * c;
                yd[yrow..yrow + c].copy_from_slice(&xd[xrow..xrow + c]);
            }
        }
    }
    y
}

/// Adjoint of [`resize_nearest`]: each output gradient accumulates into the
/// source element it replicated.
pub fn resize_nearest_backward<S: Scalar>(dy: &Tensor4<S>, x_dims: [usize; 4]) -> Tensor4<S> {
    let [b, h, w, c] = x_dims;
    let [_, th, tw, _] = dy.dims();
    let mut dx = Tensor4::zeros(x_dims);
    let dyd = dy.data();
    let dxd = dx.data_mut();
    for bi in 0..b {
        for oh in 0..th {
            let ih = nearest_src(oh, h, th);
            for ow in 0..tw {
                let iw = nearest_src(ow, w, tw);
                let xrow = ((bi * h + ih) * w + iw) * c;
                let yrow = ((bi * th + oh) * tw + ow) * c;
                for ci in 0..c {
                    dxd[xrow + ci] += dyd[yrow + ci];
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t4(dims: [usize; 4], v: Vec<f64>) -> Tensor4<f64> {
        Tensor4::from_vec(dims, v).unwrap()
    }

    #[test]
    fn one_by_one_identity_kernel_is_identity() {
        let x = t4([1, 2, 3, 1], (1..=6).map(f64::from).collect());
        let y = conv2d_same(&x, &[1.0], 1, 1, 1);
        assert_eq!(y, x);
    }

    #[test]
    fn even_kernel_pads_after_not_before() {
        // 2x2 ones kernel over a 2x2 ones input: same padding puts the extra
        // row/column at the bottom/right, so out[0,0] sees the full window
        // and out[1,1] sees only one real element.
        let x = t4([1, 2, 2, 1], vec![1.0; 4]);
        let y = conv2d_same(&x, &[1.0; 4], 2, 2, 1);
        assert_eq!(y.at(0, 0, 0, 0), 4.0);
        assert_eq!(y.at(0, 0, 1, 0), 2.0);
        assert_eq!(y.at(0, 1, 0, 0), 2.0);
        assert_eq!(y.at(0, 1, 1, 0), 1.0);
    }

    /// Direct per-element convolution used as an oracle.
    fn conv_naive(x: &Tensor4<f64>, w: &[f64], kh: usize, kw: usize, cout: usize) -> Tensor4<f64> {
        let [b, h, wd, cin] = x.dims();
        let (ph, _) = same_padding(h, kh, 1);
        let (pw, _) = same_padding(wd, kw, 1);
        let mut y = Tensor4::zeros([b, h, wd, cout]);
        for bi in 0..b {
            for oh in 0..h {
                for ow in 0..wd {
                    for co in 0..cout {
                        let mut acc = 0.0;
                        for kr in 0..kh {
                            for kc in 0..kw {
                                let ih = oh as isize + kr as isize - ph as isize;
                                let iw = ow as isize + kc as isize - pw as isize;
                                if ih < 0 || iw < 0 || ih >= h as isize || iw >= wd as isize {
                                    continue;
                                }
                                for ci in 0..cin {
                                    acc += x.at(bi, ih as usize, iw as usize, ci)
                                        * w[((kr * kw + kc) * cin + ci) * cout + co];
                                }
                            }
                        }
                        y.set(bi, oh, ow, co, acc);
                    }
                }
            }
        }
        y
    }

    #[test]
    fn conv_matches_naive_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for &(kh, kw, cin, cout, h, w) in
            &[(3, 3, 2, 4, 5, 6), (2, 5, 1, 3, 4, 4), (4, 1, 3, 2, 3, 7)]
        {
            let x = t4(
                [2, h, w, cin],
                (0..2 * h * w * cin)
                    .map(|_| rng.random::<f64>() - 0.5)
                    .collect(),
            );
            let wts: Vec<f64> = (0..kh * kw * cin * cout)
                .map(|_| rng.random::<f64>() - 0.5)
                .collect();
            let fast = conv2d_same(&x, &wts, kh, kw, cout);
            let slow = conv_naive(&x, &wts, kh, kw, cout);
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn depthwise_matches_per_channel_conv() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let (h, w, c) = (5, 4, 3);
        let x = t4(
            [1, h, w, c],
            (0..h * w * c).map(|_| rng.random::<f64>() - 0.5).collect(),
        );
        let wts: Vec<f64> = (0..9 * c).map(|_| rng.random::<f64>() - 0.5).collect();
        let y = depthwise_conv2d_same(&x, &wts, 3, 3);
        // Oracle: run each channel through a 1-channel full convolution.
        for ci in 0..c {
            let xc = t4(
                [1, h, w, 1],
                (0..h * w).map(|s| x.data()[s * c + ci]).collect(),
            );
            let wc: Vec<f64> = (0..9).map(|k| wts[k * c + ci]).collect();
            let yc = conv2d_same(&xc, &wc, 3, 3, 1);
            for s in 0..h * w {
                assert!((y.data()[s * c + ci] - yc.data()[s]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn maxpool_basics() {
        let x = t4([1, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]);
        let (y, arg) = maxpool_same(&x, (2, 2), (2, 2));
        assert_eq!(y.dims(), [1, 1, 1, 1]);
        assert_eq!(y.data()[0], 4.0);
        assert_eq!(arg[0], 3);

        let c = t4([1, 4, 4, 1], vec![5.0; 16]);
        let (yc, _) = maxpool_same(&c, (2, 2), (2, 2));
        assert!(yc.data().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn maxpool_output_dims_are_ceil_of_stride_division() {
        for &(h, w, p, s) in &[(5, 7, 2, 2), (3, 3, 3, 2), (6, 2, 48, 2), (1, 9, 4, 3)] {
            let x = Tensor4::<f64>::filled([1, h, w, 2], 1.0);
            let (y, _) = maxpool_same(&x, (p, p), (s, s));
            assert_eq!(y.dims(), [1, h.div_ceil(s), w.div_ceil(s), 2]);
        }
    }

    #[test]
    fn maxpool_ignores_padding_for_all_negative_input() {
        // -inf padding can never win, so a window hanging off the edge still
        // picks the largest real (negative) element.
        let x = t4([1, 3, 3, 1], vec![-9.0, -8.0, -7.0, -6.0, -5.0, -4.0, -3.0, -2.0, -1.0]);
        let (y, _) = maxpool_same(&x, (2, 2), (2, 2));
        assert_eq!(y.dims(), [1, 2, 2, 1]);
        assert_eq!(y.data(), &[-5.0, -4.0, -2.0, -1.0]);
    }

    #[test]
    fn maxpool_backward_routes_to_argmax_only() {
        let x = t4([1, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]);
        let (_, arg) = maxpool_same(&x, (2, 2), (2, 2));
        let dy = t4([1, 1, 1, 1], vec![10.0]);
        let dx = maxpool_backward(&dy, &arg, x.dims());
        assert_eq!(dx.data(), &[0.0, 0.0, 0.0, 10.0]);
    }

    #[test]
    fn avgpool_excludes_padding_from_the_mean() {
        let x = t4([1, 3, 3, 1], (1..=9).map(f64::from).collect());
        let y = avgpool_same(&x, (2, 2), (2, 2));
        assert_eq!(y.dims(), [1, 2, 2, 1]);
        // Windows: {1,2,4,5}, {3,6}, {7,8}, {9}.
        assert_eq!(y.data(), &[3.0, 4.5, 7.5, 9.0]);
    }

    #[test]
    fn avgpool_backward_distributes_uniformly() {
        let x = t4([1, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]);
        let dy = t4([1, 1, 1, 1], vec![8.0]);
        let dx = avgpool_backward(&dy, x.dims(), (2, 2), (2, 2));
        assert_eq!(dx.data(), &[2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn global_max_pool_picks_per_channel_max() {
        let mut x = Tensor4::<f64>::filled([1, 3, 3, 2], -1.0);
        x.set(0, 2, 1, 0, 5.0);
        x.set(0, 0, 0, 1, -0.5);
        let (y, arg) = global_max_pool(&x);
        assert_eq!(y.dims(), [1, 1, 1, 2]);
        assert_eq!(y.data(), &[5.0, -0.5]);
        let dy = t4([1, 1, 1, 2], vec![1.0, 2.0]);
        let dx = global_max_pool_backward(&dy, &arg, x.dims());
        assert_eq!(dx.at(0, 2, 1, 0), 1.0);
        assert_eq!(dx.at(0, 0, 0, 1), 2.0);
        assert_eq!(dx.data().iter().filter(|&&v| v != 0.0).count(), 2);
    }

    #[test]
    fn dense_identity_and_bias() {
        let x = t4([2, 1, 1, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let w = vec![1.0, 0.0, 0.0, 1.0];
        let y = dense(&x, &w, Some(&[10.0, 20.0]), 2);
        assert_eq!(y.data(), &[11.0, 22.0, 13.0, 24.0]);
    }

    #[test]
    fn softmax_rows_are_distributions() {
        let x = t4([1, 1, 2, 3], vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0]);
        let y = softmax_channels(&x);
        for row in 0..2 {
            let s: f64 = y.data()[row * 3..(row + 1) * 3].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        for i in 0..3 {
            assert!((y.data()[i] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_is_shift_invariant_and_stable() {
        let x = t4([1, 1, 1, 3], vec![1000.0, 1001.0, 1002.0]);
        let y = softmax_channels(&x);
        let x2 = t4([1, 1, 1, 3], vec![0.0, 1.0, 2.0]);
        let y2 = softmax_channels(&x2);
        for (a, b) in y.data().iter().zip(y2.data()) {
            assert!((a - b).abs() < 1e-12);
            assert!(a.is_finite());
        }
    }

    #[test]
    fn resize_replicates_blocks_on_integer_upscale() {
        let x = t4([1, 1, 1, 1], vec![7.0]);
        let y = resize_nearest(&x, 2, 2);
        assert_eq!(y.data(), &[7.0; 4]);

        let x2 = t4([1, 2, 1, 1], vec![1.0, 2.0]);
        let y2 = resize_nearest(&x2, 4, 2);
        assert_eq!(y2.data(), &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn pool_after_upsample_is_identity_on_any_input() {
        let x = t4([1, 2, 3, 2], (0..12).map(f64::from).collect());
        let up = resize_nearest(&x, 4, 6);
        let (down, _) = maxpool_same(&up, (2, 2), (2, 2));
        assert_eq!(down, x);
    }

    #[test]
    fn resize_backward_accumulates_block_gradients() {
        let dy = t4([1, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]);
        let dx = resize_nearest_backward(&dy, [1, 1, 1, 1]);
        assert_eq!(dx.data(), &[10.0]);
    }

    #[test]
    fn activation_point_values() {
        let x = t4([1, 1, 1, 3], vec![-1.0, 0.0, 2.0]);
        let r = relu_forward(&x);
        assert_eq!(r.data(), &[0.0, 0.0, 2.0]);
        let s = swish_forward(&x);
        assert_eq!(s.data()[1], 0.0);
        assert!((s.data()[2] - 2.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-12);
        let g = sigmoid_forward(&x);
        assert_eq!(g.data()[1], 0.5);
    }
}
