//! Forward and backward numerical kernels shared by the autodiff graph and
//! the graph-free inference path. Everything is row-major `f64`.

/// `C = alpha · op(A) · op(B) + beta · C` where `op(A)` is `m x k` and
/// `op(B)` is `k x n`. A transposed operand is stored as its transpose.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of one strided, zero-padded 2D window sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    /// Output side `floor((H + 2p − k)/s) + 1`, or `None` when it would be
    /// empty.
    pub(crate) fn new(
        channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Option<Self> {
        if kernel == 0 || stride == 0 {
            return None;
        }
        let out = |len: usize| {
            let padded = len + 2 * padding;
            (padded >= kernel).then(|| (padded - kernel) / stride + 1)
        };
        Some(Self {
            channels,
            height,
            width,
            kernel,
            stride,
            padding,
            out_h: out(height)?,
            out_w: out(width)?,
        })
    }

    pub(crate) fn col_rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub(crate) fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }

    pub(crate) fn image_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    #[inline]
    fn source(&self, o: usize, k: usize, len: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < len).then_some(pos as usize)
    }
}

/// Unfolds one `[C, H, W]` image into `[C·k·k, Ho·Wo]` columns.
pub(crate) fn im2col(img: &[f64], g: &ConvGeom, col: &mut [f64]) {
    let (k, ow) = (g.kernel, g.out_w);
    let cols = g.col_cols();
    for c in 0..g.channels {
        let plane = &img[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let dst = &mut col[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let line = &mut dst[oy * ow..(oy + 1) * ow];
                    match g.source(oy, ki, g.height) {
                        None => line.fill(0.0),
                        Some(iy) => {
                            let src = &plane[iy * g.width..(iy + 1) * g.width];
                            for (ox, v) in line.iter_mut().enumerate() {
                                *v = g.source(ox, kj, g.width).map_or(0.0, |ix| src[ix]);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds columns back into an image.
pub(crate) fn col2im(col: &[f64], g: &ConvGeom, img: &mut [f64]) {
    let (k, ow) = (g.kernel, g.out_w);
    let cols = g.col_cols();
    for c in 0..g.channels {
        let plane = &mut img[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let src = &col[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let Some(iy) = g.source(oy, ki, g.height) else {
                        continue;
                    };
                    let line = &src[oy * ow..(oy + 1) * ow];
                    let dst = &mut plane[iy * g.width..(iy + 1) * g.width];
                    for (ox, v) in line.iter().enumerate() {
                        if let Some(ix) = g.source(ox, kj, g.width) {
                            dst[ix] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `batch` images `[C, H, W]` with weights
/// `[O, C, k, k]`; returns `[batch, O, Ho, Wo]`.
pub(crate) fn conv2d_forward(
    input: &[f64],
    batch: usize,
    g: &ConvGeom,
    weight: &[f64],
    out_ch: usize,
    bias: Option<&[f64]>,
) -> Vec<f64> {
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let mut col = vec![0.0; rows * cols];
    let mut out = vec![0.0; batch * out_ch * cols];
    for b in 0..batch {
        im2col(&input[b * g.image_len()..(b + 1) * g.image_len()], g, &mut col);
        let dst = &mut out[b * out_ch * cols..(b + 1) * out_ch * cols];
        if let Some(bias) = bias {
            for (o, chunk) in dst.chunks_mut(cols).enumerate() {
                chunk.fill(bias[o]);
            }
        }
        let beta = if bias.is_some() { 1.0 } else { 0.0 };
        gemm(out_ch, rows, cols, 1.0, weight, false, &col, false, beta, dst);
    }
    out
}

/// Gradients of [`conv2d_forward`] with respect to input, weight and bias.
pub(crate) fn conv2d_backward(
    input: &[f64],
    batch: usize,
    g: &ConvGeom,
    weight: &[f64],
    out_ch: usize,
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let mut col = vec![0.0; rows * cols];
    let mut dcol = vec![0.0; rows * cols];
    let mut d_in = vec![0.0; batch * g.image_len()];
    let mut d_w = vec![0.0; out_ch * rows];
    let mut d_b = vec![0.0; out_ch];
    for b in 0..batch {
        let gout = &grad_out[b * out_ch * cols..(b + 1) * out_ch * cols];
        im2col(&input[b * g.image_len()..(b + 1) * g.image_len()], g, &mut col);
        gemm(out_ch, cols, rows, 1.0, gout, false, &col, true, 1.0, &mut d_w);
        gemm(rows, out_ch, cols, 1.0, weight, true, gout, false, 0.0, &mut dcol);
        col2im(&dcol, g, &mut d_in[b * g.image_len()..(b + 1) * g.image_len()]);
        for (o, chunk) in gout.chunks(cols).enumerate() {
            d_b[o] += chunk.iter().sum::<f64>();
        }
    }
    (d_in, d_w, d_b)
}

/// Transposed convolution: the adjoint of a convolution whose geometry is
/// `g` (so `g` describes the *output* image and `g.out_h x g.out_w` the
/// input). Input `[batch, Ci, Hi, Wi]`, weight `[Ci, Co, k, k]`, output
/// `[batch, Co, Ho, Wo]` with `Co = g.channels`.
pub(crate) fn conv_transpose2d_forward(
    input: &[f64],
    batch: usize,
    g: &ConvGeom,
    weight: &[f64],
    in_ch: usize,
    bias: Option<&[f64]>,
) -> Vec<f64> {
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let mut col = vec![0.0; rows * cols];
    let plane = g.height * g.width;
    let mut out = vec![0.0; batch * g.image_len()];
    for b in 0..batch {
        let src = &input[b * in_ch * cols..(b + 1) * in_ch * cols];
        gemm(rows, in_ch, cols, 1.0, weight, true, src, false, 0.0, &mut col);
        let dst = &mut out[b * g.image_len()..(b + 1) * g.image_len()];
        col2im(&col, g, dst);
        if let Some(bias) = bias {
            for (c, chunk) in dst.chunks_mut(plane).enumerate() {
                chunk.iter_mut().for_each(|v| *v += bias[c]);
            }
        }
    }
    out
}

pub(crate) fn conv_transpose2d_backward(
    input: &[f64],
    batch: usize,
    g: &ConvGeom,
    weight: &[f64],
    in_ch: usize,
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let plane = g.height * g.width;
    let mut dcol = vec![0.0; rows * cols];
    let mut d_in = vec![0.0; batch * in_ch * cols];
    let mut d_w = vec![0.0; in_ch * rows];
    let mut d_b = vec![0.0; g.channels];
    for b in 0..batch {
        let gout = &grad_out[b * g.image_len()..(b + 1) * g.image_len()];
        im2col(gout, g, &mut dcol);
        let x = &input[b * in_ch * cols..(b + 1) * in_ch * cols];
        gemm(in_ch, rows, cols, 1.0, weight, false, &dcol, false, 0.0, &mut d_in[b * in_ch * cols..(b + 1) * in_ch * cols]);
        gemm(in_ch, cols, rows, 1.0, x, false, &dcol, true, 1.0, &mut d_w);
        for (c, chunk) in gout.chunks(plane).enumerate() {
            d_b[c] += chunk.iter().sum::<f64>();
        }
    }
    (d_in, d_w, d_b)
}

pub(crate) fn leaky_relu(x: &[f64], slope: f64) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect()
}

/// `x · W + b` for `rows` inputs of width `in_dim`; `W` is `[in, out]`.
pub(crate) fn linear_forward(
    x: &[f64],
    rows: usize,
    in_dim: usize,
    w: &[f64],
    out_dim: usize,
    b: Option<&[f64]>,
) -> Vec<f64> {
    let mut out = vec![0.0; rows * out_dim];
    let beta = match b {
        Some(b) => {
            for row in out.chunks_mut(out_dim) {
                row.copy_from_slice(b);
            }
            1.0
        }
        None => 0.0,
    };
    gemm(rows, in_dim, out_dim, 1.0, x, false, w, false, beta, &mut out);
    out
}

/// Per-row statistics cached by the layer-norm forward pass.
pub(crate) struct NormCache {
    pub xhat: Vec<f64>,
    pub rstd: Vec<f64>,
}

pub(crate) fn layer_norm_forward(
    x: &[f64],
    dim: usize,
    gain: &[f64],
    bias: &[f64],
    eps: f64,
) -> (Vec<f64>, NormCache) {
    let rows = x.len() / dim;
    let mut out = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut rstd = vec![0.0; rows];
    for r in 0..rows {
        let row = &x[r * dim..(r + 1) * dim];
        let mean = row.iter().sum::<f64>() / dim as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / dim as f64;
        let inv = 1.0 / (var + eps).sqrt();
        rstd[r] = inv;
        for i in 0..dim {
            let h = (row[i] - mean) * inv;
            xhat[r * dim + i] = h;
            out[r * dim + i] = h * gain[i] + bias[i];
        }
    }
    (out, NormCache { xhat, rstd })
}

pub(crate) fn layer_norm_backward(
    cache: &NormCache,
    dim: usize,
    gain: &[f64],
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let rows = grad_out.len() / dim;
    let mut dx = vec![0.0; grad_out.len()];
    let mut dg = vec![0.0; dim];
    let mut db = vec![0.0; dim];
    let mut dxhat = vec![0.0; dim];
    for r in 0..rows {
        let gy = &grad_out[r * dim..(r + 1) * dim];
        let xh = &cache.xhat[r * dim..(r + 1) * dim];
        let mut mean_d = 0.0;
        let mut mean_dx = 0.0;
        for i in 0..dim {
            dg[i] += gy[i] * xh[i];
            db[i] += gy[i];
            dxhat[i] = gy[i] * gain[i];
            mean_d += dxhat[i];
            mean_dx += dxhat[i] * xh[i];
        }
        mean_d /= dim as f64;
        mean_dx /= dim as f64;
        for i in 0..dim {
            dx[r * dim + i] = cache.rstd[r] * (dxhat[i] - mean_d - xh[i] * mean_dx);
        }
    }
    (dx, dg, db)
}

/// Scaled dot-product attention over `batch` sequences of `len` tokens.
///
/// `q`, `k`, `v` are `[batch·len, dim]`, split column-wise into `heads`.
/// `mask` is an additive `[len, len]` table (0 or −∞). Returns the output
/// and the attention probabilities `[batch, heads, len, len]`.
pub(crate) fn attention_forward(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    batch: usize,
    len: usize,
    dim: usize,
    heads: usize,
    mask: Option<&[f64]>,
) -> (Vec<f64>, Vec<f64>) {
    let hd = dim / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let mut out = vec![0.0; batch * len * dim];
    let mut probs = vec![0.0; batch * heads * len * len];
    for b in 0..batch {
        for h in 0..heads {
            let p = &mut probs[(b * heads + h) * len * len..(b * heads + h + 1) * len * len];
            for i in 0..len {
                let qi = &q[(b * len + i) * dim + h * hd..(b * len + i) * dim + (h + 1) * hd];
                let row = &mut p[i * len..(i + 1) * len];
                let mut max = f64::NEG_INFINITY;
                for j in 0..len {
                    let m = mask.map_or(0.0, |m| m[i * len + j]);
                    if m == f64::NEG_INFINITY {
                        row[j] = f64::NEG_INFINITY;
                        continue;
                    }
                    let kj = &k[(b * len + j) * dim + h * hd..(b * len + j) * dim + (h + 1) * hd];
                    let s = qi.iter().zip(kj).map(|(a, c)| a * c).sum::<f64>() * scale + m;
                    row[j] = s;
                    max = max.max(s);
                }
                let mut total = 0.0;
                for s in row.iter_mut() {
                    *s = if *s == f64::NEG_INFINITY { 0.0 } else { (*s - max).exp() };
                    total += *s;
                }
                for s in row.iter_mut() {
                    *s /= total;
                }
                let oi = &mut out[(b * len + i) * dim + h * hd..(b * len + i) * dim + (h + 1) * hd];
                for j in 0..len {
                    let pij = row[j];
                    if pij == 0.0 {
                        continue;
                    }
                    let vj = &v[(b * len + j) * dim + h * hd..(b * len + j) * dim + (h + 1) * hd];
                    for (o, x) in oi.iter_mut().zip(vj) {
                        *o += pij * x;
                    }
                }
            }
        }
    }
    (out, probs)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn attention_backward(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    probs: &[f64],
    batch: usize,
    len: usize,
    dim: usize,
    heads: usize,
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hd = dim / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let mut dq = vec![0.0; q.len()];
    let mut dk = vec![0.0; k.len()];
    let mut dv = vec![0.0; v.len()];
    let mut dp = vec![0.0; len];
    let span = |b: usize, t: usize, h: usize| {
        (b * len + t) * dim + h * hd..(b * len + t) * dim + (h + 1) * hd
    };
    for b in 0..batch {
        for h in 0..heads {
            let p = &probs[(b * heads + h) * len * len..(b * heads + h + 1) * len * len];
            for i in 0..len {
                let go = &grad_out[span(b, i, h)];
                let row = &p[i * len..(i + 1) * len];
                let mut weighted = 0.0;
                for j in 0..len {
                    if row[j] == 0.0 {
                        dp[j] = 0.0;
                        continue;
                    }
                    let vj = &v[span(b, j, h)];
                    dp[j] = go.iter().zip(vj).map(|(a, c)| a * c).sum();
                    weighted += row[j] * dp[j];
                    for (d, g) in dv[span(b, j, h)].iter_mut().zip(go) {
                        *d += row[j] * g;
                    }
                }
                for j in 0..len {
                    if row[j] == 0.0 {
                        continue;
                    }
                    let ds = row[j] * (dp[j] - weighted) * scale;
                    let (qs, ks) = (span(b, i, h), span(b, j, h));
                    for t in 0..hd {
                        dq[qs.start + t] += ds * k[ks.start + t];
                        dk[ks.start + t] += ds * q[qs.start + t];
                    }
                }
            }
        }
    }
    (dq, dk, dv)
}
