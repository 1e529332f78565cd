use super::kernels::{self, ConvGeom, NormCache};
use crate::error::{shape_err, Error, Result};
use crate::tensor::RealTensor;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Additive attention mask over `[len, len]` score tables. Entries are `0`
/// (attend) or `−∞` (blocked).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMask {
    len: usize,
    data: Vec<f64>,
}

impl AttentionMask {
    /// Strict causal mask: position `i` sees positions `0..=i`.
    pub fn causal(len: usize) -> Self {
        let mut data = vec![0.0; len * len];
        for i in 0..len {
            for j in i + 1..len {
                data[i * len + j] = f64::NEG_INFINITY;
            }
        }
        Self { len, data }
    }

    pub fn from_entries(len: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != len * len {
            return shape_err(format!("mask needs {} entries, got {}", len * len, data.len()));
        }
        if data.iter().any(|&v| v != 0.0 && v != f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument("mask entries must be 0 or -inf".into()));
        }
        for i in 0..len {
            if data[i * len..(i + 1) * len].iter().all(|&v| v == f64::NEG_INFINITY) {
                return Err(Error::InvalidArgument(format!("mask row {i} blocks every position")));
            }
        }
        Ok(Self { len, data })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }
}

enum Op {
    Leaf,
    Add(usize, usize),
    Scale(usize, f64),
    Sum(usize),
    Reshape(usize),
    LeakyRelu(usize, f64),
    Linear {
        x: usize,
        w: usize,
        b: Option<usize>,
        rows: usize,
        in_dim: usize,
        out_dim: usize,
    },
    Conv2d {
        x: usize,
        w: usize,
        b: Option<usize>,
        batch: usize,
        geom: ConvGeom,
        out_ch: usize,
    },
    ConvTranspose2d {
        x: usize,
        w: usize,
        b: Option<usize>,
        batch: usize,
        geom: ConvGeom,
        in_ch: usize,
    },
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        dim: usize,
        cache: NormCache,
    },
    Attention {
        q: usize,
        k: usize,
        v: usize,
        batch: usize,
        len: usize,
        heads: usize,
        probs: Vec<f64>,
    },
    AddPositional {
        x: usize,
        pe: usize,
        len: usize,
        dim: usize,
    },
    Mse(usize, usize),
}

struct Node {
    value: RealTensor,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
}

/// Tape of a single forward pass. Nodes are stored in creation order, which
/// is a topological order, so backward is a reverse sweep.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    backward_done: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: RealTensor) -> Var {
        self.push(value, true, Op::Leaf)
    }

    /// Constant leaf (inputs, targets).
    pub fn constant(&mut self, value: RealTensor) -> Var {
        self.push(value, false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &RealTensor {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated by [`Graph::backward`]; zeros for nodes the loss
    /// does not reach.
    pub fn grad(&self, v: Var) -> RealTensor {
        let node = &self.nodes[v.0];
        match &node.grad {
            Some(g) => RealTensor::from_parts(node.value.shape().to_vec(), g.clone()),
            None => RealTensor::zeros(node.value.shape()),
        }
    }

    /// Clears all gradients so that backward may run again.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.backward_done = false;
    }

    fn push(&mut self, value: RealTensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, shape: Vec<usize>, data: Vec<f64>, parents: &[usize], op: Op) -> Var {
        let rg = parents.iter().any(|&p| self.nodes[p].requires_grad);
        self.push(RealTensor::from_parts(shape, data), rg, op)
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return shape_err(format!("add {:?} + {:?}", self.shape(a), self.shape(b)));
        }
        let data = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.derived(shape, data, &[a.0, b.0], Op::Add(a.0, b.0)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let data = self.data(a).iter().map(|x| x * s).collect();
        let shape = self.shape(a).to_vec();
        self.derived(shape, data, &[a.0], Op::Scale(a.0, s))
    }

    /// Sum of all entries, as a rank-0 tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.data(a).iter().sum();
        self.derived(Vec::new(), vec![total], &[a.0], Op::Sum(a.0))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(a).len() {
            return shape_err(format!("reshape {:?} to {shape:?}", self.shape(a)));
        }
        let data = self.data(a).to_vec();
        Ok(self.derived(shape.to_vec(), data, &[a.0], Op::Reshape(a.0)))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let data = kernels::leaky_relu(self.data(a), slope);
        let shape = self.shape(a).to_vec();
        self.derived(shape, data, &[a.0], Op::LeakyRelu(a.0, slope))
    }

    /// Affine map over the last axis: `x · W + b` with `W: [in, out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        if ws.len() != 2 || xs.is_empty() || *xs.last().unwrap() != ws[0] {
            return shape_err(format!("linear {xs:?} x {ws:?}"));
        }
        let (in_dim, out_dim) = (ws[0], ws[1]);
        if let Some(b) = b {
            if self.shape(b) != [out_dim] {
                return shape_err(format!("linear bias {:?}, expected [{out_dim}]", self.shape(b)));
            }
        }
        let rows = self.value(x).len() / in_dim;
        let mut shape = xs.to_vec();
        *shape.last_mut().unwrap() = out_dim;
        let data = kernels::linear_forward(
            self.data(x),
            rows,
            in_dim,
            self.data(w),
            out_dim,
            b.map(|b| self.data(b)),
        );
        let mut parents = vec![x.0, w.0];
        parents.extend(b.map(|b| b.0));
        let op = Op::Linear {
            x: x.0,
            w: w.0,
            b: b.map(|b| b.0),
            rows,
            in_dim,
            out_dim,
        };
        Ok(self.derived(shape, data, &parents, op))
    }

    /// 2D cross-correlation. `x: [B, Cin, H, W]`, `w: [Cout, Cin, k, k]`,
    /// optional bias `[Cout]`.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 || ws[1] != xs[1] || ws[2] != ws[3] {
            return shape_err(format!("conv2d input {xs:?} kernel {ws:?}"));
        }
        let geom = ConvGeom::new(xs[1], xs[2], xs[3], ws[2], stride, padding)
            .ok_or_else(|| Error::Shape(format!("conv2d on {xs:?} has empty output")))?;
        let out_ch = ws[0];
        self.check_bias(b, out_ch)?;
        let data = kernels::conv2d_forward(
            self.data(x),
            xs[0],
            &geom,
            self.data(w),
            out_ch,
            b.map(|b| self.data(b)),
        );
        let mut parents = vec![x.0, w.0];
        parents.extend(b.map(|b| b.0));
        let shape = vec![xs[0], out_ch, geom.out_h, geom.out_w];
        let op = Op::Conv2d {
            x: x.0,
            w: w.0,
            b: b.map(|b| b.0),
            batch: xs[0],
            geom,
            out_ch,
        };
        Ok(self.derived(shape, data, &parents, op))
    }

    /// Transposed convolution, the adjoint of [`Graph::conv2d`] with the same
    /// kernel tensor. `x: [B, Cin, H, W]`, `w: [Cin, Cout, k, k]`, output side
    /// `(H − 1)·stride − 2·padding + k`.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 || ws[0] != xs[1] || ws[2] != ws[3] {
            return shape_err(format!("conv_transpose2d input {xs:?} kernel {ws:?}"));
        }
        let geom = transpose_geom(ws[1], xs[2], xs[3], ws[2], stride, padding)?;
        self.check_bias(b, ws[1])?;
        let data = kernels::conv_transpose2d_forward(
            self.data(x),
            xs[0],
            &geom,
            self.data(w),
            xs[1],
            b.map(|b| self.data(b)),
        );
        let mut parents = vec![x.0, w.0];
        parents.extend(b.map(|b| b.0));
        let shape = vec![xs[0], ws[1], geom.height, geom.width];
        let op = Op::ConvTranspose2d {
            x: x.0,
            w: w.0,
            b: b.map(|b| b.0),
            batch: xs[0],
            geom,
            in_ch: xs[1],
        };
        Ok(self.derived(shape, data, &parents, op))
    }

    fn check_bias(&self, b: Option<Var>, channels: usize) -> Result<()> {
        match b {
            Some(b) if self.shape(b) != [channels] => {
                shape_err(format!("bias {:?}, expected [{channels}]", self.shape(b)))
            }
            _ => Ok(()),
        }
    }

    /// Normalizes over the last axis, then applies `gain` and `bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let dim = *self.shape(x).last().unwrap_or(&0);
        if dim == 0 || self.shape(gain) != [dim] || self.shape(bias) != [dim] {
            return shape_err(format!(
                "layer_norm on {:?} with gain {:?}",
                self.shape(x),
                self.shape(gain)
            ));
        }
        let (data, cache) =
            kernels::layer_norm_forward(self.data(x), dim, self.data(gain), self.data(bias), eps);
        let shape = self.shape(x).to_vec();
        let op = Op::LayerNorm {
            x: x.0,
            gain: gain.0,
            bias: bias.0,
            dim,
            cache,
        };
        Ok(self.derived(shape, data, &[x.0, gain.0, bias.0], op))
    }

    /// Scaled dot-product attention on projected `q`, `k`, `v` of shape
    /// `[B, L, D]` split into `heads` heads of width `D / heads`.
    pub fn attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        heads: usize,
        mask: Option<&AttentionMask>,
    ) -> Result<Var> {
        let qs = self.shape(q).to_vec();
        if qs.len() != 3 || self.shape(k) != qs || self.shape(v) != qs {
            return shape_err(format!("attention q {qs:?} k {:?} v {:?}", self.shape(k), self.shape(v)));
        }
        let (batch, len, dim) = (qs[0], qs[1], qs[2]);
        if heads == 0 || dim % heads != 0 {
            return Err(Error::InvalidArgument(format!("dim {dim} not divisible by {heads} heads")));
        }
        if let Some(m) = mask {
            if m.len() != len {
                return shape_err(format!("mask for {} positions, sequence has {len}", m.len()));
            }
        }
        let (data, probs) = kernels::attention_forward(
            self.data(q),
            self.data(k),
            self.data(v),
            batch,
            len,
            dim,
            heads,
            mask.map(|m| m.entries()),
        );
        let op = Op::Attention {
            q: q.0,
            k: k.0,
            v: v.0,
            batch,
            len,
            heads,
            probs,
        };
        Ok(self.derived(qs, data, &[q.0, k.0, v.0], op))
    }

    /// Adds rows `0..L` of `pe: [L_max, D]` to every sequence of `x: [B, L, D]`.
    pub fn add_positional(&mut self, x: Var, pe: Var) -> Result<Var> {
        let (xs, ps) = (self.shape(x).to_vec(), self.shape(pe).to_vec());
        if xs.len() != 3 || ps.len() != 2 || ps[1] != xs[2] {
            return shape_err(format!("positional encoding {ps:?} for input {xs:?}"));
        }
        let (len, dim) = (xs[1], xs[2]);
        if len > ps[0] {
            return Err(Error::InvalidArgument(format!(
                "sequence length {len} exceeds positional table length {}",
                ps[0]
            )));
        }
        let table = &self.data(pe)[..len * dim];
        let data = self
            .data(x)
            .chunks(len * dim)
            .flat_map(|seq| seq.iter().zip(table).map(|(a, b)| a + b))
            .collect();
        let op = Op::AddPositional {
            x: x.0,
            pe: pe.0,
            len,
            dim,
        };
        Ok(self.derived(xs, data, &[x.0, pe.0], op))
    }

    /// Mean squared error as a rank-0 tensor.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.shape(pred) != self.shape(target) {
            return shape_err(format!("mse {:?} vs {:?}", self.shape(pred), self.shape(target)));
        }
        let n = self.value(pred).len().max(1) as f64;
        let loss = self
            .data(pred)
            .iter()
            .zip(self.data(target))
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        Ok(self.derived(Vec::new(), vec![loss], &[pred.0, target.0], Op::Mse(pred.0, target.0)))
    }

    /// Reverse sweep from a scalar `loss`. May run once per forward pass
    /// unless [`Graph::zero_grad`] is called in between.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Graph("backward already ran on this graph; call zero_grad first".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Graph(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        if !self.value(loss).is_finite() {
            return Err(Error::Numerical("loss is not finite".into()));
        }
        self.backward_done = true;
        self.nodes[loss.0].grad = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad || matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            let contributions = self.local_grads(i, &g);
            self.nodes[i].grad = Some(g);
            for (p, d) in contributions {
                let node = &mut self.nodes[p];
                if !node.requires_grad {
                    continue;
                }
                match &mut node.grad {
                    Some(acc) => acc.iter_mut().zip(&d).for_each(|(a, b)| *a += b),
                    slot => *slot = Some(d),
                }
            }
        }
        Ok(())
    }

    fn local_grads(&self, i: usize, g: &[f64]) -> Vec<(usize, Vec<f64>)> {
        let val = |p: usize| self.nodes[p].value.data();
        let wants = |p: usize| self.nodes[p].requires_grad;
        match &self.nodes[i].op {
            Op::Leaf => Vec::new(),
            Op::Add(a, b) => vec![(*a, g.to_vec()), (*b, g.to_vec())],
            Op::Scale(a, s) => vec![(*a, g.iter().map(|x| x * s).collect())],
            Op::Sum(a) => vec![(*a, vec![g[0]; val(*a).len()])],
            Op::Reshape(a) => vec![(*a, g.to_vec())],
            Op::LeakyRelu(a, slope) => {
                let d = val(*a)
                    .iter()
                    .zip(g)
                    .map(|(&x, &gy)| if x > 0.0 { gy } else { slope * gy })
                    .collect();
                vec![(*a, d)]
            }
            Op::Linear {
                x,
                w,
                b,
                rows,
                in_dim,
                out_dim,
            } => {
                let (rows, in_dim, out_dim) = (*rows, *in_dim, *out_dim);
                let mut out = Vec::new();
                if wants(*x) {
                    let mut dx = vec![0.0; rows * in_dim];
                    kernels::gemm(rows, out_dim, in_dim, 1.0, g, false, val(*w), true, 0.0, &mut dx);
                    out.push((*x, dx));
                }
                if wants(*w) {
                    let mut dw = vec![0.0; in_dim * out_dim];
                    kernels::gemm(in_dim, rows, out_dim, 1.0, val(*x), true, g, false, 0.0, &mut dw);
                    out.push((*w, dw));
                }
                if let Some(b) = b {
                    let mut db = vec![0.0; out_dim];
                    for row in g.chunks(out_dim) {
                        db.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                    }
                    out.push((*b, db));
                }
                out
            }
            Op::Conv2d {
                x,
                w,
                b,
                batch,
                geom,
                out_ch,
            } => {
                let (dx, dw, db) =
                    kernels::conv2d_backward(val(*x), *batch, geom, val(*w), *out_ch, g);
                let mut out = vec![(*x, dx), (*w, dw)];
                out.extend(b.map(|b| (b, db)));
                out
            }
            Op::ConvTranspose2d {
                x,
                w,
                b,
                batch,
                geom,
                in_ch,
            } => {
                let (dx, dw, db) =
                    kernels::conv_transpose2d_backward(val(*x), *batch, geom, val(*w), *in_ch, g);
                let mut out = vec![(*x, dx), (*w, dw)];
                out.extend(b.map(|b| (b, db)));
                out
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                dim,
                cache,
            } => {
                let (dx, dg, db) = kernels::layer_norm_backward(cache, *dim, val(*gain), g);
                vec![(*x, dx), (*gain, dg), (*bias, db)]
            }
            Op::Attention {
                q,
                k,
                v,
                batch,
                len,
                heads,
                probs,
            } => {
                let dim = self.nodes[*q].value.shape()[2];
                let (dq, dk, dv) = kernels::attention_backward(
                    val(*q),
                    val(*k),
                    val(*v),
                    probs,
                    *batch,
                    *len,
                    dim,
                    *heads,
                    g,
                );
                vec![(*q, dq), (*k, dk), (*v, dv)]
            }
            Op::AddPositional { x, pe, len, dim } => {
                let mut dpe = vec![0.0; val(*pe).len()];
                for seq in g.chunks(len * dim) {
                    dpe.iter_mut().zip(seq).for_each(|(a, v)| *a += v);
                }
                vec![(*x, g.to_vec()), (*pe, dpe)]
            }
            Op::Mse(p, t) => {
                let n = val(*p).len().max(1) as f64;
                let d: Vec<f64> = val(*p)
                    .iter()
                    .zip(val(*t))
                    .map(|(a, b)| 2.0 * (a - b) / n * g[0])
                    .collect();
                let neg = d.iter().map(|v| -v).collect();
                vec![(*p, d), (*t, neg)]
            }
        }
    }
}

/// Geometry of the forward convolution a transposed convolution inverts.
pub(crate) fn transpose_geom(
    out_ch: usize,
    in_h: usize,
    in_w: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<ConvGeom> {
    let side = |len: usize| -> Option<usize> {
        let full = (len.checked_sub(1)?) * stride + kernel;
        full.checked_sub(2 * padding).filter(|&s| s > 0)
    };
    let bad = || Error::Shape(format!("conv_transpose2d on {in_h}x{in_w} has empty output"));
    let (h, w) = (side(in_h).ok_or_else(bad)?, side(in_w).ok_or_else(bad)?);
    let geom = ConvGeom::new(out_ch, h, w, kernel, stride, padding).ok_or_else(bad)?;
    if geom.out_h != in_h || geom.out_w != in_w {
        return shape_err(format!(
            "conv_transpose2d geometry does not invert: {h}x{w} maps back to {}x{}",
            geom.out_h, geom.out_w
        ));
    }
    Ok(geom)
}
