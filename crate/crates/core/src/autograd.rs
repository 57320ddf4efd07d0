//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records operations eagerly: every op computes its value on
//! creation and remembers enough to propagate gradients. Parameters live in a
//! [`ParamStore`] that the graph borrows immutably, so one store can back many
//! graphs (e.g. parallel inference). [`Graph::backward`] returns a
//! [`Gradients`] set keyed by [`ParamId`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::math;
use crate::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, ConvGeom, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    /// Buffers (e.g. batch-norm running statistics) are stored alongside
    /// parameters but never receive gradients.
    pub trainable: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.push(name.into(), value, true)
    }

    pub fn add_buffer(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.push(name.into(), value, false)
    }

    fn push(&mut self, name: String, value: Tensor, trainable: bool) -> ParamId {
        debug_assert!(self.find(&name).is_none(), "duplicate parameter name {name}");
        self.params.push(Param {
            name,
            value,
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Total number of trainable scalars.
    pub fn num_trainable(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    fn accumulate(&mut self, id: ParamId, g: Tensor) {
        if self.grads.len() <= id.0 {
            self.grads.resize(id.0 + 1, None);
        }
        match &mut self.grads[id.0] {
            Some(t) => t.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    /// Global L2 norm over all gradients.
    pub fn norm(&self) -> f64 {
        math::sqrt(
            self.grads
                .iter()
                .flatten()
                .flat_map(|t| t.data())
                .map(|v| v * v)
                .sum(),
        )
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.grads.iter_mut().flatten() {
            for v in t.data_mut() {
                *v *= s;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Batch statistics observed in training mode, to be folded into running
/// averages after the step.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean_buffer: ParamId,
    pub var_buffer: ParamId,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug)]
enum Op {
    Const,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    AddChannel(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    MulConst(Var, Vec<f64>),
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Gather {
        table: Var,
        idx: Vec<usize>,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols {
        x: Var,
        start: usize,
    },
    SliceRows {
        x: Var,
        start: usize,
    },
    Transpose(Var),
    Reshape(Var),
    Conv {
        x: Var,
        w: Var,
        geom: ConvGeom,
        cols: Vec<f64>,
    },
    ConvTranspose {
        x: Var,
        w: Var,
        geom: ConvGeom,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<Option<usize>>,
        probs: Vec<f64>,
        count: usize,
    },
    Mse {
        x: Var,
        target: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Option<Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Additive attention-mask value; large enough that `exp` underflows to zero.
pub const MASKED: f64 = -1e9;

#[derive(Debug)]
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    training: bool,
    rng: Option<ChaCha8Rng>,
    batch_stats: Vec<BatchStats>,
}

impl<'p> Graph<'p> {
    /// Inference graph: dropout off, batch norm uses running statistics.
    pub fn inference(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
            training: false,
            rng: None,
            batch_stats: Vec::new(),
        }
    }

    /// Training graph: dropout draws from `rng`, batch norm uses batch statistics.
    pub fn training(params: &'p ParamStore, rng: ChaCha8Rng) -> Self {
        Graph {
            training: true,
            rng: Some(rng),
            ..Self::inference(params)
        }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn take_batch_stats(&mut self) -> Vec<BatchStats> {
        core::mem::take(&mut self.batch_stats)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.get(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Const, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            needs_grad: self.params.param(id).trainable,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert!(sa.len() == 2 && sb.len() == 2 && sa[1] == sb[0], "matmul {sa:?} x {sb:?}");
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let ng = self.needs(a) || self.needs(b);
        self.push(Tensor::from_vec(&[m, n], out), Op::MatMul(a, b), ng)
    }

    /// `a @ b^T`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert!(sa.len() == 2 && sb.len() == 2 && sa[1] == sb[1], "matmul_nt {sa:?} x {sb:?}");
        let (m, k, n) = (sa[0], sa[1], sb[0]);
        let mut out = vec![0.0; m * n];
        matmul_nt_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let ng = self.needs(a) || self.needs(b);
        self.push(Tensor::from_vec(&[m, n], out), Op::MatMulNt(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shapes");
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        let ng = self.needs(a) || self.needs(b);
        self.push(Tensor::from_vec(&shape, out), Op::Add(a, b), ng)
    }

    /// Adds a `[n]` bias to every row of a `[m, n]` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let n = self.value(a).cols();
        assert_eq!(self.value(bias).len(), n, "bias length");
        let b = self.value(bias).data().to_vec();
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_mut(n) {
            for (o, x) in row.iter_mut().zip(&b) {
                *o += x;
            }
        }
        let shape = self.shape(a).to_vec();
        let ng = self.needs(a) || self.needs(bias);
        self.push(Tensor::from_vec(&shape, out), Op::AddRow(a, bias), ng)
    }

    /// Adds a per-channel bias to an `[N, C, H, W]` tensor.
    pub fn add_channel(&mut self, x: Var, bias: Var) -> Var {
        let s = self.shape(x).to_vec();
        let (c, plane) = (s[1], s[2] * s[3]);
        assert_eq!(self.value(bias).len(), c);
        let b = self.value(bias).data().to_vec();
        let mut out = self.value(x).data().to_vec();
        for (i, chunk) in out.chunks_mut(plane).enumerate() {
            let bc = b[i % c];
            for v in chunk {
                *v += bc;
            }
        }
        let ng = self.needs(x) || self.needs(bias);
        self.push(Tensor::from_vec(&s, out), Op::AddChannel(x, bias), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shapes");
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        let ng = self.needs(a) || self.needs(b);
        self.push(Tensor::from_vec(&shape, out), Op::Mul(a, b), ng)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out: Vec<f64> = self.value(a).data().iter().map(|x| x * s).collect();
        let shape = self.shape(a).to_vec();
        let ng = self.needs(a);
        self.push(Tensor::from_vec(&shape, out), Op::Scale(a, s), ng)
    }

    /// Adds a constant tensor (e.g. an attention mask).
    pub fn add_const(&mut self, a: Var, c: &Tensor) -> Var {
        assert_eq!(self.value(a).len(), c.len(), "add_const shapes");
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(c.data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        let ng = self.needs(a);
        self.push(Tensor::from_vec(&shape, out), Op::AddConst(a), ng)
    }

    fn mul_const(&mut self, a: Var, c: Vec<f64>) -> Var {
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(&c)
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        let ng = self.needs(a);
        self.push(Tensor::from_vec(&shape, out), Op::MulConst(a, c), ng)
    }

    /// Inverted dropout. Identity outside training mode or when `p == 0`.
    pub fn dropout(&mut self, a: Var, p: f64) -> Var {
        if !self.training || p <= 0.0 {
            return a;
        }
        let n = self.value(a).len();
        let keep = 1.0 - p;
        let rng = self.rng.as_mut().expect("training graph has an rng");
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        self.mul_const(a, mask)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out: Vec<f64> = self.value(a).data().iter().map(|&x| x.max(0.0)).collect();
        let shape = self.shape(a).to_vec();
        let ng = self.needs(a);
        self.push(Tensor::from_vec(&shape, out), Op::Relu(a), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .map(|&x| 1.0 / (1.0 + math::exp(-x)))
            .collect();
        let shape = self.shape(a).to_vec();
        let ng = self.needs(a);
        self.push(Tensor::from_vec(&shape, out), Op::Sigmoid(a), ng)
    }

    /// Row-wise softmax of a 2-D tensor.
    pub fn softmax(&mut self, a: Var) -> Var {
        let n = self.value(a).cols();
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_mut(n) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = math::exp(*v - max);
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let shape = self.shape(a).to_vec();
        let ng = self.needs(a);
        self.push(Tensor::from_vec(&shape, out), Op::Softmax(a), ng)
    }

    /// Layer normalization over the last dimension with learned gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Var {
        let n = self.value(x).cols();
        let g = self.value(gain).data().to_vec();
        let b = self.value(bias).data().to_vec();
        let src = self.value(x).data();
        let rows = src.len() / n;
        let mut xhat = vec![0.0; src.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; src.len()];
        for r in 0..rows {
            let row = &src[r * n..(r + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / math::sqrt(var + eps);
            inv_std[r] = is;
            for j in 0..n {
                let h = (row[j] - mean) * is;
                xhat[r * n + j] = h;
                out[r * n + j] = h * g[j] + b[j];
            }
        }
        let shape = self.shape(x).to_vec();
        let ng = self.needs(x) || self.needs(gain) || self.needs(bias);
        self.push(
            Tensor::from_vec(&shape, out),
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            ng,
        )
    }

    /// Selects rows of a `[V, D]` table.
    pub fn gather(&mut self, table: Var, idx: &[usize]) -> Var {
        let t = self.value(table);
        let (v, d) = (t.rows(), t.cols());
        let mut out = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            assert!(i < v, "gather index {i} out of range for table of {v} rows");
            out.extend_from_slice(t.row(i));
        }
        let ng = self.needs(table);
        self.push(
            Tensor::from_vec(&[idx.len(), d], out),
            Op::Gather {
                table,
                idx: idx.to_vec(),
            },
            ng,
        )
    }

    /// Horizontal concatenation of 2-D tensors with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                assert_eq!(self.value(p).rows(), rows, "concat_cols row mismatch");
                self.value(p).cols()
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(
            Tensor::from_vec(&[rows, total], out),
            Op::ConcatCols(parts.to_vec()),
            ng,
        )
    }

    /// Vertical concatenation of 2-D tensors with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols();
        let mut out = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.cols(), cols, "concat_rows column mismatch");
            rows += t.rows();
            out.extend_from_slice(t.data());
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(
            Tensor::from_vec(&[rows, cols], out),
            Op::ConcatRows(parts.to_vec()),
            ng,
        )
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Var {
        let t = self.value(x);
        let (rows, cols) = (t.rows(), t.cols());
        assert!(start + width <= cols);
        let mut out = Vec::with_capacity(rows * width);
        for r in 0..rows {
            out.extend_from_slice(&t.row(r)[start..start + width]);
        }
        let ng = self.needs(x);
        self.push(
            Tensor::from_vec(&[rows, width], out),
            Op::SliceCols { x, start },
            ng,
        )
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Var {
        let t = self.value(x);
        let cols = t.cols();
        assert!(start + len <= t.rows());
        let out = t.data()[start * cols..(start + len) * cols].to_vec();
        let ng = self.needs(x);
        self.push(
            Tensor::from_vec(&[len, cols], out),
            Op::SliceRows { x, start },
            ng,
        )
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (r, c) = (t.rows(), t.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = t.data()[i * c + j];
            }
        }
        let ng = self.needs(x);
        self.push(Tensor::from_vec(&[c, r], out), Op::Transpose(x), ng)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Var {
        let t = self.value(x).clone().reshape(shape);
        let ng = self.needs(x);
        self.push(t, Op::Reshape(x), ng)
    }

    /// 2-D convolution. `x: [N, C, H, W]`, `w: [O, C, k, k]`, no bias.
    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Var {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        assert!(xs.len() == 4 && ws.len() == 4 && ws[1] == xs[1], "conv2d {xs:?} w {ws:?}");
        let geom = ConvGeom {
            in_c: xs[1],
            in_h: xs[2],
            in_w: xs[3],
            kernel: ws[2],
            stride,
            pad,
        };
        let (n, o) = (xs[0], ws[0]);
        let (p, l) = (geom.patch_len(), geom.out_h() * geom.out_w());
        let img_len = xs[1] * xs[2] * xs[3];
        let mut cols = vec![0.0; n * p * l];
        let mut out = vec![0.0; n * o * l];
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        for b in 0..n {
            let c = &mut cols[b * p * l..(b + 1) * p * l];
            geom.im2col(&xv[b * img_len..(b + 1) * img_len], c);
            matmul_acc(wv, c, &mut out[b * o * l..(b + 1) * o * l], o, p, l);
        }
        let ng = self.needs(x) || self.needs(w);
        let shape = [n, o, geom.out_h(), geom.out_w()];
        self.push(
            Tensor::from_vec(&shape, out),
            Op::Conv {
                x,
                w,
                geom,
                cols: if ng { cols } else { Vec::new() },
            },
            ng,
        )
    }

    /// Transposed convolution (the adjoint of [`Graph::conv2d`]).
    /// `x: [N, Cin, H, W]`, `w: [Cin, Cout, k, k]`; the output is
    /// `[N, Cout, out_h, out_w]` where a stride-`stride` convolution of the
    /// output would produce an `H x W` map.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        stride: usize,
        pad: usize,
        out_hw: (usize, usize),
    ) -> Var {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        assert!(xs.len() == 4 && ws.len() == 4 && ws[0] == xs[1], "conv_t {xs:?} w {ws:?}");
        let geom = ConvGeom {
            in_c: ws[1],
            in_h: out_hw.0,
            in_w: out_hw.1,
            kernel: ws[2],
            stride,
            pad,
        };
        assert_eq!((geom.out_h(), geom.out_w()), (xs[2], xs[3]), "conv_t output size");
        let (n, cin) = (xs[0], xs[1]);
        let (p, l) = (geom.patch_len(), xs[2] * xs[3]);
        let out_len = geom.in_c * out_hw.0 * out_hw.1;
        let mut out = vec![0.0; n * out_len];
        let mut cols = vec![0.0; p * l];
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        for b in 0..n {
            cols.iter_mut().for_each(|v| *v = 0.0);
            // cols[P, L] = w^T[P, Cin] @ x[Cin, L]
            matmul_tn_acc(wv, &xv[b * cin * l..(b + 1) * cin * l], &mut cols, cin, p, l);
            geom.col2im(&cols, &mut out[b * out_len..(b + 1) * out_len]);
        }
        let ng = self.needs(x) || self.needs(w);
        let shape = [n, geom.in_c, out_hw.0, out_hw.1];
        self.push(
            Tensor::from_vec(&shape, out),
            Op::ConvTranspose { x, w, geom },
            ng,
        )
    }

    /// Batch normalization over `[N, C, H, W]` per channel. In training mode
    /// batch statistics are used (and recorded for the running averages);
    /// otherwise the running buffers are.
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: ParamId,
        running_var: ParamId,
        eps: f64,
    ) -> Var {
        let s = self.shape(x).to_vec();
        let (n, c, plane) = (s[0], s[1], s[2] * s[3]);
        let count = (n * plane) as f64;
        let src = self.value(x).data();
        let (mean, var) = if self.training {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for b in 0..n {
                for ch in 0..c {
                    let off = (b * c + ch) * plane;
                    mean[ch] += src[off..off + plane].iter().sum::<f64>();
                }
            }
            mean.iter_mut().for_each(|m| *m /= count);
            for b in 0..n {
                for ch in 0..c {
                    let off = (b * c + ch) * plane;
                    var[ch] += src[off..off + plane]
                        .iter()
                        .map(|v| (v - mean[ch]) * (v - mean[ch]))
                        .sum::<f64>();
                }
            }
            var.iter_mut().for_each(|v| *v /= count);
            (mean, var)
        } else {
            (
                self.params.get(running_mean).data().to_vec(),
                self.params.get(running_var).data().to_vec(),
            )
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / math::sqrt(v + eps)).collect();
        let g = self.value(gamma).data().to_vec();
        let bt = self.value(beta).data().to_vec();
        let mut xhat = vec![0.0; src.len()];
        let mut out = vec![0.0; src.len()];
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * plane;
                for i in off..off + plane {
                    let h = (src[i] - mean[ch]) * inv_std[ch];
                    xhat[i] = h;
                    out[i] = h * g[ch] + bt[ch];
                }
            }
        }
        if self.training {
            self.batch_stats.push(BatchStats {
                mean_buffer: running_mean,
                var_buffer: running_var,
                mean,
                var,
            });
        }
        let ng = self.needs(x) || self.needs(gamma) || self.needs(beta);
        let batch_stats = self.training;
        self.push(
            Tensor::from_vec(&s, out),
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            },
            ng,
        )
    }

    /// Mean cross-entropy of `logits: [M, V]` against targets; `None` targets
    /// (padding) are excluded from the mean. Returns a `[1]` scalar.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<usize>]) -> Var {
        let t = self.value(logits);
        let (m, v) = (t.rows(), t.cols());
        assert_eq!(m, targets.len(), "one target per logit row");
        let mut probs = vec![0.0; m * v];
        let mut total = 0.0;
        let mut count = 0;
        for r in 0..m {
            let row = t.row(r);
            let lse = math::log_sum_exp(row);
            for j in 0..v {
                probs[r * v + j] = math::exp(row[j] - lse);
            }
            if let Some(y) = targets[r] {
                assert!(y < v, "target {y} out of range for {v} classes");
                total += lse - row[y];
                count += 1;
            }
        }
        let loss = if count == 0 { 0.0 } else { total / count as f64 };
        let ng = self.needs(logits);
        self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
                count,
            },
            ng,
        )
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, x: Var, target: &[f64]) -> Var {
        let xv = self.value(x).data();
        assert_eq!(xv.len(), target.len());
        let loss = xv
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / xv.len() as f64;
        let ng = self.needs(x);
        self.push(
            Tensor::scalar(loss),
            Op::Mse {
                x,
                target: target.to_vec(),
            },
            ng,
        )
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).len(), 1, "backward needs a scalar output");
        let mut grads: Vec<Option<Tensor>> = Vec::new();
        grads.resize_with(output.0 + 1, || None);
        grads[output.0] = Some(Tensor::full(self.shape(output), 1.0));
        let mut out = Gradients::default();

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            self.backward_node(i, g, &mut grads, &mut out);
        }
        out
    }

    fn backward_node(
        &self,
        i: usize,
        g: Tensor,
        grads: &mut [Option<Tensor>],
        out: &mut Gradients,
    ) {
        let node = &self.nodes[i];
        let y = self.value(Var(i));
        let gd = g.data();
        match &node.op {
            Op::Const => {}
            Op::Param(id) => out.accumulate(*id, g),
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                if self.needs(*a) {
                    let mut da = vec![0.0; m * k];
                    matmul_nt_acc(gd, self.value(*b).data(), &mut da, m, n, k);
                    self.acc(grads, *a, da);
                }
                if self.needs(*b) {
                    let mut db = vec![0.0; k * n];
                    matmul_tn_acc(self.value(*a).data(), gd, &mut db, m, k, n);
                    self.acc(grads, *b, db);
                }
            }
            Op::MatMulNt(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[0]);
                if self.needs(*a) {
                    let mut da = vec![0.0; m * k];
                    matmul_acc(gd, self.value(*b).data(), &mut da, m, n, k);
                    self.acc(grads, *a, da);
                }
                if self.needs(*b) {
                    let mut db = vec![0.0; n * k];
                    matmul_tn_acc(gd, self.value(*a).data(), &mut db, m, n, k);
                    self.acc(grads, *b, db);
                }
            }
            Op::Add(a, b) => {
                if self.needs(*a) {
                    self.acc(grads, *a, gd.to_vec());
                }
                if self.needs(*b) {
                    self.acc(grads, *b, gd.to_vec());
                }
            }
            Op::AddRow(a, bias) => {
                if self.needs(*a) {
                    self.acc(grads, *a, gd.to_vec());
                }
                if self.needs(*bias) {
                    let n = self.value(*bias).len();
                    let mut db = vec![0.0; n];
                    for row in gd.chunks(n) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    self.acc(grads, *bias, db);
                }
            }
            Op::AddChannel(x, bias) => {
                if self.needs(*x) {
                    self.acc(grads, *x, gd.to_vec());
                }
                if self.needs(*bias) {
                    let s = self.shape(*x);
                    let (c, plane) = (s[1], s[2] * s[3]);
                    let mut db = vec![0.0; c];
                    for (k, chunk) in gd.chunks(plane).enumerate() {
                        db[k % c] += chunk.iter().sum::<f64>();
                    }
                    self.acc(grads, *bias, db);
                }
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    let bv = self.value(*b).data();
                    self.acc(grads, *a, gd.iter().zip(bv).map(|(g, b)| g * b).collect());
                }
                if self.needs(*b) {
                    let av = self.value(*a).data();
                    self.acc(grads, *b, gd.iter().zip(av).map(|(g, a)| g * a).collect());
                }
            }
            Op::Scale(a, s) => self.acc(grads, *a, gd.iter().map(|g| g * s).collect()),
            Op::AddConst(a) => self.acc(grads, *a, gd.to_vec()),
            Op::MulConst(a, c) => self.acc(grads, *a, gd.iter().zip(c).map(|(g, c)| g * c).collect()),
            Op::Relu(a) => {
                let d = gd
                    .iter()
                    .zip(y.data())
                    .map(|(g, &o)| if o > 0.0 { *g } else { 0.0 })
                    .collect();
                self.acc(grads, *a, d)
            }
            Op::Sigmoid(a) => {
                let d = gd
                    .iter()
                    .zip(y.data())
                    .map(|(g, o)| g * o * (1.0 - o))
                    .collect();
                self.acc(grads, *a, d)
            }
            Op::Softmax(a) => {
                let n = y.cols();
                let mut d = vec![0.0; gd.len()];
                for ((drow, grow), yrow) in d.chunks_mut(n).zip(gd.chunks(n)).zip(y.data().chunks(n)) {
                    let dot: f64 = grow.iter().zip(yrow).map(|(g, y)| g * y).sum();
                    for j in 0..n {
                        drow[j] = yrow[j] * (grow[j] - dot);
                    }
                }
                self.acc(grads, *a, d)
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let n = y.cols();
                let gv = self.value(*gain).data();
                if self.needs(*gain) || self.needs(*bias) {
                    let mut dg = vec![0.0; n];
                    let mut db = vec![0.0; n];
                    for (grow, hrow) in gd.chunks(n).zip(xhat.chunks(n)) {
                        for j in 0..n {
                            dg[j] += grow[j] * hrow[j];
                            db[j] += grow[j];
                        }
                    }
                    if self.needs(*gain) {
                        self.acc(grads, *gain, dg);
                    }
                    if self.needs(*bias) {
                        self.acc(grads, *bias, db);
                    }
                }
                if self.needs(*x) {
                    let mut dx = vec![0.0; gd.len()];
                    for (r, is) in inv_std.iter().enumerate() {
                        let grow = &gd[r * n..(r + 1) * n];
                        let hrow = &xhat[r * n..(r + 1) * n];
                        let dh: Vec<f64> = grow.iter().zip(gv).map(|(g, w)| g * w).collect();
                        let mean_dh = dh.iter().sum::<f64>() / n as f64;
                        let mean_dhh =
                            dh.iter().zip(hrow).map(|(d, h)| d * h).sum::<f64>() / n as f64;
                        for j in 0..n {
                            dx[r * n + j] = is * (dh[j] - mean_dh - hrow[j] * mean_dhh);
                        }
                    }
                    self.acc(grads, *x, dx);
                }
            }
            Op::Gather { table, idx } => {
                let t = self.value(*table);
                let d = t.cols();
                let mut dt = vec![0.0; t.len()];
                for (r, &i) in idx.iter().enumerate() {
                    for j in 0..d {
                        dt[i * d + j] += gd[r * d + j];
                    }
                }
                self.acc(grads, *table, dt);
            }
            Op::ConcatCols(parts) => {
                let rows = y.rows();
                let total = y.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if self.needs(p) {
                        let mut d = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            d.extend_from_slice(&gd[r * total + offset..r * total + offset + w]);
                        }
                        self.acc(grads, p, d);
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    if self.needs(p) {
                        self.acc(grads, p, gd[offset..offset + len].to_vec());
                    }
                    offset += len;
                }
            }
            Op::SliceCols { x, start } => {
                let xt = self.value(*x);
                let (rows, cols) = (xt.rows(), xt.cols());
                let w = y.cols();
                let mut d = vec![0.0; rows * cols];
                for r in 0..rows {
                    d[r * cols + start..r * cols + start + w].copy_from_slice(&gd[r * w..(r + 1) * w]);
                }
                self.acc(grads, *x, d);
            }
            Op::SliceRows { x, start } => {
                let xt = self.value(*x);
                let cols = xt.cols();
                let mut d = vec![0.0; xt.len()];
                d[start * cols..start * cols + gd.len()].copy_from_slice(gd);
                self.acc(grads, *x, d);
            }
            Op::Transpose(x) => {
                let (r, c) = (y.rows(), y.cols());
                let mut d = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        d[j * r + i] = gd[i * c + j];
                    }
                }
                self.acc(grads, *x, d);
            }
            Op::Reshape(x) => self.acc(grads, *x, gd.to_vec()),
            Op::Conv { x, w, geom, cols } => {
                let xs = self.shape(*x);
                let n = xs[0];
                let o = self.shape(*w)[0];
                let (p, l) = (geom.patch_len(), geom.out_h() * geom.out_w());
                let img_len = xs[1] * xs[2] * xs[3];
                let wv = self.value(*w).data();
                let mut dw = vec![0.0; o * p];
                let mut dx = if self.needs(*x) { vec![0.0; n * img_len] } else { Vec::new() };
                let mut dcols = vec![0.0; p * l];
                for b in 0..n {
                    let gb = &gd[b * o * l..(b + 1) * o * l];
                    if self.needs(*w) {
                        matmul_nt_acc(gb, &cols[b * p * l..(b + 1) * p * l], &mut dw, o, l, p);
                    }
                    if self.needs(*x) {
                        dcols.iter_mut().for_each(|v| *v = 0.0);
                        matmul_tn_acc(wv, gb, &mut dcols, o, p, l);
                        geom.col2im(&dcols, &mut dx[b * img_len..(b + 1) * img_len]);
                    }
                }
                if self.needs(*w) {
                    self.acc(grads, *w, dw);
                }
                if self.needs(*x) {
                    self.acc(grads, *x, dx);
                }
            }
            Op::ConvTranspose { x, w, geom } => {
                let xs = self.shape(*x);
                let (n, cin) = (xs[0], xs[1]);
                let (p, l) = (geom.patch_len(), xs[2] * xs[3]);
                let out_len = geom.in_c * geom.in_h * geom.in_w;
                let xv = self.value(*x).data();
                let wv = self.value(*w).data();
                let mut dw = vec![0.0; cin * p];
                let mut dx = vec![0.0; n * cin * l];
                let mut gcols = vec![0.0; p * l];
                for b in 0..n {
                    geom.im2col(&gd[b * out_len..(b + 1) * out_len], &mut gcols);
                    let xb = &xv[b * cin * l..(b + 1) * cin * l];
                    // dx[Cin, L] = w[Cin, P] @ gcols[P, L]
                    matmul_acc(wv, &gcols, &mut dx[b * cin * l..(b + 1) * cin * l], cin, p, l);
                    // dw[Cin, P] += x[Cin, L] @ gcols[P, L]^T
                    matmul_nt_acc(xb, &gcols, &mut dw, cin, l, p);
                }
                if self.needs(*w) {
                    self.acc(grads, *w, dw);
                }
                if self.needs(*x) {
                    self.acc(grads, *x, dx);
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let s = self.shape(*x);
                let (n, c, plane) = (s[0], s[1], s[2] * s[3]);
                let count = (n * plane) as f64;
                let gv = self.value(*gamma).data();
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                for b in 0..n {
                    for ch in 0..c {
                        let off = (b * c + ch) * plane;
                        for i in off..off + plane {
                            dgamma[ch] += gd[i] * xhat[i];
                            dbeta[ch] += gd[i];
                        }
                    }
                }
                if self.needs(*x) {
                    let mut dx = vec![0.0; gd.len()];
                    for ch in 0..c {
                        let k = gv[ch] * inv_std[ch];
                        if *batch_stats {
                            let mean_dh = dbeta[ch] / count;
                            let mean_dhh = dgamma[ch] / count;
                            for b in 0..n {
                                let off = (b * c + ch) * plane;
                                for i in off..off + plane {
                                    dx[i] = k * (gd[i] - mean_dh - xhat[i] * mean_dhh);
                                }
                            }
                        } else {
                            for b in 0..n {
                                let off = (b * c + ch) * plane;
                                for i in off..off + plane {
                                    dx[i] = k * gd[i];
                                }
                            }
                        }
                    }
                    self.acc(grads, *x, dx);
                }
                if self.needs(*gamma) {
                    self.acc(grads, *gamma, dgamma);
                }
                if self.needs(*beta) {
                    self.acc(grads, *beta, dbeta);
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
                count,
            } => {
                if *count > 0 {
                    let v = self.value(*logits).cols();
                    let scale = gd[0] / *count as f64;
                    let mut d = vec![0.0; probs.len()];
                    for (r, t) in targets.iter().enumerate() {
                        if let Some(y) = t {
                            for j in 0..v {
                                d[r * v + j] = probs[r * v + j] * scale;
                            }
                            d[r * v + y] -= scale;
                        }
                    }
                    self.acc(grads, *logits, d);
                }
            }
            Op::Mse { x, target } => {
                let xv = self.value(*x).data();
                let k = 2.0 * gd[0] / xv.len() as f64;
                self.acc(
                    grads,
                    *x,
                    xv.iter().zip(target).map(|(a, b)| k * (a - b)).collect(),
                );
            }
        }
    }

    fn acc(&self, grads: &mut [Option<Tensor>], v: Var, d: Vec<f64>) {
        match &mut grads[v.0] {
            Some(t) => {
                for (a, b) in t.data_mut().iter_mut().zip(&d) {
                    *a += b;
                }
            }
            slot => *slot = Some(Tensor::from_vec(self.shape(v), d)),
        }
    }
}

/// Folds observed batch statistics into running buffers:
/// `running = momentum * running + (1 - momentum) * batch`.
pub fn apply_batch_stats(params: &mut ParamStore, stats: &[BatchStats], momentum: f64) {
    for s in stats {
        for (r, b) in params.get_mut(s.mean_buffer).data_mut().iter_mut().zip(&s.mean) {
            *r = momentum * *r + (1.0 - momentum) * b;
        }
        for (r, b) in params.get_mut(s.var_buffer).data_mut().iter_mut().zip(&s.var) {
            *r = momentum * *r + (1.0 - momentum) * b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Central-difference check of every trainable parameter against `f`.
    fn check<F>(store: &mut ParamStore, f: F, training: bool)
    where
        F: Fn(&mut Graph<'_>) -> Var,
    {
        let run = |store: &ParamStore| -> (f64, Gradients) {
            let mut g = if training {
                Graph::training(store, ChaCha8Rng::seed_from_u64(0))
            } else {
                Graph::inference(store)
            };
            let out = f(&mut g);
            (g.value(out).item(), g.backward(out))
        };
        let (_, grads) = run(store);
        let ids: Vec<ParamId> = store.ids().collect();
        for id in ids {
            if !store.param(id).trainable {
                continue;
            }
            let analytic = grads.get(id).cloned().unwrap_or_else(|| Tensor::zeros(store.get(id).shape()));
            for k in 0..store.get(id).len() {
                let h = 1e-6;
                let orig = store.get(id).data()[k];
                store.get_mut(id).data_mut()[k] = orig + h;
                let (fp, _) = run(store);
                store.get_mut(id).data_mut()[k] = orig - h;
                let (fm, _) = run(store);
                store.get_mut(id).data_mut()[k] = orig;
                let fd = (fp - fm) / (2.0 * h);
                let a = analytic.data()[k];
                assert!(
                    (a - fd).abs() <= 1e-7 + 1e-5 * a.abs().max(fd.abs()),
                    "{}[{k}]: analytic {a} vs numeric {fd}",
                    store.param(id).name
                );
            }
        }
    }

    fn seq(shape: &[usize], seed: f64) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::from_vec(
            shape,
            (0..n).map(|i| math::sin(i as f64 * 0.73 + seed) * 0.8).collect(),
        )
    }

    #[test]
    fn dense_ops_gradients() {
        let mut s = ParamStore::new();
        let a = s.add("a", seq(&[3, 4], 0.1));
        let b = s.add("b", seq(&[4, 5], 0.7));
        let bias = s.add("bias", seq(&[5], 1.3));
        let gain = s.add("gain", seq(&[5], 2.0));
        let lb = s.add("lb", seq(&[5], 2.5));
        let k = s.add("k", seq(&[2, 5], 3.0));
        check(
            &mut s,
            |g| {
                let a = g.param(a);
                let b = g.param(b);
                let h = g.matmul(a, b);
                let bias = g.param(bias);
                let h = g.add_row(h, bias);
                let gain = g.param(gain);
                let lb = g.param(lb);
                let h = g.layer_norm(h, gain, lb, 1e-6);
                let k = g.param(k);
                let att = g.matmul_nt(h, k); // [3,2]
                let att = g.scale(att, 0.5);
                let mask = Tensor::from_vec(&[3, 2], vec![0.0, 0.0, 0.0, MASKED, 0.0, 0.0]);
                let att = g.add_const(att, &mask);
                let p = g.softmax(att);
                let ctx = g.matmul(p, k); // [3,5]
                let r = g.relu(ctx);
                let sg = g.sigmoid(h);
                let m = g.mul(r, sg);
                let t = g.transpose(m);
                let t = g.transpose(t);
                let left = g.slice_cols(t, 0, 2);
                let right = g.slice_cols(t, 2, 3);
                let cat = g.concat_cols(&[right, left]);
                let top = g.slice_rows(cat, 0, 1);
                let rest = g.slice_rows(cat, 1, 2);
                let cat = g.concat_rows(&[rest, top]);
                let cat = g.add(cat, h);
                g.cross_entropy(cat, &[Some(1), None, Some(4)])
            },
            false,
        );
    }

    #[test]
    fn gather_and_mse_gradients() {
        let mut s = ParamStore::new();
        let table = s.add("table", seq(&[4, 3], 0.2));
        check(
            &mut s,
            |g| {
                let t = g.param(table);
                let rows = g.gather(t, &[2, 0, 2]);
                let r = g.reshape(rows, &[9]);
                let r = g.reshape(r, &[3, 3]);
                g.mse(r, &[0.1; 9])
            },
            false,
        );
    }

    #[test]
    fn conv_and_batch_norm_gradients() {
        for training in [true, false] {
            let mut s = ParamStore::new();
            let x = s.add("x", seq(&[2, 2, 5, 4], 0.3));
            let w = s.add("w", seq(&[3, 2, 3, 3], 0.9));
            let gamma = s.add("gamma", seq(&[3], 1.7));
            let beta = s.add("beta", seq(&[3], 0.4));
            let rm = s.add_buffer("rm", seq(&[3], 0.0));
            let rv = s.add_buffer("rv", Tensor::full(&[3], 0.7));
            let wt = s.add("wt", seq(&[3, 2, 3, 3], 1.1));
            let cb = s.add("cb", seq(&[2], 0.5));
            check(
                &mut s,
                |g| {
                    let xv = g.param(x);
                    let wv = g.param(w);
                    let h = g.conv2d(xv, wv, 2, 1); // [2,3,3,2]
                    let gm = g.param(gamma);
                    let bt = g.param(beta);
                    let h = g.batch_norm(h, gm, bt, rm, rv, 1e-5);
                    let wt = g.param(wt);
                    let up = g.conv_transpose2d(h, wt, 2, 1, (5, 4)); // [2,2,5,4]
                    let cb = g.param(cb);
                    let up = g.add_channel(up, cb);
                    let target: Vec<f64> = (0..80).map(|i| (i % 7) as f64 * 0.1).collect();
                    g.mse(up, &target)
                },
                training,
            );
        }
    }

    #[test]
    fn batch_stats_are_recorded_in_training_only() {
        let mut s = ParamStore::new();
        let gamma = s.add("gamma", Tensor::full(&[1], 1.0));
        let beta = s.add("beta", Tensor::zeros(&[1]));
        let rm = s.add_buffer("rm", Tensor::zeros(&[1]));
        let rv = s.add_buffer("rv", Tensor::full(&[1], 1.0));
        let x = Tensor::from_vec(&[2, 1, 1, 1], vec![1.0, 3.0]);
        let mut g = Graph::training(&s, ChaCha8Rng::seed_from_u64(1));
        let xv = g.constant(x.clone());
        let (gm, bt) = (g.param(gamma), g.param(beta));
        let y = g.batch_norm(xv, gm, bt, rm, rv, 0.0);
        assert_eq!(g.value(y).data(), &[-1.0, 1.0]);
        let stats = g.take_batch_stats();
        assert_eq!(stats[0].mean, vec![2.0]);
        assert_eq!(stats[0].var, vec![1.0]);
        apply_batch_stats(&mut s, &stats, 0.5);
        assert_eq!(s.get(rm).data(), &[1.0]);

        let mut g = Graph::inference(&s);
        let xv = g.constant(x);
        let (gm, bt) = (g.param(gamma), g.param(beta));
        let _ = g.batch_norm(xv, gm, bt, rm, rv, 0.0);
        assert!(g.take_batch_stats().is_empty());
    }

    #[test]
    fn dropout_is_identity_at_inference() {
        let s = ParamStore::new();
        let mut g = Graph::inference(&s);
        let x = g.constant(Tensor::full(&[2, 2], 3.0));
        assert_eq!(g.dropout(x, 0.5), x);
    }
}
