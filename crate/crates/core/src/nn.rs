//! Layers built on the autodiff graph: dense projections, layer norm,
//! multi-head attention, Transformer encoder/decoder layers and residual
//! convolution blocks with batch normalization.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Graph, ParamId, ParamStore, Var, MASKED};
use crate::math;
use crate::tensor::Tensor;

pub const LAYER_NORM_EPS: f64 = 1e-6;
pub const BATCH_NORM_EPS: f64 = 1e-3;

/// Glorot-uniform initialization.
pub fn glorot(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
    let n: usize = shape.iter().product();
    Tensor::from_vec(
        shape,
        (0..n).map(|_| rng.random_range(-limit..limit)).collect(),
    )
}

/// Uniform `[-scale, scale)` initialization.
pub fn uniform(shape: &[usize], scale: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(
        shape,
        (0..n).map(|_| rng.random_range(-scale..scale)).collect(),
    )
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        bias: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let weight = store.add(format!("{name}.weight"), glorot(&[input, output], input, output, rng));
        let bias = bias.then(|| store.add(format!("{name}.bias"), Tensor::zeros(&[output])));
        Linear { weight, bias }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Var {
        let w = g.param(self.weight);
        let y = g.matmul(x, w);
        match self.bias {
            Some(b) => {
                let b = g.param(b);
                g.add_row(y, b)
            }
            None => y,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        LayerNorm {
            gain: store.add(format!("{name}.gain"), Tensor::full(&[dim], 1.0)),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[dim])),
        }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Var {
        let gain = g.param(self.gain);
        let bias = g.param(self.bias);
        g.layer_norm(x, gain, bias, LAYER_NORM_EPS)
    }
}

#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
    pub hidden: usize,
}

impl MultiHeadAttention {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        hidden: usize,
        memory_dim: usize,
        heads: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        MultiHeadAttention {
            query: Linear::new(store, &format!("{name}.query"), hidden, hidden, true, rng),
            key: Linear::new(store, &format!("{name}.key"), memory_dim, hidden, true, rng),
            value: Linear::new(store, &format!("{name}.value"), memory_dim, hidden, true, rng),
            output: Linear::new(store, &format!("{name}.output"), hidden, hidden, true, rng),
            heads,
            hidden,
        }
    }

    /// `queries: [Tq, hidden]`, `memory: [Tk, memory_dim]`, optional additive
    /// mask `[Tq, Tk]` (0 or [`MASKED`]).
    pub fn forward(&self, g: &mut Graph<'_>, queries: Var, memory: Var, mask: Option<&Tensor>) -> Var {
        let q = self.query.forward(g, queries);
        let k = self.key.forward(g, memory);
        let v = self.value.forward(g, memory);
        let head_dim = self.hidden / self.heads;
        let scale = 1.0 / math::sqrt(head_dim as f64);
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * head_dim, head_dim);
            let kh = g.slice_cols(k, h * head_dim, head_dim);
            let vh = g.slice_cols(v, h * head_dim, head_dim);
            let scores = g.matmul_nt(qh, kh);
            let mut scores = g.scale(scores, scale);
            if let Some(m) = mask {
                scores = g.add_const(scores, m);
            }
            let p = g.softmax(scores);
            outs.push(g.matmul(p, vh));
        }
        let cat = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs) };
        self.output.forward(g, cat)
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
}

impl FeedForward {
    pub fn new(store: &mut ParamStore, name: &str, hidden: usize, filter: usize, rng: &mut ChaCha8Rng) -> Self {
        FeedForward {
            inner: Linear::new(store, &format!("{name}.inner"), hidden, filter, true, rng),
            outer: Linear::new(store, &format!("{name}.outer"), filter, hidden, true, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var, dropout: f64) -> Var {
        let h = self.inner.forward(g, x);
        let h = g.relu(h);
        let h = g.dropout(h, dropout);
        self.outer.forward(g, h)
    }
}

/// Pre-norm Transformer encoder layer.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub attn_norm: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ffn_norm: LayerNorm,
    pub ffn: FeedForward,
}

impl EncoderLayer {
    pub fn new(store: &mut ParamStore, name: &str, hidden: usize, heads: usize, filter: usize, rng: &mut ChaCha8Rng) -> Self {
        EncoderLayer {
            attn_norm: LayerNorm::new(store, &format!("{name}.attn_norm"), hidden),
            attn: MultiHeadAttention::new(store, &format!("{name}.attn"), hidden, hidden, heads, rng),
            ffn_norm: LayerNorm::new(store, &format!("{name}.ffn_norm"), hidden),
            ffn: FeedForward::new(store, &format!("{name}.ffn"), hidden, filter, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var, mask: Option<&Tensor>, dropout: f64) -> Var {
        let h = self.attn_norm.forward(g, x);
        let h = self.attn.forward(g, h, h, mask);
        let h = g.dropout(h, dropout);
        let x = g.add(x, h);
        let h = self.ffn_norm.forward(g, x);
        let h = self.ffn.forward(g, h, dropout);
        let h = g.dropout(h, dropout);
        g.add(x, h)
    }
}

/// Pre-norm Transformer decoder layer: causal self-attention,
/// encoder-decoder attention, feed-forward.
#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub self_norm: LayerNorm,
    pub self_attn: MultiHeadAttention,
    pub cross_norm: LayerNorm,
    pub cross_attn: MultiHeadAttention,
    pub ffn_norm: LayerNorm,
    pub ffn: FeedForward,
}

impl DecoderLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        hidden: usize,
        memory_dim: usize,
        heads: usize,
        filter: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        DecoderLayer {
            self_norm: LayerNorm::new(store, &format!("{name}.self_norm"), hidden),
            self_attn: MultiHeadAttention::new(store, &format!("{name}.self_attn"), hidden, hidden, heads, rng),
            cross_norm: LayerNorm::new(store, &format!("{name}.cross_norm"), hidden),
            cross_attn: MultiHeadAttention::new(store, &format!("{name}.cross_attn"), hidden, memory_dim, heads, rng),
            ffn_norm: LayerNorm::new(store, &format!("{name}.ffn_norm"), hidden),
            ffn: FeedForward::new(store, &format!("{name}.ffn"), hidden, filter, rng),
        }
    }

    pub fn forward(
        &self,
        g: &mut Graph<'_>,
        x: Var,
        memory: Var,
        causal: &Tensor,
        memory_mask: Option<&Tensor>,
        dropout: f64,
    ) -> Var {
        let h = self.self_norm.forward(g, x);
        let h = self.self_attn.forward(g, h, h, Some(causal));
        let h = g.dropout(h, dropout);
        let x = g.add(x, h);
        let h = self.cross_norm.forward(g, x);
        let h = self.cross_attn.forward(g, h, memory, memory_mask);
        let h = g.dropout(h, dropout);
        let x = g.add(x, h);
        let h = self.ffn_norm.forward(g, x);
        let h = self.ffn.forward(g, h, dropout);
        let h = g.dropout(h, dropout);
        g.add(x, h)
    }
}

/// `[t, t]` additive mask hiding future positions.
pub fn causal_mask(t: usize) -> Tensor {
    let mut m = vec![0.0; t * t];
    for i in 0..t {
        for j in i + 1..t {
            m[i * t + j] = MASKED;
        }
    }
    Tensor::from_vec(&[t, t], m)
}

/// `[queries, keys]` additive mask hiding keys whose `valid` flag is false.
pub fn key_padding_mask(queries: usize, valid: &[bool]) -> Tensor {
    let k = valid.len();
    let mut m = vec![0.0; queries * k];
    for i in 0..queries {
        for (j, &ok) in valid.iter().enumerate() {
            if !ok {
                m[i * k + j] = MASKED;
            }
        }
    }
    Tensor::from_vec(&[queries, k], m)
}

/// Sinusoidal position encodings `[len, dim]`.
pub fn sinusoidal_positions(len: usize, dim: usize) -> Tensor {
    let mut out = vec![0.0; len * dim];
    for pos in 0..len {
        for i in 0..dim {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / math::powf(10_000.0, 2.0 * pair / dim as f64);
            out[pos * dim + i] = if i % 2 == 0 { math::sin(angle) } else { math::cos(angle) };
        }
    }
    Tensor::from_vec(&[len, dim], out)
}

/// 3x3 convolution followed by batch normalization and ReLU.
#[derive(Debug, Clone)]
pub struct ConvBn {
    pub weight: ParamId,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub stride: usize,
}

impl ConvBn {
    pub fn new(store: &mut ParamStore, name: &str, cin: usize, cout: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        let k = 3;
        ConvBn {
            weight: store.add(
                format!("{name}.weight"),
                glorot(&[cout, cin, k, k], cin * k * k, cout * k * k, rng),
            ),
            gamma: store.add(format!("{name}.bn_gamma"), Tensor::full(&[cout], 1.0)),
            beta: store.add(format!("{name}.bn_beta"), Tensor::zeros(&[cout])),
            running_mean: store.add_buffer(format!("{name}.bn_mean"), Tensor::zeros(&[cout])),
            running_var: store.add_buffer(format!("{name}.bn_var"), Tensor::full(&[cout], 1.0)),
            stride,
        }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var, relu: bool) -> Var {
        let w = g.param(self.weight);
        let h = g.conv2d(x, w, self.stride, 1);
        let gamma = g.param(self.gamma);
        let beta = g.param(self.beta);
        let h = g.batch_norm(h, gamma, beta, self.running_mean, self.running_var, BATCH_NORM_EPS);
        if relu {
            g.relu(h)
        } else {
            h
        }
    }
}

/// Three 3x3 conv layers; the block input (projected by a 1x1 convolution
/// when channel counts differ) is added to the input of the third layer,
/// which uses stride 2.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub conv1: ConvBn,
    pub conv2: ConvBn,
    pub conv3: ConvBn,
    pub shortcut: Option<ParamId>,
}

impl ResidualBlock {
    pub fn new(store: &mut ParamStore, name: &str, cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> Self {
        ResidualBlock {
            conv1: ConvBn::new(store, &format!("{name}.conv1"), cin, cout, 1, rng),
            conv2: ConvBn::new(store, &format!("{name}.conv2"), cout, cout, 1, rng),
            conv3: ConvBn::new(store, &format!("{name}.conv3"), cout, cout, 2, rng),
            shortcut: (cin != cout).then(|| {
                store.add(
                    format!("{name}.shortcut.weight"),
                    glorot(&[cout, cin, 1, 1], cin, cout, rng),
                )
            }),
        }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Var {
        let h = self.conv1.forward(g, x, true);
        let h = self.conv2.forward(g, h, true);
        let skip = match self.shortcut {
            Some(w) => {
                let w = g.param(w);
                g.conv2d(x, w, 1, 0)
            }
            None => x,
        };
        let h = g.add(h, skip);
        self.conv3.forward(g, h, true)
    }
}

/// Names every parameter under a prefix, for diagnostics.
pub fn param_names_with_prefix<'a>(store: &'a ParamStore, prefix: &'a str) -> impl Iterator<Item = &'a String> + 'a {
    store
        .iter()
        .map(|(_, p)| &p.name)
        .filter(move |n| n.starts_with(prefix))
}
