//! The summarization network: a Transformer encoder over element rows, a
//! residual CNN over element crops, late fusion by concatenation and a causal
//! Transformer decoder producing token logits.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Graph, ParamId, ParamStore, Var};
use crate::features::{ScreenFeatures, CROP_SIZE};
use crate::math;
use crate::nn::{
    causal_mask, key_padding_mask, sinusoidal_positions, uniform, DecoderLayer, EncoderLayer,
    LayerNorm, Linear, ResidualBlock,
};
use crate::tensor::{ConvGeom, Tensor};
use crate::vocab::{EmbeddingTable, Vocabulary, END, PAD, START};
use crate::{Error, Result};

/// Number of categorical feature tables per element: class, clickable, four
/// bounds buckets, pre-order, post-order, depth.
pub const NUM_CATEGORICALS: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    /// Inner width of the position-wise feed-forward layers.
    pub filter_size: usize,
    pub image_encoding_size: usize,
    pub cnn_flatten_size: usize,
    /// Filters of the first residual block; doubled per block up to `cnn_max_filters`.
    pub cnn_base_filters: usize,
    pub cnn_max_filters: usize,
    pub cnn_blocks: usize,
    pub vocab_size: usize,
    pub max_decode_len: usize,
    pub max_elements: usize,
    pub num_classes: usize,
    pub num_buckets: usize,
    pub max_position: usize,
    pub categorical_dim: usize,
    pub word_dim: usize,
    pub dropout: f64,
    pub use_pixels: bool,
    pub use_layout: bool,
    pub use_screen_text: bool,
    pub use_app_desc: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_size: 128,
            num_layers: 6,
            num_heads: 8,
            filter_size: 512,
            image_encoding_size: 128,
            cnn_flatten_size: 256,
            cnn_base_filters: 8,
            cnn_max_filters: 256,
            cnn_blocks: 7,
            vocab_size: crate::vocab::DEFAULT_MAX_SIZE,
            max_decode_len: 20,
            max_elements: 128,
            num_classes: crate::features::ClassVocab::DEFAULT_TOP_K + 1,
            num_buckets: 32,
            max_position: 256,
            categorical_dim: 32,
            word_dim: 300,
            dropout: 0.1,
            use_pixels: true,
            use_layout: true,
            use_screen_text: true,
            use_app_desc: true,
        }
    }
}

/// Which inputs a model variant sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    PixelOnly,
    TextOnly,
    NoAppDesc,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(Variant::Full),
            "pixel-only" => Some(Variant::PixelOnly),
            "text-only" => Some(Variant::TextOnly),
            "no-app-desc" => Some(Variant::NoAppDesc),
            _ => None,
        }
    }
}

impl ModelConfig {
    pub fn with_variant(mut self, v: Variant) -> Self {
        let (pixels, layout, text, app) = match v {
            Variant::Full => (true, true, true, true),
            Variant::PixelOnly => (true, false, false, false),
            Variant::TextOnly => (false, true, true, true),
            Variant::NoAppDesc => (true, true, true, false),
        };
        self.use_pixels = pixels;
        self.use_layout = layout;
        self.use_screen_text = text;
        self.use_app_desc = app;
        self
    }

    /// Filter count of each residual block.
    pub fn cnn_filters(&self) -> Vec<usize> {
        (0..self.cnn_blocks)
            .map(|i| {
                let f = self.cnn_base_filters.saturating_mul(1usize << i.min(30));
                f.min(self.cnn_max_filters)
            })
            .collect()
    }

    /// Spatial side length after every residual block.
    pub fn cnn_spatial_trace(&self) -> Vec<usize> {
        let mut size = CROP_SIZE;
        let mut trace = vec![size];
        for _ in 0..self.cnn_blocks {
            size = ConvGeom {
                in_c: 1,
                in_h: size,
                in_w: size,
                kernel: 3,
                stride: 2,
                pad: 1,
            }
            .out_h();
            trace.push(size);
        }
        trace
    }

    /// Length of the flattened final CNN feature map implied by the filter schedule.
    pub fn derived_flatten_size(&self) -> usize {
        let side = *self.cnn_spatial_trace().last().unwrap_or(&CROP_SIZE);
        self.cnn_filters().last().copied().unwrap_or(1) * side * side
    }

    pub fn fused_size(&self) -> usize {
        self.hidden_size + self.image_encoding_size
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden_size", self.hidden_size),
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("filter_size", self.filter_size),
            ("image_encoding_size", self.image_encoding_size),
            ("cnn_base_filters", self.cnn_base_filters),
            ("cnn_blocks", self.cnn_blocks),
            ("vocab_size", self.vocab_size),
            ("max_decode_len", self.max_decode_len),
            ("max_elements", self.max_elements),
            ("num_classes", self.num_classes),
            ("num_buckets", self.num_buckets),
            ("max_position", self.max_position),
            ("categorical_dim", self.categorical_dim),
            ("word_dim", self.word_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.hidden_size % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "hidden_size {} is not divisible by num_heads {}",
                self.hidden_size, self.num_heads
            )));
        }
        if self.vocab_size <= END as usize {
            return Err(Error::Config("vocab_size must cover the reserved tokens".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        let derived = self.derived_flatten_size();
        if derived != self.cnn_flatten_size {
            return Err(Error::Config(format!(
                "cnn_flatten_size {} does not match the filter schedule, which yields {derived}",
                self.cnn_flatten_size
            )));
        }
        Ok(())
    }

    /// Key-value form used by checkpoints; round-trips through [`ModelConfig::from_pairs`].
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("hidden_size", self.hidden_size.to_string()),
            ("num_layers", self.num_layers.to_string()),
            ("num_heads", self.num_heads.to_string()),
            ("filter_size", self.filter_size.to_string()),
            ("image_encoding_size", self.image_encoding_size.to_string()),
            ("cnn_flatten_size", self.cnn_flatten_size.to_string()),
            ("cnn_base_filters", self.cnn_base_filters.to_string()),
            ("cnn_max_filters", self.cnn_max_filters.to_string()),
            ("cnn_blocks", self.cnn_blocks.to_string()),
            ("vocab_size", self.vocab_size.to_string()),
            ("max_decode_len", self.max_decode_len.to_string()),
            ("max_elements", self.max_elements.to_string()),
            ("num_classes", self.num_classes.to_string()),
            ("num_buckets", self.num_buckets.to_string()),
            ("max_position", self.max_position.to_string()),
            ("categorical_dim", self.categorical_dim.to_string()),
            ("word_dim", self.word_dim.to_string()),
            ("dropout", format!("{:?}", self.dropout)),
            ("use_pixels", self.use_pixels.to_string()),
            ("use_layout", self.use_layout.to_string()),
            ("use_screen_text", self.use_screen_text.to_string()),
            ("use_app_desc", self.use_app_desc.to_string()),
        ]
    }

    /// Applies `key = value` overrides onto `self`. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: core::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid value {v:?} for {key}")))
        }
        match key {
            "hidden_size" => self.hidden_size = num(key, value)?,
            "num_layers" => self.num_layers = num(key, value)?,
            "num_heads" => self.num_heads = num(key, value)?,
            "filter_size" => self.filter_size = num(key, value)?,
            "image_encoding_size" => self.image_encoding_size = num(key, value)?,
            "cnn_flatten_size" => self.cnn_flatten_size = num(key, value)?,
            "cnn_base_filters" => self.cnn_base_filters = num(key, value)?,
            "cnn_max_filters" => self.cnn_max_filters = num(key, value)?,
            "cnn_blocks" => self.cnn_blocks = num(key, value)?,
            "vocab_size" => self.vocab_size = num(key, value)?,
            "max_decode_len" => self.max_decode_len = num(key, value)?,
            "max_elements" => self.max_elements = num(key, value)?,
            "num_classes" => self.num_classes = num(key, value)?,
            "num_buckets" => self.num_buckets = num(key, value)?,
            "max_position" => self.max_position = num(key, value)?,
            "categorical_dim" => self.categorical_dim = num(key, value)?,
            "word_dim" => self.word_dim = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "use_pixels" => self.use_pixels = num(key, value)?,
            "use_layout" => self.use_layout = num(key, value)?,
            "use_screen_text" => self.use_screen_text = num(key, value)?,
            "use_app_desc" => self.use_app_desc = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown model setting {key:?}"))),
        }
        Ok(())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut c = ModelConfig::default();
        for (k, v) in pairs {
            c.set(k, v)?;
        }
        Ok(c)
    }
}

#[derive(Debug, Clone)]
struct Encoder {
    class: ParamId,
    clickable: ParamId,
    bounds: [ParamId; 4],
    pre_order: ParamId,
    post_order: ParamId,
    depth: ParamId,
    /// Projection blocks of P for the categorical part and the source tag.
    proj_categorical: ParamId,
    proj_source: ParamId,
    layers: Vec<EncoderLayer>,
    final_norm: LayerNorm,
}

#[derive(Debug, Clone)]
struct ImageEncoder {
    blocks: Vec<ResidualBlock>,
    projection: Linear,
}

#[derive(Debug, Clone)]
struct Decoder {
    layers: Vec<DecoderLayer>,
    final_norm: LayerNorm,
    output: Linear,
}

/// The full network together with its parameters.
#[derive(Debug, Clone)]
pub struct Summarizer {
    config: ModelConfig,
    params: ParamStore,
    /// Word embeddings `[vocab, word_dim]`, used by the decoder input.
    word_embedding: ParamId,
    /// `word_dim -> hidden` projection applied both to pooled element text in
    /// the encoder and to decoder token embeddings.
    word_projection: ParamId,
    encoder: Encoder,
    images: ImageEncoder,
    decoder: Decoder,
    positions: Tensor,
}

/// Teacher-forcing pair: decoder input `[START, y1..]` and targets `[y1.., END]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSequence {
    pub input: Vec<usize>,
    pub target: Vec<usize>,
}

impl TargetSequence {
    /// Encodes a summary, truncating so that both sequences fit in `max_len`.
    pub fn encode(vocab: &Vocabulary, tokens: &[String], max_len: usize) -> Self {
        let ids = vocab.encode_all(tokens);
        let keep = ids.len().min(max_len.saturating_sub(1));
        let mut input = Vec::with_capacity(keep + 1);
        input.push(START as usize);
        input.extend(ids[..keep].iter().map(|&i| i as usize));
        let mut target: Vec<usize> = ids[..keep].iter().map(|&i| i as usize).collect();
        target.push(END as usize);
        TargetSequence { input, target }
    }
}

fn check_finite(g: &Graph<'_>, v: Var, what: &str) -> Result<()> {
    if g.value(v).is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite values in {what}")))
    }
}

impl Summarizer {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let c = &config;
        let h = c.hidden_size;
        let cd = c.categorical_dim;
        let emb = |p: &mut ParamStore, name: &str, rows: usize, rng: &mut ChaCha8Rng| {
            p.add(format!("encoder.embed.{name}"), uniform(&[rows, cd], 0.1, rng))
        };
        let class = emb(&mut p, "class", c.num_classes, &mut rng);
        let clickable = emb(&mut p, "clickable", 2, &mut rng);
        let bounds = [
            emb(&mut p, "left", c.num_buckets, &mut rng),
            emb(&mut p, "top", c.num_buckets, &mut rng),
            emb(&mut p, "right", c.num_buckets, &mut rng),
            emb(&mut p, "bottom", c.num_buckets, &mut rng),
        ];
        let pre_order = emb(&mut p, "pre_order", c.max_position, &mut rng);
        let post_order = emb(&mut p, "post_order", c.max_position, &mut rng);
        let depth = emb(&mut p, "depth", c.max_position, &mut rng);
        let cat_width = NUM_CATEGORICALS * cd;
        let in_width = cat_width + c.word_dim + 2;
        let proj_categorical = p.add(
            "encoder.projection.categorical",
            crate::nn::glorot(&[cat_width, h], in_width, h, &mut rng),
        );
        let word_projection = p.add(
            "shared.word_projection",
            crate::nn::glorot(&[c.word_dim, h], in_width, h, &mut rng),
        );
        let proj_source = p.add(
            "encoder.projection.source",
            crate::nn::glorot(&[2, h], in_width, h, &mut rng),
        );
        let word_embedding = p.add(
            "shared.word_embedding",
            uniform(&[c.vocab_size, c.word_dim], 0.1, &mut rng),
        );
        let layers = (0..c.num_layers)
            .map(|i| EncoderLayer::new(&mut p, &format!("encoder.layer{i}"), h, c.num_heads, c.filter_size, &mut rng))
            .collect();
        let final_norm = LayerNorm::new(&mut p, "encoder.final_norm", h);
        let encoder = Encoder {
            class,
            clickable,
            bounds,
            pre_order,
            post_order,
            depth,
            proj_categorical,
            proj_source,
            layers,
            final_norm,
        };

        let mut blocks = Vec::with_capacity(c.cnn_blocks);
        let mut cin = 1;
        for (i, cout) in c.cnn_filters().into_iter().enumerate() {
            blocks.push(ResidualBlock::new(&mut p, &format!("cnn.block{i}"), cin, cout, &mut rng));
            cin = cout;
        }
        let projection = Linear::new(&mut p, "cnn.projection", c.cnn_flatten_size, c.image_encoding_size, true, &mut rng);
        let images = ImageEncoder { blocks, projection };

        let mem = c.fused_size();
        let layers = (0..c.num_layers)
            .map(|i| DecoderLayer::new(&mut p, &format!("decoder.layer{i}"), h, mem, c.num_heads, c.filter_size, &mut rng))
            .collect();
        let final_norm = LayerNorm::new(&mut p, "decoder.final_norm", h);
        let output = Linear::new(&mut p, "decoder.output", h, c.vocab_size, true, &mut rng);
        let decoder = Decoder {
            layers,
            final_norm,
            output,
        };
        let positions = sinusoidal_positions(c.max_decode_len, h);
        Ok(Summarizer {
            config,
            params: p,
            word_embedding,
            word_projection,
            encoder,
            images,
            decoder,
            positions,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Replaces all parameter values; names and shapes must match exactly.
    pub fn load_params(&mut self, store: ParamStore) -> Result<()> {
        if store.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, found {}",
                self.params.len(),
                store.len()
            )));
        }
        for ((_, a), (_, b)) in self.params.iter().zip(store.iter()) {
            if a.name != b.name || a.value.shape() != b.value.shape() {
                return Err(Error::Shape(format!(
                    "tensor {} {:?} does not match {} {:?}",
                    b.name,
                    b.value.shape(),
                    a.name,
                    a.value.shape()
                )));
            }
        }
        self.params = store;
        Ok(())
    }

    /// Copies pretrained vectors into the word-embedding rows of every
    /// vocabulary token the table covers. Returns the number of rows copied.
    pub fn init_word_embeddings(&mut self, vocab: &Vocabulary, table: &EmbeddingTable) -> Result<usize> {
        if table.dim() != self.config.word_dim {
            return Err(Error::Config(format!(
                "embedding table has dimension {}, model expects {}",
                table.dim(),
                self.config.word_dim
            )));
        }
        let dim = self.config.word_dim;
        let e = self.params.get_mut(self.word_embedding);
        let mut copied = 0;
        for id in 0..vocab.len().min(e.rows()) {
            if let Some(v) = vocab.decode(id as u32).and_then(|t| table.get(t)) {
                e.data_mut()[id * dim..(id + 1) * dim].copy_from_slice(v);
                copied += 1;
            }
        }
        Ok(copied)
    }

    fn check_categorical(value: u32, size: usize, what: &'static str) -> Result<usize> {
        if (value as usize) < size {
            Ok(value as usize)
        } else {
            Err(Error::Index {
                what,
                index: value as usize,
                size,
            })
        }
    }

    /// Per-row embedding: categorical tables, pooled text and the source
    /// one-hot, projected to `hidden_size` by the bias-free projection P.
    pub fn embed_elements(&self, g: &mut Graph<'_>, f: &ScreenFeatures) -> Result<Var> {
        let c = &self.config;
        let n = f.elements.len();
        let rows = n + 1;
        let mut idx: [Vec<usize>; NUM_CATEGORICALS] = Default::default();
        let mut text = vec![0.0; rows * c.word_dim];
        for (r, e) in f.elements.iter().enumerate() {
            let vals = [
                Self::check_categorical(e.class_id, c.num_classes, "class_id")?,
                Self::check_categorical(e.clickable as u32, 2, "clickable")?,
                Self::check_categorical(e.spatial[0], c.num_buckets, "left bucket")?,
                Self::check_categorical(e.spatial[1], c.num_buckets, "top bucket")?,
                Self::check_categorical(e.spatial[2], c.num_buckets, "right bucket")?,
                Self::check_categorical(e.spatial[3], c.num_buckets, "bottom bucket")?,
                Self::check_categorical(e.pre_order, c.max_position, "pre_order")?,
                Self::check_categorical(e.post_order, c.max_position, "post_order")?,
                Self::check_categorical(e.depth, c.max_position, "depth")?,
            ];
            for (k, v) in vals.into_iter().enumerate() {
                idx[k].push(v);
            }
            if c.use_screen_text {
                if e.text_embedding.len() != c.word_dim {
                    return Err(Error::Shape(format!(
                        "element text embedding has {} values, expected {}",
                        e.text_embedding.len(),
                        c.word_dim
                    )));
                }
                text[r * c.word_dim..(r + 1) * c.word_dim].copy_from_slice(&e.text_embedding);
            }
        }
        if c.use_app_desc {
            if f.app_desc_embedding.len() != c.word_dim {
                return Err(Error::Shape(format!(
                    "app description embedding has {} values, expected {}",
                    f.app_desc_embedding.len(),
                    c.word_dim
                )));
            }
            text[n * c.word_dim..].copy_from_slice(&f.app_desc_embedding);
        }
        let mut source = vec![0.0; rows * 2];
        for r in 0..rows {
            source[r * 2 + usize::from(r == n)] = 1.0;
        }

        let text = g.constant(Tensor::from_vec(&[rows, c.word_dim], text));
        let wp = g.param(self.word_projection);
        let mut out = g.matmul(text, wp);
        let source = g.constant(Tensor::from_vec(&[rows, 2], source));
        let ps = g.param(self.encoder.proj_source);
        let src = g.matmul(source, ps);
        out = g.add(out, src);

        if c.use_layout && n > 0 {
            let tables = [
                self.encoder.class,
                self.encoder.clickable,
                self.encoder.bounds[0],
                self.encoder.bounds[1],
                self.encoder.bounds[2],
                self.encoder.bounds[3],
                self.encoder.pre_order,
                self.encoder.post_order,
                self.encoder.depth,
            ];
            let mut parts = Vec::with_capacity(NUM_CATEGORICALS);
            for (t, ix) in tables.iter().zip(&idx) {
                let table = g.param(*t);
                parts.push(g.gather(table, ix));
            }
            let cat = g.concat_cols(&parts);
            let pad = g.constant(Tensor::zeros(&[1, NUM_CATEGORICALS * c.categorical_dim]));
            let cat = g.concat_rows(&[cat, pad]);
            let pc = g.param(self.encoder.proj_categorical);
            let cat = g.matmul(cat, pc);
            out = g.add(out, cat);
        }
        Ok(out)
    }

    /// Transformer encoder stack. `valid` marks real (unpadded) rows; padded
    /// rows are hidden from attention.
    pub fn encode_structure(&self, g: &mut Graph<'_>, x: Var, valid: Option<&[bool]>) -> Result<Var> {
        let rows = g.shape(x)[0];
        if rows == 0 {
            return Err(Error::Empty("encoder input"));
        }
        let mask = valid.map(|v| key_padding_mask(rows, v));
        let mut h = x;
        for (i, layer) in self.encoder.layers.iter().enumerate() {
            h = layer.forward(g, h, mask.as_ref(), self.config.dropout);
            check_finite(g, h, &format!("encoder layer {i}"))?;
        }
        Ok(self.encoder.final_norm.forward(g, h))
    }

    /// Residual CNN over crops `[n, 1, 64, 64]`, returning `[n, image_encoding_size]`.
    pub fn encode_images(&self, g: &mut Graph<'_>, crops: &Tensor) -> Result<Var> {
        let shape = crops.shape();
        if shape.len() != 4 || shape[1] != 1 || shape[2] != CROP_SIZE || shape[3] != CROP_SIZE {
            return Err(Error::Shape(format!(
                "crops must be [n, 1, {CROP_SIZE}, {CROP_SIZE}], got {shape:?}"
            )));
        }
        let n = shape[0];
        let mut h = g.constant(crops.clone());
        for (i, block) in self.images.blocks.iter().enumerate() {
            h = block.forward(g, h);
            check_finite(g, h, &format!("cnn block {i}"))?;
        }
        let flat = g.reshape(h, &[n, self.config.cnn_flatten_size]);
        Ok(self.images.projection.forward(g, flat))
    }

    /// Concatenates `struct_enc [N+1, hidden]` with `image_enc [N, img]` plus
    /// a zero padding row for the app description.
    pub fn fuse(&self, g: &mut Graph<'_>, struct_enc: Var, image_enc: Option<Var>) -> Result<Var> {
        let rows = g.shape(struct_enc)[0];
        let img = self.config.image_encoding_size;
        let image_rows = image_enc.map_or(0, |v| g.shape(v)[0]);
        if image_enc.is_some() && image_rows + 1 != rows {
            return Err(Error::Shape(format!(
                "{rows} structural rows need {} image rows, got {image_rows}",
                rows - 1
            )));
        }
        let image = match image_enc {
            Some(v) => {
                let pad = g.constant(Tensor::zeros(&[1, img]));
                g.concat_rows(&[v, pad])
            }
            None => g.constant(Tensor::zeros(&[rows, img])),
        };
        Ok(g.concat_cols(&[struct_enc, image]))
    }

    /// Stacks the crops of the given screens into one `[n, 1, 64, 64]` batch.
    pub fn crops_tensor(screens: &[&ScreenFeatures]) -> Tensor {
        let n: usize = screens.iter().map(|s| s.elements.len()).sum();
        let plane = CROP_SIZE * CROP_SIZE;
        let mut data = Vec::with_capacity(n * plane);
        for s in screens {
            for e in &s.elements {
                data.extend(e.image_crop.iter().map(|&v| v as f64));
            }
        }
        Tensor::from_vec(&[n, 1, CROP_SIZE, CROP_SIZE], data)
    }

    /// Fused encodings for a batch of screens. Crops of all screens share one
    /// CNN pass so batch statistics span the whole batch.
    pub fn encode_batch(&self, g: &mut Graph<'_>, screens: &[&ScreenFeatures]) -> Result<Vec<Var>> {
        let images = if self.config.use_pixels && screens.iter().any(|s| !s.elements.is_empty()) {
            Some(self.encode_images(g, &Self::crops_tensor(screens))?)
        } else {
            None
        };
        let mut out = Vec::with_capacity(screens.len());
        let mut offset = 0;
        for s in screens {
            let x = self.embed_elements(g, s)?;
            let enc = self.encode_structure(g, x, None)?;
            let n = s.elements.len();
            let img = match images {
                Some(all) if n > 0 => Some(g.slice_rows(all, offset, n)),
                _ => None,
            };
            offset += n;
            out.push(self.fuse(g, enc, img)?);
        }
        Ok(out)
    }

    /// Logits `[prefix_len, vocab]` for a decoder prefix starting with START.
    pub fn decode_logits(&self, g: &mut Graph<'_>, memory: Var, prefix: &[usize]) -> Result<Var> {
        let c = &self.config;
        let t = prefix.len();
        if t == 0 || t > c.max_decode_len {
            return Err(Error::Length {
                len: t,
                max: c.max_decode_len,
            });
        }
        if let Some(&bad) = prefix.iter().find(|&&id| id >= c.vocab_size) {
            return Err(Error::Index {
                what: "decoder token",
                index: bad,
                size: c.vocab_size,
            });
        }
        let e = g.param(self.word_embedding);
        let tok = g.gather(e, prefix);
        let wp = g.param(self.word_projection);
        let x = g.matmul(tok, wp);
        let pos = Tensor::from_vec(&[t, c.hidden_size], self.positions.data()[..t * c.hidden_size].to_vec());
        let mut h = g.add_const(x, &pos);
        h = g.dropout(h, c.dropout);
        let causal = causal_mask(t);
        for (i, layer) in self.decoder.layers.iter().enumerate() {
            h = layer.forward(g, h, memory, &causal, None, c.dropout);
            check_finite(g, h, &format!("decoder layer {i}"))?;
        }
        let h = self.decoder.final_norm.forward(g, h);
        Ok(self.decoder.output.forward(g, h))
    }

    /// Mean token cross-entropy of one screen; PAD targets are skipped.
    pub fn loss(&self, g: &mut Graph<'_>, logits: Var, target: &[usize]) -> Result<Var> {
        let v = self.config.vocab_size;
        if let Some(&bad) = target.iter().find(|&&id| id >= v) {
            return Err(Error::Index {
                what: "target token",
                index: bad,
                size: v,
            });
        }
        let t: Vec<Option<usize>> = target
            .iter()
            .map(|&y| (y != PAD as usize).then_some(y))
            .collect();
        Ok(g.cross_entropy(logits, &t))
    }

    /// Teacher-forced loss averaged over screens, with token-level accuracy
    /// statistics `(correct, total)`.
    pub fn batch_loss(
        &self,
        g: &mut Graph<'_>,
        screens: &[&ScreenFeatures],
        targets: &[&TargetSequence],
    ) -> Result<(Var, usize, usize)> {
        if screens.is_empty() || screens.len() != targets.len() {
            return Err(Error::Shape("batch needs one target per screen".into()));
        }
        let memories = self.encode_batch(g, screens)?;
        let mut total: Option<Var> = None;
        let (mut correct, mut count) = (0, 0);
        for (mem, t) in memories.into_iter().zip(targets) {
            let logits = self.decode_logits(g, mem, &t.input)?;
            let (c, n) = token_accuracy(g.value(logits), &t.target);
            correct += c;
            count += n;
            let l = self.loss(g, logits, &t.target)?;
            total = Some(match total {
                Some(acc) => g.add(acc, l),
                None => l,
            });
        }
        let loss = g.scale(total.expect("non-empty batch"), 1.0 / screens.len() as f64);
        check_finite(g, loss, "loss")?;
        Ok((loss, correct, count))
    }

    /// Inference-mode fused encoding of one screen.
    pub fn encode(&self, f: &ScreenFeatures) -> Result<Tensor> {
        let mut g = Graph::inference(&self.params);
        let mem = self.encode_batch(&mut g, &[f])?;
        Ok(g.value(mem[0]).clone())
    }

    /// Inference-mode log-probabilities of the next token after `prefix`.
    pub fn next_log_probs(&self, memory: &Tensor, prefix: &[usize]) -> Result<Vec<f64>> {
        let mut g = Graph::inference(&self.params);
        let m = g.constant(memory.clone());
        let logits = self.decode_logits(&mut g, m, prefix)?;
        let l = g.value(logits);
        Ok(math::log_softmax(l.row(l.rows() - 1)))
    }
}

/// Counts argmax hits over non-PAD targets.
pub fn token_accuracy(logits: &Tensor, target: &[usize]) -> (usize, usize) {
    let mut correct = 0;
    let mut total = 0;
    for (r, &y) in target.iter().enumerate() {
        if y == PAD as usize {
            continue;
        }
        let row = logits.row(r);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        correct += usize::from(best == y);
        total += 1;
    }
    (correct, total)
}

/// A small configuration for tests and smoke runs.
pub fn tiny_config(vocab_size: usize, word_dim: usize) -> ModelConfig {
    ModelConfig {
        hidden_size: 8,
        num_layers: 1,
        num_heads: 1,
        filter_size: 16,
        image_encoding_size: 4,
        cnn_flatten_size: 4,
        cnn_base_filters: 2,
        cnn_max_filters: 4,
        cnn_blocks: 7,
        vocab_size,
        max_decode_len: 8,
        max_elements: 8,
        num_classes: 4,
        num_buckets: 4,
        max_position: 8,
        categorical_dim: 2,
        word_dim,
        dropout: 0.0,
        ..ModelConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_matches_cnn_schedule() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!(c.cnn_filters(), vec![8, 16, 32, 64, 128, 256, 256]);
        assert_eq!(c.cnn_spatial_trace(), vec![64, 32, 16, 8, 4, 2, 1, 1]);
        assert_eq!(c.derived_flatten_size(), 256);
        assert_eq!(c.fused_size(), 256);
    }

    #[test]
    fn config_rejects_bad_heads_and_flatten() {
        let mut c = ModelConfig {
            num_heads: 3,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
        c.num_heads = 8;
        c.cnn_max_filters = 64;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_pairs_round_trip() {
        let c = tiny_config(11, 6).with_variant(Variant::PixelOnly);
        let pairs = c.to_pairs();
        let back = ModelConfig::from_pairs(pairs.iter().map(|(k, v)| (*k, v.as_str()))).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn uniform_logits_give_log_vocab_loss() {
        let c = ModelConfig {
            vocab_size: 10_000,
            ..tiny_config(10_000, 4)
        };
        let m = Summarizer::new(c, 0).unwrap();
        let mut g = Graph::inference(m.params());
        let logits = g.constant(Tensor::zeros(&[3, 10_000]));
        let l = m.loss(&mut g, logits, &[4, 5, END as usize]).unwrap();
        assert!((g.value(l).item() - math::ln(10_000.0)).abs() < 1e-9);
    }

    #[test]
    fn target_sequence_shifts_by_one() {
        let v = Vocabulary::from_tokens(["login", "page"]);
        let t = TargetSequence::encode(&v, &["login".into(), "page".into()], 20);
        assert_eq!(t.input.len(), t.target.len());
        assert_eq!(t.input[0], START as usize);
        assert_eq!(t.input[1..], t.target[..2]);
        assert_eq!(*t.target.last().unwrap(), END as usize);
        let short = TargetSequence::encode(&v, &["login".into(), "page".into()], 2);
        assert_eq!(short.input.len(), 2);
    }
}
