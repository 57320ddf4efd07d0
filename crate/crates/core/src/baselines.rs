//! Nearest-neighbour template baselines over TF-IDF text vectors, raw pixel
//! vectors and autoencoder latents.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Graph, ParamId, ParamStore, Var};
use crate::corpus::Screen;
use crate::image::{GrayImage, RgbImage};
use crate::math;
use crate::nn::{glorot, Linear};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Tensor;
use crate::text::{is_word, tokenize};
use crate::{Error, Result};

/// Side length of the raw-pixel baseline vectors.
pub const PIXEL_SIZE: usize = 100;

/// Sparse vector as `(term id, weight)` pairs sorted by id.
pub type SparseVec = Vec<(u32, f64)>;

pub fn sparse_dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

/// Word tokens of the screen's visible element texts, optionally followed by
/// the app description.
pub fn screen_document(screen: &Screen, include_app_desc: bool) -> Vec<String> {
    let mut doc = Vec::new();
    for e in screen.tree.elements() {
        if !e.visible_to_user {
            continue;
        }
        if let Some(t) = &e.text {
            doc.extend(tokenize(t).into_iter().filter(|w| is_word(w)));
        }
    }
    if include_app_desc {
        if let Some(d) = &screen.app_description {
            doc.extend(tokenize(d).into_iter().filter(|w| is_word(w)));
        }
    }
    doc
}

/// Smoothed TF-IDF: raw counts times `ln((1 + N) / (1 + df)) + 1`, L2-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdf {
    terms: BTreeMap<String, u32>,
    idf: Vec<f64>,
    num_docs: usize,
}

impl TfIdf {
    pub fn fit<S: AsRef<str>>(docs: &[Vec<S>]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Empty("TF-IDF training documents"));
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for d in docs {
            let mut seen: Vec<&str> = d.iter().map(|w| w.as_ref()).collect();
            seen.sort_unstable();
            seen.dedup();
            for w in seen {
                *df.entry(w).or_insert(0) += 1;
            }
        }
        let n = docs.len() as f64;
        let mut terms = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (i, (w, c)) in df.into_iter().enumerate() {
            terms.insert(String::from(w), i as u32);
            idf.push(math::ln((1.0 + n) / (1.0 + c as f64)) + 1.0);
        }
        Ok(TfIdf {
            terms,
            idf,
            num_docs: docs.len(),
        })
    }

    pub fn from_parts(terms: Vec<(String, f64)>, num_docs: usize) -> Self {
        let mut map = BTreeMap::new();
        let mut idf = Vec::with_capacity(terms.len());
        for (i, (t, v)) in terms.into_iter().enumerate() {
            map.insert(t, i as u32);
            idf.push(v);
        }
        TfIdf {
            terms: map,
            idf,
            num_docs,
        }
    }

    /// `(term, idf)` pairs in term-id order.
    pub fn parts(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, u32)> = self.terms.iter().map(|(t, &i)| (t.as_str(), i)).collect();
        v.sort_by_key(|p| p.1);
        v.into_iter().map(|(t, i)| (t, self.idf[i as usize])).collect()
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.terms.get(term).map(|&i| self.idf[i as usize])
    }

    pub fn len(&self) -> usize {
        self.idf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idf.is_empty()
    }

    /// L2-normalized vector; empty when no known term occurs.
    pub fn transform<S: AsRef<str>>(&self, doc: &[S]) -> SparseVec {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for w in doc {
            if let Some(&i) = self.terms.get(w.as_ref()) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        let mut v: SparseVec = counts
            .into_iter()
            .map(|(i, c)| (i, c * self.idf[i as usize]))
            .collect();
        let norm = math::sqrt(v.iter().map(|(_, x)| x * x).sum());
        if norm > 0.0 {
            v.iter_mut().for_each(|(_, x)| *x /= norm);
        }
        v
    }
}

/// Grayscale, bilinear 100x100 resize, row-major, values in `[0, 1]`.
pub fn pixel_vectorize(img: &RgbImage) -> Vec<f64> {
    img.to_gray().resize_bilinear(PIXEL_SIZE, PIXEL_SIZE).data
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderConfig {
    pub input_size: usize,
    /// Encoder filters; the decoder mirrors them in reverse order.
    pub filters: [usize; 3],
    pub latent: usize,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            input_size: 96,
            filters: [128, 64, 32],
            latent: 100,
            adam: AdamConfig {
                lr: 1e-3,
                warmup_steps: 0,
                ..AdamConfig::default()
            },
            batch_size: 16,
            epochs: 20,
            seed: 0,
        }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size % 8 != 0 {
            return Err(Error::Config(format!(
                "autoencoder input size {} must be a positive multiple of 8",
                self.input_size
            )));
        }
        if self.filters.contains(&0) || self.latent == 0 || self.batch_size == 0 {
            return Err(Error::Config("autoencoder sizes must be positive".into()));
        }
        Ok(())
    }

    fn bottleneck(&self) -> (usize, usize) {
        (self.filters[2], self.input_size / 8)
    }
}

#[derive(Debug, Clone)]
struct ConvLayer {
    weight: ParamId,
    bias: ParamId,
}

/// Convolutional autoencoder: three stride-2 convolutions, a dense latent
/// layer, a dense expansion, three stride-2 transposed convolutions and a
/// final single-channel convolution with a sigmoid.
#[derive(Debug, Clone)]
pub struct PixelAutoencoder {
    config: AutoencoderConfig,
    params: ParamStore,
    enc: [ConvLayer; 3],
    to_latent: Linear,
    from_latent: Linear,
    dec: [ConvLayer; 3],
    out: ConvLayer,
}

impl PixelAutoencoder {
    pub fn new(config: AutoencoderConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut p = ParamStore::new();
        let f = config.filters;
        let conv = |p: &mut ParamStore, name: &str, shape: [usize; 4], fan_in: usize, fan_out: usize, bias: usize, rng: &mut ChaCha8Rng| ConvLayer {
            weight: p.add(format!("{name}.weight"), glorot(&shape, fan_in, fan_out, rng)),
            bias: p.add(format!("{name}.bias"), Tensor::zeros(&[bias])),
        };
        let enc = [
            conv(&mut p, "enc0", [f[0], 1, 3, 3], 9, f[0] * 9, f[0], &mut rng),
            conv(&mut p, "enc1", [f[1], f[0], 3, 3], f[0] * 9, f[1] * 9, f[1], &mut rng),
            conv(&mut p, "enc2", [f[2], f[1], 3, 3], f[1] * 9, f[2] * 9, f[2], &mut rng),
        ];
        let (c, s) = config.bottleneck();
        let flat = c * s * s;
        let to_latent = Linear::new(&mut p, "latent", flat, config.latent, true, &mut rng);
        let from_latent = Linear::new(&mut p, "expand", config.latent, flat, true, &mut rng);
        // transposed weights are [Cin, Cout, k, k]
        let dec = [
            conv(&mut p, "dec0", [f[2], f[2], 3, 3], f[2] * 9, f[2] * 9, f[2], &mut rng),
            conv(&mut p, "dec1", [f[2], f[1], 3, 3], f[2] * 9, f[1] * 9, f[1], &mut rng),
            conv(&mut p, "dec2", [f[1], f[0], 3, 3], f[1] * 9, f[0] * 9, f[0], &mut rng),
        ];
        let out = conv(&mut p, "out", [1, f[0], 3, 3], f[0] * 9, 9, 1, &mut rng);
        Ok(PixelAutoencoder {
            config,
            params: p,
            enc,
            to_latent,
            from_latent,
            dec,
            out,
        })
    }

    pub fn config(&self) -> &AutoencoderConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn load_params(&mut self, store: ParamStore) -> Result<()> {
        let same = store.len() == self.params.len()
            && self
                .params
                .iter()
                .zip(store.iter())
                .all(|((_, a), (_, b))| a.name == b.name && a.value.shape() == b.value.shape());
        if !same {
            return Err(Error::Shape("autoencoder tensors do not match the configuration".into()));
        }
        self.params = store;
        Ok(())
    }

    /// Grayscale input resized to the autoencoder resolution.
    pub fn prepare(&self, img: &RgbImage) -> GrayImage {
        let s = self.config.input_size;
        img.to_gray().resize_bilinear(s, s)
    }

    fn batch_tensor(&self, imgs: &[&GrayImage]) -> Tensor {
        let s = self.config.input_size;
        let mut data = Vec::with_capacity(imgs.len() * s * s);
        for i in imgs {
            data.extend_from_slice(&i.data);
        }
        Tensor::from_vec(&[imgs.len(), 1, s, s], data)
    }

    fn conv(&self, g: &mut Graph<'_>, l: &ConvLayer, x: Var, stride: usize) -> Var {
        let w = g.param(l.weight);
        let b = g.param(l.bias);
        let y = g.conv2d(x, w, stride, 1);
        g.add_channel(y, b)
    }

    fn encode_graph(&self, g: &mut Graph<'_>, x: Var) -> Var {
        let mut h = x;
        for l in &self.enc {
            h = self.conv(g, l, h, 2);
            h = g.relu(h);
        }
        let n = g.shape(h)[0];
        let (c, s) = self.config.bottleneck();
        let flat = g.reshape(h, &[n, c * s * s]);
        self.to_latent.forward(g, flat)
    }

    fn decode_graph(&self, g: &mut Graph<'_>, z: Var) -> Var {
        let n = g.shape(z)[0];
        let (c, s) = self.config.bottleneck();
        let h = self.from_latent.forward(g, z);
        let h = g.relu(h);
        let mut h = g.reshape(h, &[n, c, s, s]);
        let mut side = s;
        for l in &self.dec {
            side *= 2;
            let w = g.param(l.weight);
            let b = g.param(l.bias);
            let y = g.conv_transpose2d(h, w, 2, 1, (side, side));
            let y = g.add_channel(y, b);
            h = g.relu(y);
        }
        let y = self.conv(g, &self.out, h, 1);
        g.sigmoid(y)
    }

    /// Latent vectors for prepared images.
    pub fn encode(&self, imgs: &[&GrayImage]) -> Vec<Vec<f64>> {
        if imgs.is_empty() {
            return Vec::new();
        }
        let mut g = Graph::inference(&self.params);
        let x = g.constant(self.batch_tensor(imgs));
        let z = self.encode_graph(&mut g, x);
        let t = g.value(z);
        (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
    }

    /// Mean squared reconstruction error over prepared images.
    pub fn reconstruction_mse(&self, imgs: &[&GrayImage]) -> f64 {
        let mut g = Graph::inference(&self.params);
        let target = self.batch_tensor(imgs);
        let x = g.constant(target.clone());
        let z = self.encode_graph(&mut g, x);
        let y = self.decode_graph(&mut g, z);
        let l = g.mse(y, target.data());
        g.value(l).item()
    }

    /// Trains on prepared images with MSE; returns the mean loss per epoch.
    pub fn train(&mut self, imgs: &[&GrayImage]) -> Result<Vec<f64>> {
        if imgs.is_empty() {
            return Err(Error::Empty("autoencoder training images"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x5eed);
        let mut opt = Adam::new(self.config.adam);
        let mut order: Vec<usize> = (0..imgs.len()).collect();
        let mut history = Vec::with_capacity(self.config.epochs);
        for epoch in 0..self.config.epochs {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let mut total = 0.0;
            let mut batches = 0;
            for chunk in order.chunks(self.config.batch_size) {
                let batch: Vec<&GrayImage> = chunk.iter().map(|&i| imgs[i]).collect();
                let target = self.batch_tensor(&batch);
                let (loss, grads) = {
                    let mut g = Graph::inference(&self.params);
                    let x = g.constant(target.clone());
                    let z = self.encode_graph(&mut g, x);
                    let y = self.decode_graph(&mut g, z);
                    let l = g.mse(y, target.data());
                    (g.value(l).item(), g.backward(l))
                };
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite autoencoder loss in epoch {epoch}"
                    )));
                }
                opt.step(&mut self.params, &grads);
                total += loss;
                batches += 1;
            }
            history.push(total / batches as f64);
        }
        Ok(history)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RetrievalMode {
    TfIdf,
    Pixel,
    PixelDl,
    TfIdfPixel,
    TfIdfPixelAppDesc,
}

impl RetrievalMode {
    pub const ALL: [RetrievalMode; 5] = [
        RetrievalMode::TfIdf,
        RetrievalMode::Pixel,
        RetrievalMode::PixelDl,
        RetrievalMode::TfIdfPixel,
        RetrievalMode::TfIdfPixelAppDesc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RetrievalMode::TfIdf => "tfidf",
            RetrievalMode::Pixel => "pixel",
            RetrievalMode::PixelDl => "pixel-dl",
            RetrievalMode::TfIdfPixel => "tfidf+pixel",
            RetrievalMode::TfIdfPixelAppDesc => "tfidf+pixel+appdesc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// Vectors describing one screen for every retrieval mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenVectors {
    pub tfidf: SparseVec,
    pub tfidf_app: SparseVec,
    /// L2-normalized pixel vector (all zero for an all-black screen).
    pub pixel: Vec<f64>,
    pub latent: Option<Vec<f64>>,
}

impl ScreenVectors {
    pub fn is_text_empty(&self) -> bool {
        self.tfidf.is_empty()
    }

    pub fn is_pixel_empty(&self) -> bool {
        self.pixel.iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub screen_id: String,
    pub summaries: Vec<String>,
    pub vectors: ScreenVectors,
}

/// Retrieval index over training screens, sorted by screen id.
#[derive(Debug, Clone)]
pub struct ScreenIndex {
    pub tfidf: TfIdf,
    pub tfidf_app: TfIdf,
    pub entries: Vec<IndexEntry>,
    pub autoencoder: Option<PixelAutoencoder>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieved {
    pub screen_id: String,
    pub similarity: f64,
    pub summary: String,
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    math::l2_normalize(&mut v);
    v
}

impl ScreenIndex {
    /// Fits TF-IDF tables on the given (training) screens and indexes them.
    pub fn fit<'a>(
        screens: impl IntoIterator<Item = &'a Screen>,
        autoencoder: Option<PixelAutoencoder>,
    ) -> Result<Self> {
        let mut screens: Vec<&Screen> = screens.into_iter().collect();
        if screens.is_empty() {
            return Err(Error::Empty("retrieval index"));
        }
        screens.sort_by(|a, b| a.screen_id.cmp(&b.screen_id));
        let docs: Vec<Vec<String>> = screens.iter().map(|s| screen_document(s, false)).collect();
        let docs_app: Vec<Vec<String>> = screens.iter().map(|s| screen_document(s, true)).collect();
        let mut index = ScreenIndex {
            tfidf: TfIdf::fit(&docs)?,
            tfidf_app: TfIdf::fit(&docs_app)?,
            entries: Vec::with_capacity(screens.len()),
            autoencoder,
        };
        for s in screens {
            let vectors = index.vectorize(s);
            index.entries.push(IndexEntry {
                screen_id: s.screen_id.clone(),
                summaries: s.summaries.clone(),
                vectors,
            });
        }
        Ok(index)
    }

    pub fn vectorize(&self, screen: &Screen) -> ScreenVectors {
        let latent = self.autoencoder.as_ref().map(|ae| {
            let img = ae.prepare(&screen.screenshot);
            ae.encode(&[&img]).remove(0)
        });
        ScreenVectors {
            tfidf: self.tfidf.transform(&screen_document(screen, false)),
            tfidf_app: self.tfidf_app.transform(&screen_document(screen, true)),
            pixel: normalized(pixel_vectorize(&screen.screenshot)),
            latent,
        }
    }

    /// Similarity of a query to an indexed entry under `mode`.
    pub fn similarity(&self, query: &ScreenVectors, entry: &IndexEntry, mode: RetrievalMode) -> Result<f64> {
        let text = || sparse_dot(&query.tfidf, &entry.vectors.tfidf);
        let pixel = || dot(&query.pixel, &entry.vectors.pixel);
        Ok(match mode {
            RetrievalMode::TfIdf => text(),
            RetrievalMode::Pixel => pixel(),
            RetrievalMode::PixelDl => match (&query.latent, &entry.vectors.latent) {
                (Some(a), Some(b)) => math::cosine(a, b),
                _ => return Err(Error::Config("pixel-dl retrieval needs an autoencoder".into())),
            },
            RetrievalMode::TfIdfPixel => text() + pixel(),
            RetrievalMode::TfIdfPixelAppDesc => {
                sparse_dot(&query.tfidf_app, &entry.vectors.tfidf_app) + pixel()
            }
        })
    }

    /// Best-scoring entry (smallest screen id on ties), excluding `skip_id`.
    pub fn nearest(&self, query: &ScreenVectors, mode: RetrievalMode, skip_id: Option<&str>) -> Result<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.entries.iter().enumerate() {
            if skip_id == Some(e.screen_id.as_str()) {
                continue;
            }
            let s = self.similarity(query, e, mode)?;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.ok_or(Error::Empty("retrieval index"))
    }

    /// Nearest training screen and one of its summaries drawn with `rng`.
    pub fn retrieve(&self, query: &Screen, mode: RetrievalMode, rng: &mut impl Rng) -> Result<Retrieved> {
        let q = self.vectorize(query);
        let (i, similarity) = self.nearest(&q, mode, None)?;
        let e = &self.entries[i];
        let summary = e.summaries[rng.random_range(0..e.summaries.len())].clone();
        Ok(Retrieved {
            screen_id: e.screen_id.clone(),
            similarity,
            summary,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
