//! On-disk artifacts: word vectors, vocabulary files, and the binary corpus,
//! feature-cache, checkpoint, autoencoder and retrieval-index containers.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use sha2::{Digest, Sha256};
use uisum_core::baselines::{
    AutoencoderConfig, IndexEntry, PixelAutoencoder, ScreenIndex, ScreenVectors, SparseVec, TfIdf,
};
use uisum_core::corpus::{Corpus, Screen, Split};
use uisum_core::features::{ClassVocab, ElementFeatures, FeatureConfig, ScreenFeatures};
use uisum_core::image::RgbImage;
use uisum_core::model::{ModelConfig, Summarizer};
use uisum_core::optim::AdamConfig;
use uisum_core::tree::{NodeSpec, Rect, UiTree};
use uisum_core::vocab::{EmbeddingTable, TableParser, Vocabulary};

use crate::codec::{read_file, write_atomic, Decoder, Encoder};
use crate::{Error, Result};

/// Streams a whitespace word-vector file. With `keep`, only those tokens are
/// stored, though every line is still checked for a consistent dimension.
pub fn load_word_vectors(
    path: &Path,
    expected_dim: Option<usize>,
    keep: Option<&BTreeSet<String>>,
) -> Result<EmbeddingTable> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut parser = TableParser::new(expected_dim);
    let mut dim = expected_dim;
    let mut reader = BufReader::new(f);
    let mut line = String::new();
    let mut line_no = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else {
            continue;
        };
        let found = parts.count();
        let want = *dim.get_or_insert(found);
        if found != want {
            return Err(Error::core(
                path,
                uisum_core::Error::Format {
                    line: line_no,
                    message: format!("expected {want} values for `{token}`, found {found}"),
                },
            ));
        }
        if keep.is_none_or(|k| k.contains(token)) {
            parser.push_line(line_no, &line).map_err(|e| Error::core(path, e))?;
        }
    }
    let table = parser.finish();
    if table.is_empty() {
        return Ok(EmbeddingTable::new(dim.unwrap_or(0)));
    }
    Ok(table)
}

/// One token per line; index = line number + 4.
pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut s = String::new();
    for t in vocab.user_tokens() {
        s.push_str(t);
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let tokens: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    let unique: BTreeSet<&str> = tokens.iter().copied().collect();
    if unique.len() != tokens.len() {
        return Err(Error::format(path, "duplicate token in vocabulary file"));
    }
    Ok(Vocabulary::from_tokens(tokens))
}

/// Class names one per line, in id order (OTHER is implicit).
pub fn write_classes(path: &Path, classes: &ClassVocab) -> Result<()> {
    let s: String = classes.names().iter().map(|n| format!("{n}\n")).collect();
    write_atomic(path, s.as_bytes())
}

pub fn read_classes(path: &Path) -> Result<ClassVocab> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(ClassVocab::from_names(
        text.lines().filter(|l| !l.is_empty()).map(str::to_string),
    ))
}

fn rect(e: &mut Encoder, r: &Rect) {
    for v in [r.left, r.top, r.right, r.bottom] {
        e.i32(v);
    }
}

fn read_rect(d: &mut Decoder) -> Result<Rect> {
    let (l, t, r, b) = (d.i32()?, d.i32()?, d.i32()?, d.i32()?);
    if l > r || t > b {
        return Err(Error::format(Path::new("<rect>"), format!("inverted rectangle {l},{t},{r},{b}")));
    }
    Ok(Rect::new(l, t, r, b))
}

fn node(e: &mut Encoder, n: &NodeSpec) {
    e.str(&n.class_name);
    e.bool(n.clickable);
    e.bool(n.visible_to_user);
    rect(e, &n.bounds);
    e.opt_str(n.text.as_deref());
    e.u64(n.children.len() as u64);
    for c in &n.children {
        node(e, c);
    }
}

fn read_node(d: &mut Decoder) -> Result<NodeSpec> {
    let class = d.str()?;
    let clickable = d.bool()?;
    let visible = d.bool()?;
    let bounds = read_rect(d)?;
    let mut n = NodeSpec::new(class, bounds).clickable(clickable).visible(visible);
    n.text = d.opt_str()?;
    let k = d.len()?;
    for _ in 0..k {
        n.children.push(read_node(d)?);
    }
    Ok(n)
}

const CORPUS_VERSION: u32 = 1;

/// Screens (with pixels) and split assignments.
pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let header = vec![
        ("screens".to_string(), corpus.len().to_string()),
        ("summaries".to_string(), corpus.summary_count().to_string()),
    ];
    let mut e = Encoder::new("corpus", CORPUS_VERSION, &header);
    e.u64(corpus.len() as u64);
    for s in corpus.screens() {
        e.str(&s.screen_id);
        e.str(&s.app_id);
        node(&mut e, &s.tree.to_spec());
        e.u32(s.screenshot.width());
        e.u32(s.screenshot.height());
        e.bytes(s.screenshot.raw());
        e.u64(s.summaries.len() as u64);
        for t in &s.summaries {
            e.str(t);
        }
        e.u64(s.sfa_boxes.len() as u64);
        for b in &s.sfa_boxes {
            rect(&mut e, b);
        }
        e.opt_str(s.app_description.as_deref());
    }
    for split in Split::ALL {
        match corpus.split_apps(split) {
            Some(apps) => {
                e.bool(true);
                e.u64(apps.len() as u64);
                for a in apps {
                    e.str(a);
                }
            }
            None => e.bool(false),
        }
    }
    e.write(path)
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let bytes = read_file(path)?;
    let mut d = Decoder::open(&bytes, path, "corpus", CORPUS_VERSION)?;
    let n = d.len()?;
    let mut corpus = Corpus::new();
    for _ in 0..n {
        let screen_id = d.str()?;
        let app_id = d.str()?;
        let tree = UiTree::from_spec(&read_node(&mut d)?);
        let (w, h) = (d.u32()?, d.u32()?);
        let raw = d.bytes()?;
        if raw.len() != w as usize * h as usize * 3 {
            return Err(Error::format(path, format!("screen {screen_id}: pixel buffer size mismatch")));
        }
        let screenshot = RgbImage::from_raw(w, h, raw.to_vec());
        let k = d.len()?;
        let summaries = (0..k).map(|_| d.str()).collect::<Result<Vec<_>>>()?;
        let k = d.len()?;
        let sfa_boxes = (0..k).map(|_| read_rect(&mut d)).collect::<Result<Vec<_>>>()?;
        let app_description = d.opt_str()?;
        let screen = Screen {
            screen_id,
            app_id,
            tree,
            screenshot,
            summaries,
            sfa_boxes,
            app_description,
        };
        screen.validate().map_err(|e| Error::core(path, e))?;
        corpus.insert(screen);
    }
    let mut lists = BTreeMap::new();
    for split in Split::ALL {
        if d.bool()? {
            let k = d.len()?;
            lists.insert(split, (0..k).map(|_| d.str()).collect::<Result<Vec<_>>>()?);
        }
    }
    d.finish()?;
    if !lists.is_empty() {
        corpus.assign_splits(&lists).map_err(|e| Error::core(path, e))?;
    }
    Ok(corpus)
}

/// Hex SHA-256 over the featurization settings and the inputs they depend on.
pub fn feature_cache_key(config: &FeatureConfig, classes: &ClassVocab, word_vectors: &EmbeddingTable) -> String {
    let mut h = Sha256::new();
    h.update(config.fingerprint().as_bytes());
    for n in classes.names() {
        h.update(n.as_bytes());
        h.update([0]);
    }
    h.update((word_vectors.dim() as u64).to_le_bytes());
    h.update((word_vectors.len() as u64).to_le_bytes());
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

const FEATURES_VERSION: u32 = 1;

/// A feature cache with the settings it was built under.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    pub key: String,
    pub config: FeatureConfig,
    pub word_dim: usize,
    pub features: Vec<ScreenFeatures>,
}

pub fn write_features(path: &Path, cache: &FeatureCache) -> Result<()> {
    let c = &cache.config;
    let header = vec![
        ("config_hash".to_string(), cache.key.clone()),
        ("screens".to_string(), cache.features.len().to_string()),
        ("num_buckets".to_string(), c.num_buckets.to_string()),
        ("max_position".to_string(), c.max_position.to_string()),
        ("max_elements".to_string(), c.max_elements.to_string()),
        ("include_invisible".to_string(), c.include_invisible.to_string()),
        ("word_dim".to_string(), cache.word_dim.to_string()),
    ];
    let features = &cache.features;
    let mut e = Encoder::new("features", FEATURES_VERSION, &header);
    e.u64(features.len() as u64);
    for f in features {
        e.str(&f.screen_id);
        e.f64s(&f.app_desc_embedding);
        e.bool(f.has_app_description);
        e.u64(f.truncated as u64);
        e.u64(f.elements.len() as u64);
        for el in &f.elements {
            e.u32(el.class_id);
            e.bool(el.clickable);
            for v in el.spatial {
                e.u32(v);
            }
            e.u32(el.pre_order);
            e.u32(el.post_order);
            e.u32(el.depth);
            e.f64s(&el.text_embedding);
            e.u64(el.text_tokens.len() as u64);
            for t in &el.text_tokens {
                e.str(t);
            }
            e.f32s(&el.image_crop);
            e.bool(el.degenerate);
        }
    }
    e.write(path)
}

/// Reads a feature cache; with `expected_key`, a cache built under other
/// settings is rejected.
pub fn read_features(path: &Path, expected_key: Option<&str>) -> Result<FeatureCache> {
    let bytes = read_file(path)?;
    let mut d = Decoder::open(&bytes, path, "features", FEATURES_VERSION)?;
    let key = d.header_value("config_hash").unwrap_or("").to_string();
    let setting = |k: &str| -> Result<&str> {
        d.header_value(k)
            .ok_or_else(|| Error::format(path, format!("feature cache lacks setting {k}")))
    };
    let bad = |k: &str| Error::format(path, format!("bad feature cache setting {k}"));
    let config = FeatureConfig {
        num_buckets: setting("num_buckets")?.parse().map_err(|_| bad("num_buckets"))?,
        max_position: setting("max_position")?.parse().map_err(|_| bad("max_position"))?,
        max_elements: setting("max_elements")?.parse().map_err(|_| bad("max_elements"))?,
        include_invisible: setting("include_invisible")?.parse().map_err(|_| bad("include_invisible"))?,
    };
    let word_dim = setting("word_dim")?.parse().map_err(|_| bad("word_dim"))?;
    if let Some(want) = expected_key {
        if want != key {
            return Err(Error::format(
                path,
                format!("feature cache is stale (config hash {key}, expected {want}); re-run featurize"),
            ));
        }
    }
    let n = d.len()?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let screen_id = d.str()?;
        let app_desc_embedding = d.f64s()?;
        let has_app_description = d.bool()?;
        let truncated = d.u64()? as usize;
        let k = d.len()?;
        let mut elements = Vec::with_capacity(k);
        for _ in 0..k {
            let class_id = d.u32()?;
            let clickable = d.bool()?;
            let spatial = [d.u32()?, d.u32()?, d.u32()?, d.u32()?];
            let (pre_order, post_order, depth) = (d.u32()?, d.u32()?, d.u32()?);
            let text_embedding = d.f64s()?;
            let t = d.len()?;
            let text_tokens = (0..t).map(|_| d.str()).collect::<Result<Vec<_>>>()?;
            let image_crop = d.f32s()?;
            let degenerate = d.bool()?;
            elements.push(ElementFeatures {
                class_id,
                clickable,
                spatial,
                pre_order,
                post_order,
                depth,
                text_embedding,
                text_tokens,
                image_crop,
                degenerate,
            });
        }
        out.push(ScreenFeatures {
            screen_id,
            elements,
            app_desc_embedding,
            has_app_description,
            truncated,
        });
    }
    d.finish()?;
    Ok(FeatureCache {
        key,
        config,
        word_dim,
        features: out,
    })
}

const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with the vocabularies it was trained against.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Summarizer,
    pub vocab: Vocabulary,
    pub classes: ClassVocab,
    /// Feature-cache key of the training features.
    pub feature_key: String,
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let mut header: Vec<(String, String)> = ck
        .model
        .config()
        .to_pairs()
        .into_iter()
        .map(|(k, v)| (format!("model.{k}"), v))
        .collect();
    header.push(("feature_key".into(), ck.feature_key.clone()));
    let mut e = Encoder::new("checkpoint", CHECKPOINT_VERSION, &header);
    e.u64(ck.vocab.user_tokens().len() as u64);
    for t in ck.vocab.user_tokens() {
        e.str(t);
    }
    e.u64(ck.classes.names().len() as u64);
    for n in ck.classes.names() {
        e.str(n);
    }
    e.params(ck.model.params());
    e.write(path)
}

/// Loads a checkpoint. With `expected`, any difference in model configuration
/// is an error.
pub fn read_checkpoint(path: &Path, expected: Option<&ModelConfig>) -> Result<Checkpoint> {
    let bytes = read_file(path)?;
    let mut d = Decoder::open(&bytes, path, "checkpoint", CHECKPOINT_VERSION)?;
    let pairs: Vec<(&str, &str)> = d
        .header
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("model.").map(|k| (k, v.as_str())))
        .collect();
    let config = ModelConfig::from_pairs(pairs).map_err(|e| Error::core(path, e))?;
    if let Some(want) = expected {
        if *want != config {
            let diff: Vec<String> = want
                .to_pairs()
                .into_iter()
                .zip(config.to_pairs())
                .filter(|(a, b)| a.1 != b.1)
                .map(|(a, b)| format!("{}: checkpoint {} vs requested {}", a.0, b.1, a.1))
                .collect();
            return Err(Error::format(
                path,
                format!("model configuration mismatch ({})", diff.join(", ")),
            ));
        }
    }
    let feature_key = d.header_value("feature_key").unwrap_or("").to_string();
    let k = d.len()?;
    let tokens = (0..k).map(|_| d.str()).collect::<Result<Vec<_>>>()?;
    let k = d.len()?;
    let names = (0..k).map(|_| d.str()).collect::<Result<Vec<_>>>()?;
    let store = d.params()?;
    d.finish()?;
    let mut model = Summarizer::new(config, 0).map_err(|e| Error::core(path, e))?;
    model.load_params(store).map_err(|e| Error::core(path, e))?;
    Ok(Checkpoint {
        model,
        vocab: Vocabulary::from_tokens(tokens),
        classes: ClassVocab::from_names(names),
        feature_key,
    })
}

fn ae_header(c: &AutoencoderConfig) -> Vec<(String, String)> {
    vec![
        ("input_size".into(), c.input_size.to_string()),
        ("filters".into(), format!("{},{},{}", c.filters[0], c.filters[1], c.filters[2])),
        ("latent".into(), c.latent.to_string()),
        ("lr".into(), format!("{:?}", c.adam.lr)),
        ("batch_size".into(), c.batch_size.to_string()),
        ("epochs".into(), c.epochs.to_string()),
        ("seed".into(), c.seed.to_string()),
    ]
}

fn ae_config(d: &Decoder, path: &Path) -> Result<AutoencoderConfig> {
    let get = |k: &str| {
        d.header_value(k)
            .ok_or_else(|| Error::format(path, format!("missing autoencoder setting {k}")))
    };
    let num = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::format(path, format!("bad autoencoder setting {k}")))
    };
    let filters: Vec<usize> = get("filters")?
        .split(',')
        .map(|v| v.parse().map_err(|_| Error::format(path, "bad autoencoder filters")))
        .collect::<Result<_>>()?;
    let filters: [usize; 3] = filters
        .try_into()
        .map_err(|_| Error::format(path, "autoencoder needs three filter sizes"))?;
    Ok(AutoencoderConfig {
        input_size: num("input_size")?,
        filters,
        latent: num("latent")?,
        adam: AdamConfig {
            lr: get("lr")?.parse().map_err(|_| Error::format(path, "bad lr"))?,
            warmup_steps: 0,
            ..AdamConfig::default()
        },
        batch_size: num("batch_size")?,
        epochs: num("epochs")?,
        seed: get("seed")?.parse().map_err(|_| Error::format(path, "bad seed"))?,
    })
}

const AE_VERSION: u32 = 1;

pub fn write_autoencoder(path: &Path, ae: &PixelAutoencoder) -> Result<()> {
    let mut e = Encoder::new("autoencoder", AE_VERSION, &ae_header(ae.config()));
    e.params(ae.params());
    e.write(path)
}

fn decode_autoencoder(d: &mut Decoder, path: &Path) -> Result<PixelAutoencoder> {
    let config = ae_config(d, path)?;
    let mut ae = PixelAutoencoder::new(config).map_err(|e| Error::core(path, e))?;
    ae.load_params(d.params()?).map_err(|e| Error::core(path, e))?;
    Ok(ae)
}

pub fn read_autoencoder(path: &Path) -> Result<PixelAutoencoder> {
    let bytes = read_file(path)?;
    let mut d = Decoder::open(&bytes, path, "autoencoder", AE_VERSION)?;
    let ae = decode_autoencoder(&mut d, path)?;
    d.finish()?;
    Ok(ae)
}

const INDEX_VERSION: u32 = 1;

fn sparse(e: &mut Encoder, v: &SparseVec) {
    e.u64(v.len() as u64);
    for &(i, w) in v {
        e.u32(i);
        e.f64(w);
    }
}

fn read_sparse(d: &mut Decoder) -> Result<SparseVec> {
    let n = d.len()?;
    (0..n).map(|_| Ok((d.u32()?, d.f64()?))).collect()
}

fn tfidf(e: &mut Encoder, t: &TfIdf) {
    e.u64(t.num_docs() as u64);
    let parts = t.parts();
    e.u64(parts.len() as u64);
    for (term, idf) in parts {
        e.str(term);
        e.f64(idf);
    }
}

fn read_tfidf(d: &mut Decoder) -> Result<TfIdf> {
    let docs = d.u64()? as usize;
    let n = d.len()?;
    let terms = (0..n).map(|_| Ok((d.str()?, d.f64()?))).collect::<Result<Vec<_>>>()?;
    Ok(TfIdf::from_parts(terms, docs))
}

/// IDF tables, per-screen vectors, screen ids and the optional autoencoder.
pub fn write_index(path: &Path, index: &ScreenIndex) -> Result<()> {
    let mut header = vec![("screens".to_string(), index.entries.len().to_string())];
    if let Some(ae) = &index.autoencoder {
        header.extend(ae_header(ae.config()));
    }
    let mut e = Encoder::new("index", INDEX_VERSION, &header);
    tfidf(&mut e, &index.tfidf);
    tfidf(&mut e, &index.tfidf_app);
    e.u64(index.entries.len() as u64);
    for entry in &index.entries {
        e.str(&entry.screen_id);
        e.u64(entry.summaries.len() as u64);
        for s in &entry.summaries {
            e.str(s);
        }
        sparse(&mut e, &entry.vectors.tfidf);
        sparse(&mut e, &entry.vectors.tfidf_app);
        e.f64s(&entry.vectors.pixel);
        e.bool(entry.vectors.latent.is_some());
        if let Some(l) = &entry.vectors.latent {
            e.f64s(l);
        }
    }
    e.bool(index.autoencoder.is_some());
    if let Some(ae) = &index.autoencoder {
        e.params(ae.params());
    }
    e.write(path)
}

pub fn read_index(path: &Path) -> Result<ScreenIndex> {
    let bytes = read_file(path)?;
    let mut d = Decoder::open(&bytes, path, "index", INDEX_VERSION)?;
    let tfidf = read_tfidf(&mut d)?;
    let tfidf_app = read_tfidf(&mut d)?;
    let n = d.len()?;
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let screen_id = d.str()?;
        let k = d.len()?;
        let summaries = (0..k).map(|_| d.str()).collect::<Result<Vec<_>>>()?;
        let vectors = ScreenVectors {
            tfidf: read_sparse(&mut d)?,
            tfidf_app: read_sparse(&mut d)?,
            pixel: d.f64s()?,
            latent: if d.bool()? { Some(d.f64s()?) } else { None },
        };
        entries.push(IndexEntry {
            screen_id,
            summaries,
            vectors,
        });
    }
    let autoencoder = if d.bool()? {
        Some(decode_autoencoder(&mut d, path)?)
    } else {
        None
    };
    d.finish()?;
    Ok(ScreenIndex {
        tfidf,
        tfidf_app,
        entries,
        autoencoder,
    })
}
