//! Pipeline steps shared by the command-line tool and the test suites.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rust_stemmers::{Algorithm, Stemmer};
use uisum_core::baselines::{RetrievalMode, ScreenIndex};
use uisum_core::corpus::{strip_stop_phrases, Screen};
use uisum_core::decode::{predict_screen, Prediction};
use uisum_core::features::{featurize_screen, ClassVocab, FeatureConfig, ScreenFeatures};
use uisum_core::metrics::Stem;
use uisum_core::model::Summarizer;
use uisum_core::text::tokenize;
use uisum_core::train::Example;
use uisum_core::vocab::{EmbeddingTable, Vocabulary};

use crate::Result;

/// Summary tokens after stop-phrase removal.
pub fn summary_tokens<S: AsRef<str>>(summary: &str, stop_phrases: &[S]) -> Vec<String> {
    tokenize(&strip_stop_phrases(summary, stop_phrases).text)
}

/// Decoding vocabulary from the summaries of the given (training) screens.
pub fn build_vocab<'a, S: AsRef<str> + Sync>(
    screens: impl IntoIterator<Item = &'a Screen>,
    stop_phrases: &[S],
    max_size: usize,
) -> Result<Vocabulary> {
    let docs: Vec<Vec<String>> = screens
        .into_iter()
        .flat_map(|s| s.summaries.iter().map(|t| summary_tokens(t, stop_phrases)))
        .collect();
    Ok(Vocabulary::build(docs, max_size)?)
}

/// Tokens whose word vectors any later step can use: decoding vocabulary,
/// element text and app descriptions.
pub fn needed_tokens<'a>(screens: impl IntoIterator<Item = &'a Screen>, vocab: Option<&Vocabulary>) -> BTreeSet<String> {
    let mut keep: BTreeSet<String> = vocab
        .map(|v| v.user_tokens().iter().cloned().collect())
        .unwrap_or_default();
    for s in screens {
        for e in s.tree.elements() {
            if let Some(t) = &e.text {
                keep.extend(tokenize(t));
            }
        }
        if let Some(d) = &s.app_description {
            keep.extend(tokenize(d));
        }
    }
    keep
}

/// Featurizes screens in parallel, keeping input order.
pub fn featurize_all(
    screens: &[&Screen],
    table: &EmbeddingTable,
    classes: &ClassVocab,
    config: &FeatureConfig,
) -> Result<Vec<ScreenFeatures>> {
    let out: Vec<_> = screens
        .par_iter()
        .map(|s| featurize_screen(s, table, classes, config))
        .collect::<uisum_core::Result<_>>()?;
    Ok(out)
}

/// Pairs features with the tokenized summaries of their screens.
pub fn examples<'a, S: AsRef<str>>(
    features: impl IntoIterator<Item = &'a ScreenFeatures>,
    lookup: impl Fn(&str) -> Option<&'a Screen>,
    stop_phrases: &[S],
) -> Vec<Example> {
    features
        .into_iter()
        .filter_map(|f| {
            let s = lookup(&f.screen_id)?;
            Some(Example {
                features: f.clone(),
                summaries: s.summaries.iter().map(|t| summary_tokens(t, stop_phrases)).collect(),
            })
        })
        .collect()
}

/// Beam-decodes every screen in parallel; output is grouped by screen in
/// input order.
pub fn predict_all(
    model: &Summarizer,
    features: &[ScreenFeatures],
    vocab: &Vocabulary,
    beam_size: usize,
    alpha: f64,
) -> Result<Vec<Prediction>> {
    let per: Vec<Vec<Prediction>> = features
        .par_iter()
        .map(|f| predict_screen(model, f, vocab, beam_size, alpha))
        .collect::<uisum_core::Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

/// Per-screen RNG seed, so parallel retrieval does not depend on scheduling.
fn screen_seed(seed: u64, screen_id: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in screen_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Nearest-neighbour predictions (rank 1, score = similarity).
pub fn baseline_predictions(
    index: &ScreenIndex,
    screens: &[&Screen],
    mode: RetrievalMode,
    seed: u64,
) -> Result<Vec<Prediction>> {
    let out: Vec<Prediction> = screens
        .par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(screen_seed(seed, &s.screen_id));
            let r = index.retrieve(s, mode, &mut rng)?;
            Ok(Prediction {
                screen_id: s.screen_id.clone(),
                rank: 1,
                score: r.similarity,
                summary: r.summary,
            })
        })
        .collect::<uisum_core::Result<_>>()?;
    Ok(out)
}

/// English Snowball stemmer for METEOR-lite.
pub struct SnowballStem(Stemmer);

impl std::fmt::Debug for SnowballStem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SnowballStem(English)")
    }
}

impl Default for SnowballStem {
    fn default() -> Self {
        SnowballStem(Stemmer::create(Algorithm::English))
    }
}

impl Stem for SnowballStem {
    fn stem(&self, word: &str) -> String {
        self.0.stem(word).into_owned()
    }
}
