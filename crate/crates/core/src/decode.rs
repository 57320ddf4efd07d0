//! Beam-search generation and prediction post-processing.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::features::ScreenFeatures;
use crate::math;
use crate::model::Summarizer;
use crate::tensor::Tensor;
use crate::vocab::{Vocabulary, END, PAD, START};
use crate::{Error, Result};

/// Anything that scores the next token given a prefix.
pub trait StepModel {
    /// Log-probabilities over the vocabulary for the token following `prefix`.
    fn log_probs(&self, prefix: &[usize]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    pub beam_size: usize,
    /// Maximum generated tokens, END included.
    pub max_len: usize,
    /// Length-normalization exponent; 0 ranks by raw log-probability.
    pub alpha: f64,
    pub start: usize,
    pub end: usize,
}

impl BeamConfig {
    pub fn new(beam_size: usize, max_len: usize) -> Self {
        BeamConfig {
            beam_size,
            max_len,
            alpha: 0.0,
            start: START as usize,
            end: END as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Tokens beginning with the start token; ends with END when finished.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub finished: bool,
}

impl Hypothesis {
    /// Generated tokens (excluding the start token).
    pub fn generated(&self) -> usize {
        self.tokens.len() - 1
    }

    pub fn score(&self, alpha: f64) -> f64 {
        if alpha == 0.0 || self.generated() == 0 {
            self.log_prob
        } else {
            self.log_prob / math::powf(self.generated() as f64, alpha)
        }
    }
}

/// Higher score first; equal scores ordered by token sequence.
pub fn rank(a: &Hypothesis, b: &Hypothesis, alpha: f64) -> Ordering {
    b.score(alpha)
        .partial_cmp(&a.score(alpha))
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Beam search where finished hypotheses stay in the pool and compete with
/// expansions. Returns at most `beam_size` hypotheses, best first.
pub fn beam_search<M: StepModel + ?Sized>(model: &M, config: &BeamConfig) -> Result<Vec<Hypothesis>> {
    if config.beam_size == 0 || config.max_len == 0 {
        return Err(Error::Config("beam_size and max_len must be positive".into()));
    }
    let mut beam = vec![Hypothesis {
        tokens: vec![config.start],
        log_prob: 0.0,
        finished: false,
    }];
    for _ in 0..config.max_len {
        let mut pool: Vec<Hypothesis> = Vec::new();
        for h in &beam {
            if h.finished {
                pool.push(h.clone());
                continue;
            }
            let lp = model.log_probs(&h.tokens)?;
            for (tok, &l) in lp.iter().enumerate() {
                if l == f64::NEG_INFINITY || l.is_nan() {
                    continue;
                }
                let mut tokens = h.tokens.clone();
                tokens.push(tok);
                pool.push(Hypothesis {
                    tokens,
                    log_prob: h.log_prob + l,
                    finished: tok == config.end,
                });
            }
        }
        if pool.is_empty() {
            break;
        }
        pool.sort_by(|a, b| rank(a, b, config.alpha));
        pool.truncate(config.beam_size);
        beam = pool;
        if beam.iter().all(|h| h.finished) {
            break;
        }
    }
    Ok(beam)
}

/// Joins the words of a hypothesis, dropping reserved tokens.
pub fn postprocess(tokens: &[usize], vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for &t in tokens {
        if Vocabulary::is_reserved(t as u32) {
            continue;
        }
        let Some(word) = vocab.decode(t as u32) else {
            continue;
        };
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Decoder over one encoded screen. PAD and START are never generated.
#[derive(Debug)]
pub struct ScreenDecoder<'a> {
    model: &'a Summarizer,
    memory: Tensor,
}

impl<'a> ScreenDecoder<'a> {
    pub fn new(model: &'a Summarizer, features: &ScreenFeatures) -> Result<Self> {
        Ok(ScreenDecoder {
            model,
            memory: model.encode(features)?,
        })
    }
}

impl StepModel for ScreenDecoder<'_> {
    fn log_probs(&self, prefix: &[usize]) -> Result<Vec<f64>> {
        let mut lp = self.model.next_log_probs(&self.memory, prefix)?;
        lp[PAD as usize] = f64::NEG_INFINITY;
        lp[START as usize] = f64::NEG_INFINITY;
        Ok(lp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub screen_id: String,
    pub rank: usize,
    pub score: f64,
    pub summary: String,
}

/// Top hypotheses for one screen as ranked predictions (rank starts at 1).
pub fn predict_screen(
    model: &Summarizer,
    features: &ScreenFeatures,
    vocab: &Vocabulary,
    beam_size: usize,
    alpha: f64,
) -> Result<Vec<Prediction>> {
    let dec = ScreenDecoder::new(model, features)?;
    let config = BeamConfig {
        alpha,
        ..BeamConfig::new(beam_size, model.config().max_decode_len)
    };
    Ok(beam_search(&dec, &config)?
        .into_iter()
        .enumerate()
        .map(|(i, h)| Prediction {
            screen_id: features.screen_id.clone(),
            rank: i + 1,
            score: h.score(alpha),
            summary: postprocess(&h.tokens, vocab),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::UNK;

    struct Fixed(Vec<f64>);

    impl StepModel for Fixed {
        fn log_probs(&self, _: &[usize]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn end_first_gives_empty_body() {
        let m = Fixed(vec![f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0]);
        let out = beam_search(&m, &BeamConfig::new(5, 10)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].tokens, vec![START as usize, END as usize]);
        assert!(out[0].finished);
    }

    #[test]
    fn postprocess_drops_reserved() {
        let v = Vocabulary::from_tokens(["login", "page", "a", "b"]);
        let login = v.encode("login") as usize;
        let page = v.encode("page") as usize;
        let toks = [START as usize, login, UNK as usize, page, END as usize];
        assert_eq!(postprocess(&toks, &v), "login page");
        assert_eq!(postprocess(&[START as usize, END as usize], &v), "");
        let (a, b) = (v.encode("a") as usize, v.encode("b") as usize);
        assert_eq!(postprocess(&[START as usize, a, b, END as usize], &v), "a b");
    }

    #[test]
    fn truncates_at_max_len() {
        let m = Fixed(vec![f64::NEG_INFINITY, f64::NEG_INFINITY, -5.0, -0.01]);
        let out = beam_search(&m, &BeamConfig::new(1, 3)).unwrap();
        assert_eq!(out[0].generated(), 3);
        assert!(!out[0].finished);
    }
}
