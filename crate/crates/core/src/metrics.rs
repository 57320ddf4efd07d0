//! Captioning metrics: corpus BLEU-1..4, ROUGE-L, CIDEr and a METEOR variant
//! restricted to exact and stem matches.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{strip_stop_phrases, SplitView};
use crate::math;
use crate::text::tokenize;
use crate::{Error, Result};

pub type Tokens = Vec<String>;

/// Word stemming used by METEOR-lite.
pub trait Stem {
    fn stem(&self, word: &str) -> String;
}

/// Exact matching only.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoStem;

impl Stem for NoStem {
    fn stem(&self, word: &str) -> String {
        String::from(word)
    }
}

impl<F: Fn(&str) -> String> Stem for F {
    fn stem(&self, word: &str) -> String {
        self(word)
    }
}

fn ngrams(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut m = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return m;
    }
    for w in tokens.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BleuOptions {
    /// Add one to numerator and denominator of the precisions for n >= 2.
    pub smoothing: bool,
}

/// Clipped n-gram matches and candidate n-gram totals, per order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BleuStats {
    pub matches: [usize; 4],
    pub totals: [usize; 4],
    pub cand_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn add(&mut self, o: &BleuStats) {
        for n in 0..4 {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.cand_len += o.cand_len;
        self.ref_len += o.ref_len;
    }

    /// Cumulative BLEU-1..4 in `[0, 1]`.
    pub fn scores(&self, options: BleuOptions) -> [f64; 4] {
        let bp = if self.cand_len == 0 {
            0.0
        } else if self.cand_len >= self.ref_len {
            1.0
        } else {
            math::exp(1.0 - self.ref_len as f64 / self.cand_len as f64)
        };
        let mut out = [0.0; 4];
        let mut log_sum = 0.0;
        let mut zero = false;
        for n in 0..4 {
            let (m, t) = if options.smoothing && n > 0 {
                (self.matches[n] as f64 + 1.0, self.totals[n] as f64 + 1.0)
            } else {
                (self.matches[n] as f64, self.totals[n] as f64)
            };
            if m == 0.0 || t == 0.0 {
                zero = true;
            } else {
                log_sum += math::ln(m / t);
            }
            out[n] = if zero {
                0.0
            } else {
                bp * math::exp(log_sum / (n + 1) as f64)
            };
        }
        out
    }
}

/// Sufficient statistics of one candidate against its references.
pub fn bleu_stats(candidate: &[String], references: &[Tokens]) -> Result<BleuStats> {
    if references.is_empty() {
        return Err(Error::Input("empty reference set".into()));
    }
    let mut s = BleuStats {
        cand_len: candidate.len(),
        ..BleuStats::default()
    };
    // closest reference length, shorter on ties
    let c = candidate.len() as isize;
    s.ref_len = references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&l| ((l as isize - c).abs(), l))
        .unwrap_or(0);
    for n in 1..=4 {
        let cand = ngrams(candidate, n);
        let mut max_ref: BTreeMap<&[String], usize> = BTreeMap::new();
        for r in references {
            for (g, k) in ngrams(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(k);
            }
        }
        s.totals[n - 1] = candidate.len().saturating_sub(n - 1);
        s.matches[n - 1] = cand
            .iter()
            .map(|(g, &k)| k.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
    }
    Ok(s)
}

/// Corpus-level cumulative BLEU-1..4 in `[0, 1]`.
pub fn bleu(candidates: &[Tokens], references: &[Vec<Tokens>], options: BleuOptions) -> Result<[f64; 4]> {
    if candidates.len() != references.len() {
        return Err(Error::Input("one reference set per candidate required".into()));
    }
    let mut total = BleuStats::default();
    for (c, r) in candidates.iter().zip(references) {
        total.add(&bleu_stats(c, r)?);
    }
    Ok(total.scores(options))
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub const ROUGE_BETA: f64 = 1.2;

/// LCS F-measure against each reference; the best reference counts.
pub fn rouge_l(candidate: &[String], references: &[Tokens]) -> f64 {
    let b2 = ROUGE_BETA * ROUGE_BETA;
    references
        .iter()
        .map(|r| {
            let l = lcs_len(candidate, r);
            if l == 0 || candidate.is_empty() || r.is_empty() {
                return 0.0;
            }
            let p = l as f64 / candidate.len() as f64;
            let rec = l as f64 / r.len() as f64;
            (1.0 + b2) * p * rec / (rec + b2 * p)
        })
        .fold(0.0, f64::max)
}

/// Document frequencies of n-grams (n = 1..4) over per-screen reference sets.
#[derive(Debug, Clone, Default)]
pub struct CiderIdf {
    df: BTreeMap<Vec<String>, usize>,
    log_n: f64,
    num_docs: usize,
}

impl CiderIdf {
    pub fn fit(reference_sets: &[Vec<Tokens>]) -> Self {
        let mut df: BTreeMap<Vec<String>, usize> = BTreeMap::new();
        for refs in reference_sets {
            let mut seen: BTreeSet<&[String]> = BTreeSet::new();
            for r in refs {
                for n in 1..=4 {
                    seen.extend(ngrams(r, n).into_keys());
                }
            }
            for g in seen {
                *df.entry(g.to_vec()).or_insert(0) += 1;
            }
        }
        CiderIdf {
            df,
            log_n: math::ln(reference_sets.len().max(1) as f64),
            num_docs: reference_sets.len(),
        }
    }

    /// Fewer than two documents make every IDF zero or undefined.
    pub fn is_degenerate(&self) -> bool {
        self.num_docs < 2
    }

    pub fn idf(&self, gram: &[String]) -> f64 {
        let df = self.df.get(gram).copied().unwrap_or(0).max(1);
        self.log_n - math::ln(df as f64)
    }

    fn vector<'a>(&self, tokens: &'a [String], n: usize) -> BTreeMap<&'a [String], f64> {
        ngrams(tokens, n)
            .into_iter()
            .map(|(g, c)| (g, c as f64 * self.idf(g)))
            .collect()
    }

    /// CIDEr of one candidate in `[0, 10]`.
    pub fn score(&self, candidate: &[String], references: &[Tokens]) -> f64 {
        if references.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for n in 1..=4 {
            let cv = self.vector(candidate, n);
            let cn = math::sqrt(cv.values().map(|v| v * v).sum());
            let mut per_n = 0.0;
            for r in references {
                let rv = self.vector(r, n);
                let rn = math::sqrt(rv.values().map(|v| v * v).sum());
                if cn == 0.0 || rn == 0.0 {
                    continue;
                }
                let dot: f64 = cv
                    .iter()
                    .filter_map(|(g, a)| rv.get(g).map(|b| a * b))
                    .sum();
                per_n += dot / (cn * rn);
            }
            total += per_n / references.len() as f64;
        }
        10.0 * total / 4.0
    }
}

/// Alignment statistics of METEOR-lite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    pub matches: usize,
    pub chunks: usize,
}

const ALIGN_BUDGET: usize = 200_000;

/// Finds the alignment with the most matches and, among those, the fewest
/// chunks. Falls back to a greedy left-to-right alignment if the search
/// exceeds its node budget.
pub fn align(candidate: &[String], reference: &[String], stemmer: &dyn Stem) -> Alignment {
    let cs: Vec<String> = candidate.iter().map(|w| stemmer.stem(w)).collect();
    let rs: Vec<String> = reference.iter().map(|w| stemmer.stem(w)).collect();
    let options: Vec<Vec<usize>> = candidate
        .iter()
        .enumerate()
        .map(|(i, w)| {
            (0..reference.len())
                .filter(|&j| reference[j] == *w || rs[j] == cs[i])
                .collect()
        })
        .collect();
    if reference.len() <= 128 {
        let mut search = AlignSearch {
            options: &options,
            memo: BTreeMap::new(),
            nodes: 0,
        };
        if let Some((m, c)) = search.best(0, [0u64; 2], None) {
            return Alignment {
                matches: m,
                chunks: c,
            };
        }
    }
    greedy_align(&options)
}

struct AlignSearch<'a> {
    options: &'a [Vec<usize>],
    memo: BTreeMap<(usize, [u64; 2], Option<usize>), (usize, usize)>,
    nodes: usize,
}

impl AlignSearch<'_> {
    /// Best `(matches, chunks)` from candidate position `i` on, given the used
    /// reference positions and where candidate `i - 1` was aligned.
    fn best(&mut self, i: usize, used: [u64; 2], prev: Option<usize>) -> Option<(usize, usize)> {
        if i == self.options.len() {
            return Some((0, 0));
        }
        let key = (i, used, prev);
        if let Some(&v) = self.memo.get(&key) {
            return Some(v);
        }
        self.nodes += 1;
        if self.nodes > ALIGN_BUDGET {
            return None;
        }
        let better = |a: (usize, usize), b: (usize, usize)| a.0 > b.0 || (a.0 == b.0 && a.1 < b.1);
        let mut best = self.best(i + 1, used, None)?;
        for &j in &self.options[i] {
            if used[j / 64] >> (j % 64) & 1 == 1 {
                continue;
            }
            let mut u = used;
            u[j / 64] |= 1 << (j % 64);
            let (m, c) = self.best(i + 1, u, Some(j))?;
            let new_chunk = usize::from(!(prev.is_some_and(|p| p + 1 == j)));
            let cand = (m + 1, c + new_chunk);
            if better(cand, best) {
                best = cand;
            }
        }
        self.memo.insert(key, best);
        Some(best)
    }
}

fn greedy_align(options: &[Vec<usize>]) -> Alignment {
    let mut used = BTreeSet::new();
    let mut prev: Option<usize> = None;
    let (mut matches, mut chunks) = (0, 0);
    for opts in options {
        let pick = opts
            .iter()
            .copied()
            .filter(|j| !used.contains(j))
            .min_by_key(|&j| (prev.map_or(true, |p| p + 1 != j), j));
        match pick {
            Some(j) => {
                if prev.is_none_or(|p| p + 1 != j) {
                    chunks += 1;
                }
                used.insert(j);
                matches += 1;
                prev = Some(j);
            }
            None => prev = None,
        }
    }
    Alignment { matches, chunks }
}

/// METEOR-lite against one reference.
pub fn meteor_single(candidate: &[String], reference: &[String], stemmer: &dyn Stem) -> f64 {
    let a = align(candidate, reference, stemmer);
    if a.matches == 0 {
        return 0.0;
    }
    let m = a.matches as f64;
    let p = m / candidate.len() as f64;
    let r = m / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let pen = 0.5 * math::powi(a.chunks as f64 / m, 3);
    fmean * (1.0 - pen)
}

/// METEOR-lite; the best reference counts.
pub fn meteor_lite(candidate: &[String], references: &[Tokens], stemmer: &dyn Stem) -> f64 {
    references
        .iter()
        .map(|r| meteor_single(candidate, r, stemmer))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenScores {
    pub screen_id: String,
    pub bleu: [f64; 4],
    pub rouge_l: f64,
    pub cider: f64,
    pub meteor: f64,
}

/// Corpus scores scaled by 100 (CIDEr therefore spans `[0, 1000]`).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub bleu: [f64; 4],
    pub rouge_l: f64,
    pub cider: f64,
    pub meteor: f64,
    pub per_screen: Vec<ScreenScores>,
    /// Set when fewer than two screens were scored, so CIDEr IDF is degenerate.
    pub degenerate_idf: bool,
}

impl MetricReport {
    /// Column names and values in reporting order.
    pub fn columns(&self) -> [(&'static str, f64); 7] {
        [
            ("bleu1", self.bleu[0]),
            ("bleu2", self.bleu[1]),
            ("bleu3", self.bleu[2]),
            ("bleu4", self.bleu[3]),
            ("cider", self.cider),
            ("rouge_l", self.rouge_l),
            ("meteor_lite", self.meteor),
        ]
    }
}

/// Scores tokenized candidates against tokenized reference sets.
pub fn score_corpus(
    ids: &[String],
    candidates: &[Tokens],
    references: &[Vec<Tokens>],
    options: BleuOptions,
    stemmer: &dyn Stem,
) -> Result<MetricReport> {
    if ids.len() != candidates.len() || candidates.len() != references.len() {
        return Err(Error::Input("ids, candidates and references differ in length".into()));
    }
    let corpus_bleu = bleu(candidates, references, options)?;
    let idf = CiderIdf::fit(references);
    let mut per_screen = Vec::with_capacity(ids.len());
    for ((id, c), r) in ids.iter().zip(candidates).zip(references) {
        per_screen.push(ScreenScores {
            screen_id: id.clone(),
            bleu: bleu_stats(c, r)?.scores(options),
            rouge_l: rouge_l(c, r),
            cider: idf.score(c, r),
            meteor: meteor_lite(c, r, stemmer),
        });
    }
    let n = per_screen.len().max(1) as f64;
    let mean = |f: fn(&ScreenScores) -> f64| per_screen.iter().map(f).sum::<f64>() / n;
    Ok(MetricReport {
        bleu: corpus_bleu.map(|b| 100.0 * b),
        rouge_l: 100.0 * mean(|s| s.rouge_l),
        cider: 100.0 * mean(|s| s.cider),
        meteor: 100.0 * mean(|s| s.meteor),
        degenerate_idf: idf.is_degenerate(),
        per_screen,
    })
}

/// Evaluates rank-1 predictions (screen id → phrase) on a split. References
/// are each screen's summaries after stop-phrase removal.
pub fn evaluate_suite<S: AsRef<str>>(
    predictions: &BTreeMap<String, String>,
    view: &SplitView<'_>,
    stop_phrases: &[S],
    options: BleuOptions,
    stemmer: &dyn Stem,
) -> Result<MetricReport> {
    let missing: Vec<String> = view
        .screens()
        .filter(|s| !predictions.contains_key(&s.screen_id))
        .map(|s| s.screen_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    let mut ids = Vec::new();
    let mut cands = Vec::new();
    let mut refs = Vec::new();
    for s in view.screens() {
        ids.push(s.screen_id.clone());
        cands.push(tokenize(&predictions[&s.screen_id]));
        refs.push(
            s.summaries
                .iter()
                .map(|t| tokenize(&strip_stop_phrases(t, stop_phrases).text))
                .collect(),
        );
    }
    score_corpus(&ids, &cands, &refs, options, stemmer)
}
