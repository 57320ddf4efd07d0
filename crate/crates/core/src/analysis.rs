//! Dataset analyses: inter-annotator word agreement, SFA coverage and IoU,
//! and the summary length distribution.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{strip_stop_phrases, Screen, MAX_SUMMARIES};
use crate::text::{is_word, tokenize};

/// Word tokens of a summary after stop-phrase removal.
pub fn summary_words<S: AsRef<str>>(summary: &str, stop_phrases: &[S]) -> Vec<String> {
    tokenize(&strip_stop_phrases(summary, stop_phrases).text)
        .into_iter()
        .filter(|t| is_word(t))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// Occurrences of the word across all analyzed summaries.
    pub occurrences: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordRow {
    pub word: String,
    /// 1-based rank by corpus frequency (ties by word).
    pub rank: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub occurrences: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordAgreement {
    /// Words with at least two occurrences, by rank.
    pub rows: Vec<WordRow>,
    /// Counts for every word, including singletons.
    pub all: BTreeMap<String, WordCounts>,
    pub screens_used: usize,
    /// Screens without exactly five summaries.
    pub screens_excluded: usize,
    /// Share of all word occurrences covered by `rows`.
    pub occurrence_coverage: f64,
}

fn counts<'m>(all: &'m mut BTreeMap<String, WordCounts>, w: &str) -> &'m mut WordCounts {
    all.entry(String::from(w)).or_insert(WordCounts {
        tp: 0,
        fp: 0,
        fn_: 0,
        occurrences: 0,
    })
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Checks each summary's words against the other summaries of its screen.
/// With `per_token` every occurrence is checked; otherwise each distinct word
/// once per summary.
pub fn word_agreement<'a, S: AsRef<str>>(
    screens: impl IntoIterator<Item = &'a Screen>,
    stop_phrases: &[S],
    per_token: bool,
) -> WordAgreement {
    let mut all: BTreeMap<String, WordCounts> = BTreeMap::new();
    let (mut used, mut excluded) = (0, 0);
    for s in screens {
        if s.summaries.len() != MAX_SUMMARIES {
            excluded += 1;
            continue;
        }
        used += 1;
        let words: Vec<Vec<String>> = s
            .summaries
            .iter()
            .map(|t| summary_words(t, stop_phrases))
            .collect();
        let types: Vec<BTreeSet<&str>> = words
            .iter()
            .map(|w| w.iter().map(String::as_str).collect())
            .collect();
        for (i, ws) in words.iter().enumerate() {
            let others: BTreeSet<&str> = types
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .flat_map(|(_, t)| t.iter().copied())
                .collect();
            let checked: Vec<&str> = if per_token {
                ws.iter().map(String::as_str).collect()
            } else {
                types[i].iter().copied().collect()
            };
            for w in checked {
                let c = counts(&mut all, w);
                if others.contains(w) {
                    c.tp += 1;
                } else {
                    c.fp += 1;
                }
            }
            for w in ws {
                let c = counts(&mut all, w);
                c.occurrences += 1;
            }
            for w in others.difference(&types[i]) {
                let c = counts(&mut all, w);
                c.fn_ += 1;
            }
        }
    }
    let total: usize = all.values().map(|c| c.occurrences).sum();
    let mut ranked: Vec<(&String, &WordCounts)> = all.iter().collect();
    ranked.sort_by(|a, b| b.1.occurrences.cmp(&a.1.occurrences).then(a.0.cmp(b.0)));
    let mut covered = 0;
    let rows: Vec<WordRow> = ranked
        .into_iter()
        .enumerate()
        .filter(|(_, (_, c))| c.occurrences >= 2)
        .map(|(i, (w, c))| {
            covered += c.occurrences;
            WordRow {
                word: w.clone(),
                rank: i + 1,
                tp: c.tp,
                fp: c.fp,
                fn_: c.fn_,
                occurrences: c.occurrences,
                precision: ratio(c.tp, c.tp + c.fp),
                recall: ratio(c.tp, c.tp + c.fn_),
            }
        })
        .collect();
    WordAgreement {
        rows,
        all,
        screens_used: used,
        screens_excluded: excluded,
        occurrence_coverage: ratio(covered, total).unwrap_or(0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfaStats {
    /// Mean of box area over screen area, across all boxes.
    pub mean_coverage: Option<f64>,
    /// Mean pairwise IoU per screen, averaged over screens with two or more boxes.
    pub mean_iou: Option<f64>,
    pub boxes: usize,
    pub screens_with_pairs: usize,
}

/// Mean IoU over all unordered pairs of boxes; `None` with fewer than two.
pub fn mean_pairwise_iou(boxes: &[crate::tree::Rect]) -> Option<f64> {
    if boxes.len() < 2 {
        return None;
    }
    let mut sum = 0.0;
    let mut n = 0;
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            sum += boxes[i].iou(&boxes[j]);
            n += 1;
        }
    }
    Some(sum / n as f64)
}

pub fn sfa_stats<'a>(screens: impl IntoIterator<Item = &'a Screen>) -> SfaStats {
    let (mut cov_sum, mut boxes) = (0.0, 0);
    let (mut iou_sum, mut pairs) = (0.0, 0);
    for s in screens {
        let area = s.screenshot.width() as f64 * s.screenshot.height() as f64;
        if area > 0.0 {
            for b in &s.sfa_boxes {
                let clipped = b.clip_to(s.screenshot.width(), s.screenshot.height());
                cov_sum += clipped.area() as f64 / area;
                boxes += 1;
            }
        }
        if let Some(iou) = mean_pairwise_iou(&s.sfa_boxes) {
            iou_sum += iou;
            pairs += 1;
        }
    }
    SfaStats {
        mean_coverage: ratio_f(cov_sum, boxes),
        mean_iou: ratio_f(iou_sum, pairs),
        boxes,
        screens_with_pairs: pairs,
    }
}

fn ratio_f(sum: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LengthHistogram {
    /// Word count → number of summaries.
    pub counts: BTreeMap<usize, usize>,
    pub summaries: usize,
    pub mean: Option<f64>,
}

/// Word counts of every summary after stop-phrase removal.
pub fn length_distribution<'a, S: AsRef<str>>(
    screens: impl IntoIterator<Item = &'a Screen>,
    stop_phrases: &[S],
) -> LengthHistogram {
    let mut h = LengthHistogram::default();
    let mut total = 0;
    for s in screens {
        for t in &s.summaries {
            let len = summary_words(t, stop_phrases).len();
            *h.counts.entry(len).or_insert(0) += 1;
            h.summaries += 1;
            total += len;
        }
    }
    h.mean = ratio_f(total as f64, h.summaries);
    h
}
