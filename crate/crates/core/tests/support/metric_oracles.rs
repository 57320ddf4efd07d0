//! Brute-force reference implementations of the captioning metrics, written
//! without the n-gram maps, LCS table or alignment search of the library.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Sent = Vec<String>;

/// Occurrences of `gram` in `seq`, by scanning every window.
pub fn occurrences(seq: &[String], gram: &[String]) -> usize {
    if gram.is_empty() || seq.len() < gram.len() {
        return 0;
    }
    (0..=seq.len() - gram.len())
        .filter(|&i| &seq[i..i + gram.len()] == gram)
        .count()
}

/// Distinct n-grams of `seq` in order of first appearance.
pub fn distinct_grams(seq: &[String], n: usize) -> Vec<Sent> {
    let mut out: Vec<Sent> = Vec::new();
    if seq.len() >= n {
        for i in 0..=seq.len() - n {
            let g = seq[i..i + n].to_vec();
            if !out.contains(&g) {
                out.push(g);
            }
        }
    }
    out
}

/// Corpus BLEU-1..4; `smooth` adds one to both counts for orders above one.
pub fn bleu(cands: &[Sent], refs: &[Vec<Sent>], smooth: bool) -> [f64; 4] {
    let mut clipped = [0.0f64; 4];
    let mut total = [0.0f64; 4];
    let (mut c_len, mut r_len) = (0.0, 0.0);
    for (c, rs) in cands.iter().zip(refs) {
        c_len += c.len() as f64;
        let mut lens: Vec<usize> = rs.iter().map(Vec::len).collect();
        lens.sort();
        let mut best = lens[0];
        for &l in &lens {
            if l.abs_diff(c.len()) < best.abs_diff(c.len()) {
                best = l;
            }
        }
        r_len += best as f64;
        for n in 1..=4 {
            if c.len() >= n {
                total[n - 1] += (c.len() + 1 - n) as f64;
            }
            for g in distinct_grams(c, n) {
                let max_ref = rs.iter().map(|r| occurrences(r, &g)).max().unwrap();
                clipped[n - 1] += occurrences(c, &g).min(max_ref) as f64;
            }
        }
    }
    let bp = if c_len == 0.0 {
        0.0
    } else if c_len >= r_len {
        1.0
    } else {
        (1.0 - r_len / c_len).exp()
    };
    let mut out = [0.0; 4];
    for n in 1..=4 {
        let mut product = 1.0;
        for k in 0..n {
            let (m, t) = if smooth && k > 0 {
                (clipped[k] + 1.0, total[k] + 1.0)
            } else {
                (clipped[k], total[k])
            };
            product *= if t == 0.0 { 0.0 } else { m / t };
        }
        out[n - 1] = bp * product.powf(1.0 / n as f64);
    }
    out
}

fn is_subsequence(needle: &[&String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|w| it.any(|h| h == *w))
}

/// Longest common subsequence by trying every subsequence of `a`.
pub fn lcs(a: &[String], b: &[String]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let k = mask.count_ones() as usize;
        if k <= best {
            continue;
        }
        let sub: Vec<&String> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| &a[i]).collect();
        if is_subsequence(&sub, b) {
            best = k;
        }
    }
    best
}

pub fn rouge_l(c: &[String], refs: &[Sent]) -> f64 {
    let beta2 = 1.2f64 * 1.2;
    let mut best = 0.0f64;
    for r in refs {
        let l = lcs(c, r) as f64;
        if l == 0.0 {
            continue;
        }
        let p = l / c.len() as f64;
        let rec = l / r.len() as f64;
        best = best.max((1.0 + beta2) * p * rec / (rec + beta2 * p));
    }
    best
}

/// CIDEr of every screen with dense TF-IDF vectors over the full n-gram
/// vocabulary of the corpus.
pub fn cider(cands: &[Sent], refs: &[Vec<Sent>]) -> Vec<f64> {
    let docs = refs.len() as f64;
    let mut scores = vec![0.0; cands.len()];
    for n in 1..=4 {
        let mut vocab: Vec<Sent> = Vec::new();
        for s in cands.iter().chain(refs.iter().flatten()) {
            for g in distinct_grams(s, n) {
                if !vocab.contains(&g) {
                    vocab.push(g);
                }
            }
        }
        let idf: Vec<f64> = vocab
            .iter()
            .map(|g| {
                let df = refs
                    .iter()
                    .filter(|rs| rs.iter().any(|r| occurrences(r, g) > 0))
                    .count();
                (docs / df.max(1) as f64).ln()
            })
            .collect();
        let vector = |s: &[String]| -> Vec<f64> {
            vocab
                .iter()
                .zip(&idf)
                .map(|(g, w)| occurrences(s, g) as f64 * w)
                .collect()
        };
        for (i, (c, rs)) in cands.iter().zip(refs).enumerate() {
            let cv = vector(c);
            let mut sum = 0.0;
            for r in rs {
                let rv = vector(r);
                let dot: f64 = cv.iter().zip(&rv).map(|(a, b)| a * b).sum();
                let na = cv.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nb = rv.iter().map(|b| b * b).sum::<f64>().sqrt();
                if na > 0.0 && nb > 0.0 {
                    sum += dot / (na * nb);
                }
            }
            scores[i] += sum / rs.len() as f64;
        }
    }
    scores.into_iter().map(|s| 10.0 * s / 4.0).collect()
}

/// Strips a plural `s`; the stemmer shared by the oracle and the library in tests.
pub fn toy_stem(w: &str) -> String {
    w.strip_suffix('s').unwrap_or(w).to_string()
}

fn matches(a: &str, b: &str) -> bool {
    a == b || toy_stem(a) == toy_stem(b)
}

/// Visits every partial one-to-one alignment and keeps the one with the most
/// matches, then the fewest chunks.
fn enumerate_alignments(
    c: &[String],
    r: &[String],
    i: usize,
    pairs: &mut Vec<(usize, usize)>,
    best: &mut (usize, usize),
) {
    if i == c.len() {
        let m = pairs.len();
        let mut chunks = 0;
        for (k, &(ci, rj)) in pairs.iter().enumerate() {
            let continues = k > 0 && pairs[k - 1].0 + 1 == ci && pairs[k - 1].1 + 1 == rj;
            if !continues {
                chunks += 1;
            }
        }
        if m > best.0 || (m == best.0 && chunks < best.1) {
            *best = (m, chunks);
        }
        return;
    }
    enumerate_alignments(c, r, i + 1, pairs, best);
    for j in 0..r.len() {
        if matches(&c[i], &r[j]) && !pairs.iter().any(|&(_, u)| u == j) {
            pairs.push((i, j));
            enumerate_alignments(c, r, i + 1, pairs, best);
            pairs.pop();
        }
    }
}

pub fn alignment(c: &[String], r: &[String]) -> (usize, usize) {
    let mut best = (0, usize::MAX);
    enumerate_alignments(c, r, 0, &mut Vec::new(), &mut best);
    best
}

pub fn meteor(c: &[String], refs: &[Sent]) -> f64 {
    let mut best = 0.0f64;
    for r in refs {
        let (m, chunks) = alignment(c, r);
        if m == 0 {
            continue;
        }
        let m = m as f64;
        let p = m / c.len() as f64;
        let rec = m / r.len() as f64;
        let f = 10.0 * p * rec / (rec + 9.0 * p);
        best = best.max(f * (1.0 - 0.5 * (chunks as f64 / m).powi(3)));
    }
    best
}

const WORDS: [&str; 9] = [
    "a", "b", "c", "page", "pages", "login", "logins", "settings", "setting",
];

fn sentence(rng: &mut ChaCha8Rng) -> Sent {
    let len = rng.random_range(1..=10);
    (0..len)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())].to_string())
        .collect()
}

/// A random corpus of `screens` candidates with five references each, all of
/// at most ten tokens. Every fourth candidate copies one of its references so
/// higher-order n-grams match too.
pub fn random_corpus(seed: u64, screens: usize) -> (Vec<Sent>, Vec<Vec<Sent>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cands = Vec::new();
    let mut refs = Vec::new();
    for i in 0..screens {
        let rs: Vec<Sent> = (0..5).map(|_| sentence(&mut rng)).collect();
        let c = if i % 4 == 0 {
            rs[rng.random_range(0..5)].clone()
        } else {
            sentence(&mut rng)
        };
        cands.push(c);
        refs.push(rs);
    }
    (cands, refs)
}
