//! Decoding vocabulary and word-vector tables.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub const PAD: u32 = 0;
pub const START: u32 = 1;
pub const END: u32 = 2;
pub const UNK: u32 = 3;
pub const NUM_RESERVED: usize = 4;
pub const RESERVED_TOKENS: [&str; NUM_RESERVED] = ["<pad>", "<start>", "<end>", "<unk>"];

/// Default number of non-reserved entries.
pub const DEFAULT_MAX_SIZE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index: BTreeMap<String, u32>,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Keeps the `max_size` most frequent tokens; ties are broken lexicographically.
    pub fn build<I, T, S>(documents: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if max_size < 1 {
            return Err(Error::Config("vocabulary max_size must be at least 1".into()));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for doc in documents {
            for tok in doc {
                let tok = tok.as_ref();
                if RESERVED_TOKENS.contains(&tok) {
                    continue;
                }
                *counts.entry(tok.to_string()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        // BTreeMap order is already lexicographic; a stable sort keeps it within ties.
        ranked.sort_by(|a, b| b.1.cmp(&a.1));
        ranked.truncate(max_size);
        Ok(Self::from_tokens(ranked.into_iter().map(|(t, _)| t)))
    }

    /// Builds from an ordered, non-reserved token list (index = position + 4).
    /// Later duplicates are ignored.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary {
            index: BTreeMap::new(),
            tokens: Vec::new(),
        };
        for t in RESERVED_TOKENS {
            v.push(t.to_string());
        }
        for t in tokens {
            let t = t.into();
            if !v.index.contains_key(&t) {
                v.push(t);
            }
        }
        v
    }

    fn push(&mut self, token: String) {
        self.index.insert(token.clone(), self.tokens.len() as u32);
        self.tokens.push(token);
    }

    /// Total size including reserved entries.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == NUM_RESERVED
    }

    pub fn encode(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn encode_all<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.encode(t.as_ref())).collect()
    }

    pub fn decode(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Non-reserved tokens in index order (the serialized form).
    pub fn user_tokens(&self) -> &[String] {
        &self.tokens[NUM_RESERVED..]
    }

    pub fn is_reserved(id: u32) -> bool {
        (id as usize) < NUM_RESERVED
    }
}

/// Token → dense vector table (e.g. GloVe).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: BTreeMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            index: BTreeMap::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Inserts a vector; returns false (and keeps the existing entry) on duplicates.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Shape(alloc::format!(
                "vector for `{token}` has {} values, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if self.index.contains_key(token) {
            return Ok(false);
        }
        self.index.insert(token.to_string(), self.data.len() / self.dim.max(1));
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        let row = *self.index.get(token)?;
        Some(&self.data[row * self.dim..(row + 1) * self.dim])
    }

    /// Sum of the vectors of in-table tokens; out-of-table tokens contribute zeros.
    pub fn pooled<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for t in tokens {
            if let Some(v) = self.get(t.as_ref()) {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += x;
                }
            }
        }
        out
    }

    /// Parses whitespace-separated `token v1 ... vD` lines. The dimension is
    /// `expected_dim` if given, otherwise taken from the first entry.
    pub fn parse_text(text: &str, expected_dim: Option<usize>) -> Result<Self> {
        let mut parser = TableParser::new(expected_dim);
        for (i, line) in text.lines().enumerate() {
            parser.push_line(i + 1, line)?;
        }
        Ok(parser.finish())
    }
}

/// Incremental word-vector parser so large files can be streamed line by line.
#[derive(Debug)]
pub struct TableParser {
    table: Option<EmbeddingTable>,
    expected_dim: Option<usize>,
    scratch: Vec<f64>,
}

impl TableParser {
    pub fn new(expected_dim: Option<usize>) -> Self {
        TableParser {
            table: None,
            expected_dim,
            scratch: Vec::new(),
        }
    }

    pub fn push_line(&mut self, line_no: usize, line: &str) -> Result<()> {
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else {
            return Ok(());
        };
        self.scratch.clear();
        for p in parts {
            let v: f64 = p.parse().map_err(|_| Error::Format {
                line: line_no,
                message: alloc::format!("invalid number `{p}`"),
            })?;
            self.scratch.push(v);
        }
        let dim = *self
            .expected_dim
            .get_or_insert(self.scratch.len());
        if self.scratch.len() != dim || dim == 0 {
            return Err(Error::Format {
                line: line_no,
                message: alloc::format!(
                    "expected {dim} values for `{token}`, found {}",
                    self.scratch.len()
                ),
            });
        }
        let table = self.table.get_or_insert_with(|| EmbeddingTable::new(dim));
        table.insert(token, &self.scratch)?;
        Ok(())
    }

    pub fn finish(self) -> EmbeddingTable {
        self.table
            .unwrap_or_else(|| EmbeddingTable::new(self.expected_dim.unwrap_or(0)))
    }
}
