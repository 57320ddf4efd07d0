//! Tokenization shared by vocabulary building, featurization, retrieval and metrics.

use alloc::string::String;
use alloc::vec::Vec;

/// Lowercases, splits on whitespace and emits every non-alphanumeric,
/// non-whitespace character as a token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            flush(&mut cur, &mut tokens);
        } else if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else {
            flush(&mut cur, &mut tokens);
            tokens.push(c.to_lowercase().collect());
        }
    }
    flush(&mut cur, &mut tokens);
    tokens
}

fn flush(cur: &mut String, tokens: &mut Vec<String>) {
    if !cur.is_empty() {
        tokens.push(core::mem::take(cur));
    }
}

/// True for tokens containing at least one letter or digit.
pub fn is_word(token: &str) -> bool {
    token.chars().any(char::is_alphanumeric)
}
