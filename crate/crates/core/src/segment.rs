//! Splits raw thought text into reasoning steps.
//!
//! A step boundary falls on a `\n\n` delimiter only when the text it closes
//! contains the whole word "wait" or "but" (any case). Sections that do not
//! qualify are merged into the following one, delimiter included, so joining
//! the returned steps with `\n\n` reproduces the input exactly.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const DELIMITER: &str = "\n\n";

const KEYWORDS: [&str; 2] = ["wait", "but"];

pub fn segment_thoughts(raw_text: &str) -> Result<Vec<String>> {
    if raw_text.is_empty() {
        return Err(Error::EmptyText);
    }
    let mut steps = Vec::new();
    // Byte offset where the currently open (possibly merged) step begins.
    let mut open = 0;
    let mut cursor = 0;
    while let Some(found) = raw_text[cursor..].find(DELIMITER) {
        let end = cursor + found;
        if contains_keyword(&raw_text[open..end]) {
            steps.push(raw_text[open..end].to_string());
            open = end + DELIMITER.len();
        }
        cursor = end + DELIMITER.len();
    }
    steps.push(raw_text[open..].to_string());
    Ok(steps)
}

/// Inverse of [`segment_thoughts`].
pub fn join_steps<S: AsRef<str>>(steps: &[S]) -> String {
    let mut out = String::new();
    for (i, s) in steps.iter().enumerate() {
        if i > 0 {
            out.push_str(DELIMITER);
        }
        out.push_str(s.as_ref());
    }
    out
}

/// Whole-word, case-insensitive match of "wait" or "but".
pub fn contains_keyword(text: &str) -> bool {
    text.split(|c: char| !c.is_alphanumeric())
        .any(|word| KEYWORDS.iter().any(|k| word.eq_ignore_ascii_case(k)))
}
