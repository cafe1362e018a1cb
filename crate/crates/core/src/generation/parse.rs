//! Completion-to-items parsing.
//!
//! Completions arrive either as marked lists (bullets or numbered lines) or
//! as running prose. With at least two marker lines the completion is
//! treated as a list: every marker line contributes its stripped content and
//! every other non-empty line stands as its own item. Otherwise the whole
//! completion is sentence-split. Items are whitespace-normalized and never
//! empty.

use crate::chunker::{normalize_whitespace, split_sentences};

/// Strip one leading list marker: `- `, `* `, `• `, `1. `, or `1) `.
fn strip_marker(line: &str) -> Option<&str> {
    let t = line.trim_start();
    for bullet in ["- ", "* ", "\u{2022} "] {
        if let Some(rest) = t.strip_prefix(bullet) {
            return Some(rest);
        }
    }
    let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
    if (1..=3).contains(&digits) {
        let after = &t[digits..];
        if let Some(rest) = after.strip_prefix(". ").or_else(|| after.strip_prefix(") ")) {
            return Some(rest);
        }
    }
    None
}

/// Split a completion into limitation items.
pub fn parse_limitations(completion: &str) -> Vec<String> {
    let lines: Vec<&str> = completion.lines().collect();
    let marker_lines = lines.iter().filter(|l| strip_marker(l).is_some()).count();

    let mut items = Vec::new();
    if marker_lines >= 2 {
        for line in lines {
            let content = strip_marker(line).unwrap_or(line);
            let norm = normalize_whitespace(content);
            if !norm.is_empty() {
                items.push(norm);
            }
        }
    } else {
        for sentence in split_sentences(completion) {
            let stripped = strip_marker(&sentence)
                .map(normalize_whitespace)
                .unwrap_or(sentence);
            if !stripped.is_empty() {
                items.push(stripped);
            }
        }
    }
    items
}
