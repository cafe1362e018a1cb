//! Tokenization, sentence segmentation, and token-budget passage packing.
//!
//! Text flowing through this module is whitespace-normalized: runs of
//! whitespace collapse to a single space and ends are trimmed. Sentence
//! segmentation and packing both preserve normalized content exactly, so
//! joining the pieces back with single spaces (or normalizing a merged
//! passage) reproduces the normalized input.

use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest budget `pack_passages` accepts. With the default tokenizer a
/// single whitespace word never exceeds 3 tokens (leading punctuation run,
/// core, trailing punctuation run), so any budget of at least this size
/// guarantees word-level splitting makes progress.
pub const MIN_PASSAGE_BUDGET: usize = 16;

/// Abbreviations that suppress a sentence break after their trailing period.
/// Matched case-sensitively at a word boundary.
const PROTECTED_ABBREVIATIONS: &[&str] = &[
    "Fig.", "et al.", "e.g.", "i.e.", "vs.", "Eq.", "Sec.", "Dr.", "No.",
];

pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;

    /// Token boundaries over `text`. Tokens are borrowed slices of the input.
    fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str>;

    fn count_tokens(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

/// Splits on whitespace, then peels maximal runs of leading and trailing
/// ASCII punctuation off each word as separate tokens. Interior punctuation
/// stays attached, so "state-of-the-art (SOTA)!" yields
/// ["state-of-the-art", "(", "SOTA", ")!"].
#[derive(Debug, Clone, Default)]
pub struct DefaultTokenizer;

impl Tokenizer for DefaultTokenizer {
    fn name(&self) -> &str {
        "default"
    }

    fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let mut tokens = Vec::new();
        for word in text.split_whitespace() {
            let bytes = word.as_bytes();
            let mut start = 0;
            while start < bytes.len() && bytes[start].is_ascii_punctuation() {
                start += 1;
            }
            if start == bytes.len() {
                // All punctuation: one token, not split further.
                tokens.push(word);
                continue;
            }
            let mut end = bytes.len();
            while end > start && bytes[end - 1].is_ascii_punctuation() {
                end -= 1;
            }
            if start > 0 {
                tokens.push(&word[..start]);
            }
            tokens.push(&word[start..end]);
            if end < bytes.len() {
                tokens.push(&word[end..]);
            }
        }
        tokens
    }
}

/// Look up a tokenizer by its registry name.
pub fn tokenizer_by_name(name: &str) -> Result<Box<dyn Tokenizer>> {
    match name {
        "default" => Ok(Box::new(DefaultTokenizer)),
        other => Err(Error::UnknownTokenizer(other.to_string())),
    }
}

/// Collapse whitespace runs to single spaces and trim both ends.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

fn ends_with_protected_abbrev(prefix: &[char]) -> bool {
    'abbrevs: for abbrev in PROTECTED_ABBREVIATIONS {
        let a: Vec<char> = abbrev.chars().collect();
        if prefix.len() < a.len() {
            continue;
        }
        let tail = &prefix[prefix.len() - a.len()..];
        for (t, c) in tail.iter().zip(a.iter()) {
            if t != c {
                continue 'abbrevs;
            }
        }
        // Word boundary: the abbreviation must not be glued to a preceding
        // alphanumeric char ("convs." must still break, "vs." must not).
        match prefix.len().checked_sub(a.len() + 1).map(|i| prefix[i]) {
            Some(before) if before.is_alphanumeric() => continue,
            _ => return true,
        }
    }
    false
}

/// Split whitespace-normalized text into sentences. A break happens after
/// `.`, `!`, or `?` followed by a space and an uppercase letter or digit,
/// unless the text so far ends with a protected abbreviation. Joining the
/// result with single spaces reproduces the normalized input.
pub fn split_sentences(text: &str) -> Vec<String> {
    let norm = normalize_whitespace(text);
    if norm.is_empty() {
        return Vec::new();
    }
    let chars: Vec<char> = norm.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    for i in 0..chars.len() {
        let c = chars[i];
        if (c == '.' || c == '!' || c == '?')
            && i + 2 < chars.len()
            && chars[i + 1] == ' '
            && (chars[i + 2].is_uppercase() || chars[i + 2].is_ascii_digit())
            && !ends_with_protected_abbrev(&chars[..=i])
        {
            sentences.push(chars[start..=i].iter().collect());
            start = i + 2;
        }
    }
    if start < chars.len() {
        sentences.push(chars[start..].iter().collect());
    }
    sentences
}

/// A token-budgeted slice of one paper's source text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub paper_id: String,
    /// Position of this passage within its paper, starting at 0.
    pub index: usize,
    pub text: String,
    /// Token count of `text` under the tokenizer used for packing.
    pub token_count: usize,
    /// Half-open range of paper-level sentence indices covered by this
    /// passage. Both pieces of a word-split sentence carry that sentence's
    /// single-index range.
    pub sentence_span: (usize, usize),
}

/// Wire form of a passage: one JSON object per line in a passages file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageRecord {
    pub paper_id: String,
    pub index: usize,
    pub token_count: usize,
    pub text: String,
}

impl From<&Passage> for PassageRecord {
    fn from(p: &Passage) -> Self {
        PassageRecord {
            paper_id: p.paper_id.clone(),
            index: p.index,
            token_count: p.token_count,
            text: p.text.clone(),
        }
    }
}

/// Write passages to a JSONL file, one wire record per line, in input
/// order. The write is atomic: readers never see a partial file.
pub fn save_passages(path: &Path, passages: &[Passage]) -> Result<()> {
    let mut out = Vec::new();
    for p in passages {
        serde_json::to_writer(&mut out, &PassageRecord::from(p))?;
        out.push(b'\n');
    }
    crate::manifest::write_atomic(path, &out)
}

/// Load passages from a JSONL wire file. Wire records carry no sentence
/// spans, so loaded passages report the empty span (0, 0); consumers of
/// loaded passages key on paper id, index, and text only.
pub fn load_passages(path: &Path) -> Result<Vec<Passage>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut passages = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PassageRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Invalid(format!(
                "{}:{}: invalid passage record: {e}",
                path.display(),
                idx + 1
            ))
        })?;
        passages.push(Passage {
            paper_id: rec.paper_id,
            index: rec.index,
            text: rec.text,
            token_count: rec.token_count,
            sentence_span: (0, 0),
        });
    }
    Ok(passages)
}

struct Packer<'a> {
    paper_id: &'a str,
    tok: &'a dyn Tokenizer,
    budget: usize,
    out: Vec<Passage>,
    cur_text: String,
    cur_tokens: usize,
    cur_span: (usize, usize),
}

impl<'a> Packer<'a> {
    fn flush(&mut self) {
        if self.cur_text.is_empty() {
            return;
        }
        let text = std::mem::take(&mut self.cur_text);
        self.push_closed(text, self.cur_tokens, self.cur_span);
        self.cur_tokens = 0;
    }

    fn push_closed(&mut self, text: String, token_count: usize, span: (usize, usize)) {
        debug_assert!(token_count <= self.budget);
        self.out.push(Passage {
            paper_id: self.paper_id.to_string(),
            index: self.out.len(),
            text,
            token_count,
            sentence_span: span,
        });
    }

    /// Split one over-budget sentence at whitespace-word boundaries into
    /// maximal runs. Every word boundary is also a token boundary for any
    /// tokenizer that never merges across whitespace, so each piece joined
    /// with spaces reproduces the sentence.
    fn split_sentence_by_words(&mut self, sentence: &str, sent_idx: usize) {
        let words: Vec<&str> = sentence.split_whitespace().collect();
        let mut piece = String::new();
        let mut piece_tokens = 0usize;
        for word in words {
            let candidate = if piece.is_empty() {
                word.to_string()
            } else {
                format!("{piece} {word}")
            };
            let count = self.tok.count_tokens(&candidate);
            if count <= self.budget {
                piece = candidate;
                piece_tokens = count;
            } else {
                if !piece.is_empty() {
                    self.push_closed(piece, piece_tokens, (sent_idx, sent_idx + 1));
                }
                piece = word.to_string();
                piece_tokens = self.tok.count_tokens(&piece);
                // MIN_PASSAGE_BUDGET guarantees a single word fits.
                debug_assert!(piece_tokens <= self.budget);
            }
        }
        if !piece.is_empty() {
            self.push_closed(piece, piece_tokens, (sent_idx, sent_idx + 1));
        }
    }

    /// Split one over-budget paragraph at sentence boundaries into maximal
    /// runs. All resulting passages are closed; they never merge with
    /// neighboring paragraphs.
    fn split_paragraph(&mut self, sentences: &[String], first_sent_idx: usize) {
        let mut run = String::new();
        let mut run_tokens = 0usize;
        let mut run_start = first_sent_idx;
        let mut next_idx = first_sent_idx;
        for sentence in sentences {
            let sent_idx = next_idx;
            next_idx += 1;
            let candidate = if run.is_empty() {
                sentence.clone()
            } else {
                format!("{run} {sentence}")
            };
            let count = self.tok.count_tokens(&candidate);
            if count <= self.budget {
                run = candidate;
                run_tokens = count;
                continue;
            }
            if !run.is_empty() {
                self.push_closed(run, run_tokens, (run_start, sent_idx));
                run = String::new();
                run_tokens = 0;
            }
            let alone = self.tok.count_tokens(sentence);
            if alone <= self.budget {
                run = sentence.clone();
                run_tokens = alone;
                run_start = sent_idx;
            } else {
                self.split_sentence_by_words(sentence, sent_idx);
                run_start = sent_idx + 1;
            }
        }
        if !run.is_empty() {
            self.push_closed(run, run_tokens, (run_start, next_idx));
        }
    }
}

/// Pack a paper's paragraphs into passages of at most `budget` tokens.
///
/// Paragraphs merge greedily left to right (joined with a single newline)
/// while the merged count stays within budget. A paragraph that alone
/// exceeds the budget is split standalone into maximal sentence runs, and a
/// sentence that alone exceeds the budget is split at word boundaries; these
/// split pieces are closed and never merge with surrounding text.
pub fn pack_passages(
    paper_id: &str,
    paragraphs: &[String],
    budget: usize,
    tok: &dyn Tokenizer,
) -> Result<Vec<Passage>> {
    if budget < MIN_PASSAGE_BUDGET {
        return Err(Error::BudgetTooSmall {
            budget,
            min: MIN_PASSAGE_BUDGET,
        });
    }
    let mut packer = Packer {
        paper_id,
        tok,
        budget,
        out: Vec::new(),
        cur_text: String::new(),
        cur_tokens: 0,
        cur_span: (0, 0),
    };
    let mut sent_idx = 0usize;
    for para in paragraphs {
        let norm = normalize_whitespace(para);
        if norm.is_empty() {
            continue;
        }
        let sentences = split_sentences(&norm);
        let first_sent = sent_idx;
        sent_idx += sentences.len();
        let para_tokens = tok.count_tokens(&norm);

        if packer.cur_text.is_empty() {
            if para_tokens <= budget {
                packer.cur_text = norm;
                packer.cur_tokens = para_tokens;
                packer.cur_span = (first_sent, sent_idx);
            } else {
                packer.split_paragraph(&sentences, first_sent);
            }
            continue;
        }

        let candidate = format!("{}\n{}", packer.cur_text, norm);
        let cand_tokens = tok.count_tokens(&candidate);
        if cand_tokens <= budget {
            packer.cur_text = candidate;
            packer.cur_tokens = cand_tokens;
            packer.cur_span.1 = sent_idx;
        } else if para_tokens <= budget {
            packer.flush();
            packer.cur_text = norm;
            packer.cur_tokens = para_tokens;
            packer.cur_span = (first_sent, sent_idx);
        } else {
            packer.flush();
            packer.split_paragraph(&sentences, first_sent);
        }
    }
    packer.flush();
    Ok(packer.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok() -> DefaultTokenizer {
        DefaultTokenizer
    }

    #[test]
    fn tokenize_plain_words() {
        assert_eq!(tok().tokenize("hello world"), vec!["hello", "world"]);
        assert_eq!(tok().count_tokens("hello world"), 2);
    }

    #[test]
    fn tokenize_empty_is_empty() {
        assert_eq!(tok().count_tokens(""), 0);
        assert_eq!(tok().count_tokens("   \t\n"), 0);
    }

    #[test]
    fn tokenize_splits_edge_punctuation_runs() {
        assert_eq!(
            tok().tokenize("state-of-the-art (SOTA)!"),
            vec!["state-of-the-art", "(", "SOTA", ")!"]
        );
    }

    #[test]
    fn tokenize_keeps_interior_punctuation() {
        assert_eq!(tok().tokenize("doesn't"), vec!["doesn't"]);
        assert_eq!(tok().tokenize("e.g."), vec!["e.g", "."]);
    }

    #[test]
    fn tokenize_all_punctuation_word_is_one_token() {
        assert_eq!(tok().tokenize("!!!"), vec!["!!!"]);
        assert_eq!(tok().tokenize("a !!! b"), vec!["a", "!!!", "b"]);
    }

    #[test]
    fn single_word_never_exceeds_three_tokens() {
        for word in ["((x))!!", "a", "...", "(abc)", "--x--", "x,"] {
            assert!(tok().tokenize(word).len() <= 3, "word {word:?}");
        }
    }

    #[test]
    fn normalize_collapses_runs_and_trims() {
        assert_eq!(normalize_whitespace("  a \t b\n\nc "), "a b c");
        assert_eq!(normalize_whitespace(""), "");
        assert_eq!(normalize_whitespace(" \n "), "");
    }

    #[test]
    fn split_two_simple_sentences() {
        assert_eq!(
            split_sentences("It works. It fails."),
            vec!["It works.", "It fails."]
        );
    }

    #[test]
    fn split_protects_abbreviations() {
        assert_eq!(
            split_sentences("We use Fig. 3 here. Results follow."),
            vec!["We use Fig. 3 here.", "Results follow."]
        );
        assert_eq!(
            split_sentences("See Smith et al. 2020 for details. We differ."),
            vec!["See Smith et al. 2020 for details.", "We differ."]
        );
    }

    #[test]
    fn split_requires_uppercase_or_digit_after_space() {
        assert_eq!(
            split_sentences("we shipped v1.2 yesterday. it broke."),
            vec!["we shipped v1.2 yesterday. it broke."]
        );
        assert_eq!(
            split_sentences("Done. 3 remain."),
            vec!["Done.", "3 remain."]
        );
    }

    #[test]
    fn split_breaks_after_glued_abbreviation_lookalike() {
        // "convs." ends with "vs." but glued to an alphanumeric, so it is a
        // real sentence end.
        assert_eq!(
            split_sentences("We tried convs. They failed."),
            vec!["We tried convs.", "They failed."]
        );
    }

    #[test]
    fn split_handles_question_and_bang() {
        assert_eq!(
            split_sentences("Why? Because! It matters."),
            vec!["Why?", "Because!", "It matters."]
        );
    }

    #[test]
    fn split_empty_and_whitespace() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("  \n\t ").is_empty());
    }

    #[test]
    fn split_round_trips_to_normalized_input() {
        let text = "First one.  Second   one! Third? \n Fourth, e.g. with Fig. 2 inline.";
        let norm = normalize_whitespace(text);
        let sentences = split_sentences(text);
        assert_eq!(sentences.join(" "), norm);
    }

    #[test]
    fn unknown_tokenizer_rejected() {
        assert!(tokenizer_by_name("default").is_ok());
        assert!(matches!(
            tokenizer_by_name("bpe"),
            Err(Error::UnknownTokenizer(_))
        ));
    }

    /// Paragraph of `n` tokens: n-1 bare words plus one trailing period that
    /// tokenizes separately, as one sentence.
    fn para_tokens(n: usize, tag: &str) -> String {
        assert!(n >= 2);
        let words: Vec<String> = (0..n - 1).map(|i| format!("{tag}{i}")).collect();
        format!("{}.", words.join(" "))
    }

    #[test]
    fn pack_rejects_tiny_budget() {
        let paras = vec!["one two three".to_string()];
        assert!(matches!(
            pack_passages("p", &paras, 15, &tok()),
            Err(Error::BudgetTooSmall { .. })
        ));
        assert!(pack_passages("p", &paras, 16, &tok()).is_ok());
    }

    #[test]
    fn pack_merges_small_paragraphs() {
        // Counts 12 and 9 merge to 21 <= 25; the newline adds no tokens.
        let paras = vec![para_tokens(12, "a"), para_tokens(9, "b")];
        let out = pack_passages("p", &paras, 25, &tok()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].token_count, 21);
        assert!(out[0].text.contains('\n'));
        assert_eq!(out[0].sentence_span, (0, 2));
    }

    #[test]
    fn pack_splits_oversized_paragraph_at_sentences() {
        // Paragraphs of 12, 9, and 40 tokens with budget 25. The 40-token
        // paragraph is four 10-token sentences: runs of 20 and 20. Tags are
        // capitalized so each period starts a new sentence.
        let big: String = (0..4)
            .map(|s| para_tokens(10, &format!("S{s}x")))
            .collect::<Vec<_>>()
            .join(" ");
        assert_eq!(tok().count_tokens(&big), 40);
        assert_eq!(split_sentences(&big).len(), 4);
        let paras = vec![para_tokens(12, "a"), para_tokens(9, "b"), big];
        let out = pack_passages("p", &paras, 25, &tok()).unwrap();
        let counts: Vec<usize> = out.iter().map(|p| p.token_count).collect();
        assert_eq!(counts, vec![21, 20, 20]);
        assert!(counts.iter().all(|&c| c <= 25));
    }

    #[test]
    fn pack_splits_oversized_sentence_at_words() {
        // One sentence of 40 tokens (39 words + trailing period token).
        let sentence = para_tokens(40, "w");
        let out = pack_passages("p", std::slice::from_ref(&sentence), 16, &tok()).unwrap();
        assert!(out.len() > 1);
        for p in &out {
            assert!(p.token_count <= 16);
            assert_eq!(p.sentence_span, (0, 1));
        }
        let rejoined = out
            .iter()
            .map(|p| p.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        assert_eq!(rejoined, sentence);
    }

    #[test]
    fn pack_preserves_content_and_counts() {
        let paras = vec![
            "Alpha beta gamma. Delta epsilon!".to_string(),
            para_tokens(30, "q"),
            "Tail piece here.".to_string(),
        ];
        let out = pack_passages("p", &paras, 16, &tok()).unwrap();
        let joined_out = normalize_whitespace(
            &out.iter()
                .map(|p| p.text.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        );
        let joined_in = normalize_whitespace(&paras.join(" "));
        assert_eq!(joined_out, joined_in);
        for (i, p) in out.iter().enumerate() {
            assert_eq!(p.index, i);
            assert_eq!(p.token_count, tok().count_tokens(&p.text));
            assert_eq!(p.paper_id, "p");
        }
    }

    #[test]
    fn pack_empty_paragraphs_dropped() {
        let paras = vec!["  ".to_string(), "Real text here.".to_string()];
        let out = pack_passages("p", &paras, 16, &tok()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].text, "Real text here.");
    }

    #[test]
    fn pack_no_paragraphs_yields_no_passages() {
        let out = pack_passages("p", &[], 64, &tok()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn passages_round_trip_through_wire_file() {
        let paras = vec![
            "First paragraph here. It has sentences.".to_string(),
            para_tokens(40, "W"),
        ];
        let packed = pack_passages("p9", &paras, 20, &tok()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("passages.jsonl");
        save_passages(&path, &packed).unwrap();
        let loaded = load_passages(&path).unwrap();
        assert_eq!(loaded.len(), packed.len());
        for (orig, back) in packed.iter().zip(&loaded) {
            assert_eq!(back.paper_id, orig.paper_id);
            assert_eq!(back.index, orig.index);
            assert_eq!(back.text, orig.text);
            assert_eq!(back.token_count, orig.token_count);
            assert_eq!(back.sentence_span, (0, 0));
        }
    }

    #[test]
    fn load_passages_rejects_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"paper_id\": \"p\"}\n").unwrap();
        let err = load_passages(&path).unwrap_err();
        assert!(err.to_string().contains("invalid passage record"));
    }

    #[test]
    fn sentence_spans_tile_the_paper() {
        let paras = vec![
            "One. Two. Three.".to_string(),
            para_tokens(40, "z"),
            "Final sentence here. And another!".to_string(),
        ];
        let out = pack_passages("p", &paras, 20, &tok()).unwrap();
        let mut expect_start = 0usize;
        for p in &out {
            let (s, e) = p.sentence_span;
            assert!(s <= e);
            // Word-split pieces repeat the same single-sentence span;
            // otherwise spans advance contiguously.
            assert!(s == expect_start || (s + 1 == e && e == expect_start));
            expect_start = e;
        }
        let total: usize = paras.iter().map(|p| split_sentences(p).len()).sum();
        assert_eq!(expect_start, total);
    }
}
