//! ROUGE recall/precision/F1 from clipped n-gram overlap and longest common
//! subsequence, over lowercased default-tokenizer tokens with no stemming.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::chunker::{DefaultTokenizer, Tokenizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RougeVariant {
    Rouge1,
    Rouge2,
    RougeL,
}

impl RougeVariant {
    pub fn name(&self) -> &'static str {
        match self {
            RougeVariant::Rouge1 => "rouge-1",
            RougeVariant::Rouge2 => "rouge-2",
            RougeVariant::RougeL => "rouge-l",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub variant: RougeVariant,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn zero(variant: RougeVariant) -> Self {
        RougeScore {
            variant,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        }
    }
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub(crate) fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn lower_tokens(text: &str) -> Vec<String> {
    DefaultTokenizer
        .tokenize(text)
        .into_iter()
        .map(|t| t.to_lowercase())
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// N-gram ROUGE with clipped counts: each candidate n-gram matches at most
/// as many times as it appears in the reference. Only orders 1 and 2 are
/// accepted. Empty candidate or reference scores zero.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Result<RougeScore> {
    let variant = match n {
        1 => RougeVariant::Rouge1,
        2 => RougeVariant::Rouge2,
        other => return Err(Error::InvalidRougeOrder(other)),
    };
    let cand = lower_tokens(candidate);
    let refr = lower_tokens(reference);
    let cand_grams = ngram_counts(&cand, n);
    let ref_grams = ngram_counts(&refr, n);
    let cand_total: usize = cand_grams.values().sum();
    let ref_total: usize = ref_grams.values().sum();
    if cand_total == 0 || ref_total == 0 {
        return Ok(RougeScore::zero(variant));
    }
    let overlap: usize = cand_grams
        .iter()
        .map(|(gram, &count)| count.min(*ref_grams.get(gram).unwrap_or(&0)))
        .sum();
    let precision = overlap as f64 / cand_total as f64;
    let recall = overlap as f64 / ref_total as f64;
    Ok(RougeScore {
        variant,
        precision,
        recall,
        f1: f1(precision, recall),
    })
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    // One rolling row keeps memory linear in the shorter side.
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut curr = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

/// Token-level longest-common-subsequence ROUGE. Empty candidate or
/// reference scores zero.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    let cand = lower_tokens(candidate);
    let refr = lower_tokens(reference);
    if cand.is_empty() || refr.is_empty() {
        return RougeScore::zero(RougeVariant::RougeL);
    }
    let lcs = lcs_len(&cand, &refr) as f64;
    let precision = lcs / cand.len() as f64;
    let recall = lcs / refr.len() as f64;
    RougeScore {
        variant: RougeVariant::RougeL,
        precision,
        recall,
        f1: f1(precision, recall),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn rouge1_identical_texts_score_one() {
        let s = rouge_n("the model is slow", "the model is slow", 1).unwrap();
        assert!((s.precision - 1.0).abs() < EPS);
        assert!((s.recall - 1.0).abs() < EPS);
        assert!((s.f1 - 1.0).abs() < EPS);
    }

    #[test]
    fn rouge1_disjoint_texts_score_zero() {
        let s = rouge_n("aa bb cc", "dd ee ff", 1).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rouge1_hand_counted_recall() {
        // Candidate "a b c d e f" vs reference "a b c d e g": overlap 5 of 6
        // unigrams on both sides.
        let s = rouge_n("a b c d e f", "a b c d e g", 1).unwrap();
        assert!((s.recall - 5.0 / 6.0).abs() < EPS);
        assert!((s.precision - 5.0 / 6.0).abs() < EPS);
    }

    #[test]
    fn rouge1_clipping_limits_repeats() {
        // Candidate repeats "the" four times; the reference holds two.
        // Clipped overlap = 2, candidate total = 4, reference total = 2.
        let s = rouge_n("the the the the", "the cat the", 1).unwrap();
        assert!((s.precision - 2.0 / 4.0).abs() < EPS);
        assert!((s.recall - 2.0 / 3.0).abs() < EPS);
    }

    #[test]
    fn rouge2_hand_counted() {
        // "a b c d e" vs "a b c d x": candidate bigrams {ab,bc,cd,de},
        // reference {ab,bc,cd,dx}, overlap 3 of 4.
        let s = rouge_n("a b c d e", "a b c d x", 2).unwrap();
        assert!((s.precision - 0.75).abs() < EPS);
        assert!((s.recall - 0.75).abs() < EPS);
        assert!((s.f1 - 0.75).abs() < EPS);
    }

    #[test]
    fn rouge2_overlap_three_of_five() {
        // Candidate "a b c d" bigrams {ab,bc,cd}; reference "a b c d e f"
        // bigrams {ab,bc,cd,de,ef}: recall 3/5.
        let s = rouge_n("a b c d", "a b c d e f", 2).unwrap();
        assert!((s.recall - 0.6).abs() < EPS);
        assert!((s.precision - 1.0).abs() < EPS);
    }

    #[test]
    fn rouge_is_case_insensitive() {
        let s = rouge_n("The Model", "the model", 1).unwrap();
        assert!((s.f1 - 1.0).abs() < EPS);
    }

    #[test]
    fn rouge_order_validated() {
        assert!(matches!(
            rouge_n("a", "a", 3),
            Err(Error::InvalidRougeOrder(3))
        ));
        assert!(matches!(
            rouge_n("a", "a", 0),
            Err(Error::InvalidRougeOrder(0))
        ));
    }

    #[test]
    fn rouge_empty_inputs_are_zero() {
        for (c, r) in [("", "a b"), ("a b", ""), ("", "")] {
            let s1 = rouge_n(c, r, 1).unwrap();
            assert_eq!((s1.precision, s1.recall, s1.f1), (0.0, 0.0, 0.0));
            let sl = rouge_l(c, r);
            assert_eq!((sl.precision, sl.recall, sl.f1), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn rouge2_short_texts_have_no_bigrams() {
        let s = rouge_n("one", "one", 2).unwrap();
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn rouge_duality_swapping_texts_swaps_p_and_r() {
        let a = "the quick brown fox jumps";
        let b = "the brown dog sleeps";
        for n in [1, 2] {
            let ab = rouge_n(a, b, n).unwrap();
            let ba = rouge_n(b, a, n).unwrap();
            assert!((ab.precision - ba.recall).abs() < EPS);
            assert!((ab.recall - ba.precision).abs() < EPS);
            assert!((ab.f1 - ba.f1).abs() < EPS);
        }
        let ab = rouge_l(a, b);
        let ba = rouge_l(b, a);
        assert!((ab.precision - ba.recall).abs() < EPS);
        assert!((ab.f1 - ba.f1).abs() < EPS);
    }

    #[test]
    fn rouge_l_hand_counted() {
        // "a b c d" vs "a c b d": LCS is "a b d" or "a c d", length 3;
        // P = R = 3/4, F1 = 0.75.
        let s = rouge_l("a b c d", "a c b d");
        assert!((s.precision - 0.75).abs() < EPS);
        assert!((s.recall - 0.75).abs() < EPS);
        assert!((s.f1 - 0.75).abs() < EPS);
    }

    #[test]
    fn rouge_l_subsequence_not_substring() {
        // "a x b y c" vs "a b c": LCS "a b c" = 3 despite interruptions.
        let s = rouge_l("a x b y c", "a b c");
        assert!((s.recall - 1.0).abs() < EPS);
        assert!((s.precision - 0.6).abs() < EPS);
    }

    #[test]
    fn lcs_matches_exhaustive_oracle() {
        // Brute-force LCS over all subsequences of the shorter side.
        fn brute_lcs(a: &[String], b: &[String]) -> usize {
            let n = a.len();
            let mut best = 0;
            for mask in 0..(1u32 << n) {
                let sub: Vec<&String> =
                    (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
                // Check sub is a subsequence of b.
                let mut it = b.iter();
                if sub.iter().all(|s| it.any(|x| &x == s)) {
                    best = best.max(sub.len());
                }
            }
            best
        }
        let cases = [
            ("a b c d e", "b d a c e"),
            ("x x y", "x y x"),
            ("p q r", "r q p"),
            ("m n o p", "m n o p"),
        ];
        for (ca, cb) in cases {
            let a: Vec<String> = ca.split(' ').map(String::from).collect();
            let b: Vec<String> = cb.split(' ').map(String::from).collect();
            assert_eq!(lcs_len(&a, &b), brute_lcs(&a, &b), "{ca} vs {cb}");
        }
    }

    #[test]
    fn scores_stay_in_unit_interval() {
        let pairs = [
            ("a b a b a", "b a b"),
            ("only one", "completely different words"),
            ("punctuation, here! yes.", "punctuation here yes"),
        ];
        for (c, r) in pairs {
            for n in [1, 2] {
                let s = rouge_n(c, r, n).unwrap();
                for v in [s.precision, s.recall, s.f1] {
                    assert!((0.0..=1.0).contains(&v));
                }
            }
            let s = rouge_l(c, r);
            for v in [s.precision, s.recall, s.f1] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
