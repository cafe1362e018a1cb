//! Automatic quality rating via a grader model: render a judge prompt, take
//! the first standalone integer in [1, 5] from the reply.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::client::LlmClient;
use crate::error::{Error, Result};
use crate::generation::{generate, GenerationParams, PromptTemplate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeScore {
    pub paper_id: String,
    pub score: u8,
    /// The grader's reply verbatim, for auditing.
    pub raw_response: String,
}

/// First standalone integer in [1, 5]: a maximal digit run not glued to a
/// letter or digit, and not part of a decimal like "4.5". Runs outside the
/// range are skipped, later runs still count.
pub fn parse_judge_score(raw: &str) -> Option<u8> {
    let chars: Vec<char> = raw.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
        let end = i;
        let prev = start.checked_sub(1).map(|p| chars[p]);
        let next = chars.get(end).copied();
        let glued_prev = match prev {
            Some(c) if c.is_alphanumeric() => true,
            // Decimal tail: "4.5" must not yield 5.
            Some('.') => start >= 2 && chars[start - 2].is_ascii_digit(),
            _ => false,
        };
        let glued_next = match next {
            Some(c) if c.is_alphanumeric() => true,
            // Decimal head: "4.5" must not yield 4.
            Some('.') => chars.get(end + 1).is_some_and(|c| c.is_ascii_digit()),
            _ => false,
        };
        if glued_prev || glued_next {
            continue;
        }
        let run: String = chars[start..end].iter().collect();
        if let Ok(value) = run.parse::<u8>() {
            if (1..=5).contains(&value) {
                return Some(value);
            }
        }
    }
    None
}

/// Grade one paper's generated limitations. The judge template receives the
/// paper context as `{summary}` and the generated text as `{candidates}`.
pub fn llm_judge(
    client: &dyn LlmClient,
    paper_id: &str,
    source_summary: &str,
    generated: &str,
    template: &PromptTemplate,
    params: &GenerationParams,
) -> Result<JudgeScore> {
    if generated.trim().is_empty() {
        return Err(Error::EmptyText {
            what: "generated limitations".to_string(),
            metric: "judge".to_string(),
        });
    }
    let mut slots = BTreeMap::new();
    slots.insert("summary".to_string(), source_summary.to_string());
    slots.insert("candidates".to_string(), generated.to_string());
    let prompt = template.render(&slots)?;
    let raw = generate(client, &prompt, params)?;
    match parse_judge_score(&raw) {
        Some(score) => Ok(JudgeScore {
            paper_id: paper_id.to_string(),
            score,
            raw_response: raw,
        }),
        None => Err(Error::JudgeParse { raw }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::MockLlmClient;
    use crate::generation::{PromptSet, TemplateRole};

    #[test]
    fn parses_bare_integer() {
        assert_eq!(parse_judge_score("4"), Some(4));
        assert_eq!(parse_judge_score("Score: 3"), Some(3));
        assert_eq!(parse_judge_score("I rate this 5."), Some(5));
    }

    #[test]
    fn takes_first_standalone_in_range() {
        assert_eq!(parse_judge_score("2 out of 5"), Some(2));
        assert_eq!(parse_judge_score("10 points... well, 4"), Some(4));
    }

    #[test]
    fn rejects_decimals() {
        assert_eq!(parse_judge_score("4.5"), None);
        assert_eq!(parse_judge_score("I'd say 4.5 overall"), None);
        // A decimal earlier must not block a later standalone score.
        assert_eq!(parse_judge_score("4.5 rounds to 4"), Some(4));
    }

    #[test]
    fn rejects_alphanumeric_glue() {
        assert_eq!(parse_judge_score("v2 model"), None);
        assert_eq!(parse_judge_score("top5list"), None);
        assert_eq!(parse_judge_score("5th place but score 3"), Some(3));
    }

    #[test]
    fn out_of_range_runs_skipped() {
        assert_eq!(parse_judge_score("0"), None);
        assert_eq!(parse_judge_score("6"), None);
        assert_eq!(parse_judge_score("score 7, no wait, 2"), Some(2));
        assert_eq!(parse_judge_score("100"), None);
    }

    #[test]
    fn no_digits_yields_none() {
        assert_eq!(parse_judge_score("seven"), None);
        assert_eq!(parse_judge_score(""), None);
    }

    #[test]
    fn version_strings_do_not_score() {
        assert_eq!(parse_judge_score("model v1.2 is used"), None);
        // "1.2": 1 has decimal-next glue, 2 has decimal-prev glue.
    }

    #[test]
    fn judge_returns_score_and_raw() {
        let mock = MockLlmClient::new(vec!["Score: 4 - mostly relevant.".to_string()]);
        let set = PromptSet::builtin();
        let template = set.get(TemplateRole::Judge).unwrap();
        let out = llm_judge(
            &mock,
            "p1",
            "A paper about parsing.",
            "- Narrow domain only.",
            template,
            &GenerationParams::default(),
        )
        .unwrap();
        assert_eq!(out.score, 4);
        assert_eq!(out.raw_response, "Score: 4 - mostly relevant.");
        assert_eq!(out.paper_id, "p1");
    }

    #[test]
    fn judge_unparsable_reply_is_error_with_raw() {
        let mock = MockLlmClient::new(vec!["Excellent work, no score.".to_string()]);
        let set = PromptSet::builtin();
        let template = set.get(TemplateRole::Judge).unwrap();
        let err = llm_judge(
            &mock,
            "p1",
            "ctx",
            "items",
            template,
            &GenerationParams::default(),
        )
        .unwrap_err();
        match err {
            Error::JudgeParse { raw } => assert_eq!(raw, "Excellent work, no score."),
            other => panic!("expected JudgeParse, got {other}"),
        }
    }

    #[test]
    fn judge_rejects_empty_generated() {
        let mock = MockLlmClient::new(vec![]);
        let set = PromptSet::builtin();
        let template = set.get(TemplateRole::Judge).unwrap();
        assert!(matches!(
            llm_judge(&mock, "p1", "ctx", "  ", template, &GenerationParams::default()),
            Err(Error::EmptyText { .. })
        ));
    }
}
