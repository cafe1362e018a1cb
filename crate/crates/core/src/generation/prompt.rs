//! Prompt templates with named slots and a token-budget truncation policy.
//!
//! A slot marker is `{name}` where `name` is one of the known slots. Slot
//! values are substituted in one pass and never rescanned, so braces inside
//! slot content cannot inject further substitutions. When a context limit
//! applies, only `{paper}` and `{passage}` content is head-truncated at word
//! boundaries; instruction text and the other slots are never cut.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::chunker::Tokenizer;
use crate::error::{Error, Result};

pub const KNOWN_SLOTS: &[&str] = &["paper", "summary", "passage", "candidates"];

/// Slots whose content may be head-truncated to fit a context limit.
const TRUNCATABLE_SLOTS: &[&str] = &["paper", "passage"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TemplateRole {
    FullPaper,
    Dpr,
    Summary,
    Refinement,
    Continuous,
    Judge,
}

impl TemplateRole {
    pub fn all() -> [TemplateRole; 6] {
        [
            TemplateRole::FullPaper,
            TemplateRole::Dpr,
            TemplateRole::Summary,
            TemplateRole::Refinement,
            TemplateRole::Continuous,
            TemplateRole::Judge,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            TemplateRole::FullPaper => "full_paper",
            TemplateRole::Dpr => "dpr",
            TemplateRole::Summary => "summary",
            TemplateRole::Refinement => "refinement",
            TemplateRole::Continuous => "continuous",
            TemplateRole::Judge => "judge",
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.txt", self.name())
    }

    fn required_slots(&self) -> &'static [&'static str] {
        match self {
            TemplateRole::FullPaper => &["paper"],
            TemplateRole::Dpr => &["passage"],
            TemplateRole::Summary => &["paper"],
            TemplateRole::Refinement => &["candidates"],
            TemplateRole::Continuous => &["passage", "candidates"],
            TemplateRole::Judge => &["candidates"],
        }
    }

    fn builtin_body(&self) -> &'static str {
        match self {
            TemplateRole::FullPaper => include_str!("../../prompts/full_paper.txt"),
            TemplateRole::Dpr => include_str!("../../prompts/dpr.txt"),
            TemplateRole::Summary => include_str!("../../prompts/summary.txt"),
            TemplateRole::Refinement => include_str!("../../prompts/refinement.txt"),
            TemplateRole::Continuous => include_str!("../../prompts/continuous.txt"),
            TemplateRole::Judge => include_str!("../../prompts/judge.txt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Literal(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    required: BTreeSet<String>,
    segments: Vec<Segment>,
}

/// Scan for slot markers. Anything brace-delimited that looks like a slot
/// name (lowercase letters and underscores) must be a known slot; other
/// braced text passes through as literal prose.
fn scan_segments(name: &str, body: &str) -> Result<Vec<Segment>> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let bytes = body.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(rel) = body[i + 1..].find('}') {
                let inner = &body[i + 1..i + 1 + rel];
                let slot_like = !inner.is_empty()
                    && inner.len() <= 32
                    && inner.chars().all(|c| c.is_ascii_lowercase() || c == '_');
                if slot_like {
                    if !KNOWN_SLOTS.contains(&inner) {
                        return Err(Error::UnknownSlot {
                            template: name.to_string(),
                            slot: inner.to_string(),
                        });
                    }
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Slot(inner.to_string()));
                    i += inner.len() + 2;
                    continue;
                }
            }
        }
        let ch = body[i..].chars().next().expect("in-bounds char");
        literal.push(ch);
        i += ch.len_utf8();
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    Ok(segments)
}

impl PromptTemplate {
    /// Parse and validate a template body. Every required slot must appear
    /// as a marker; unknown slot-like markers are rejected.
    pub fn new(name: impl Into<String>, body: impl Into<String>, required: &[&str]) -> Result<Self> {
        let name = name.into();
        let body = body.into();
        let segments = scan_segments(&name, &body)?;
        let present: BTreeSet<&str> = segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(n) => Some(n.as_str()),
                Segment::Literal(_) => None,
            })
            .collect();
        for req in required {
            if !present.contains(req) {
                return Err(Error::MissingSlot {
                    template: name,
                    slot: req.to_string(),
                });
            }
        }
        Ok(PromptTemplate {
            name,
            body,
            required: required.iter().map(|s| s.to_string()).collect(),
            segments,
        })
    }

    pub fn for_role(role: TemplateRole, body: impl Into<String>) -> Result<Self> {
        PromptTemplate::new(role.name(), body, role.required_slots())
    }

    fn check_required(&self, slots: &BTreeMap<String, String>) -> Result<()> {
        for req in &self.required {
            if !slots.contains_key(req) {
                return Err(Error::MissingSlot {
                    template: self.name.clone(),
                    slot: req.clone(),
                });
            }
        }
        Ok(())
    }

    fn render_segments(&self, value_of: impl Fn(&str) -> String) -> String {
        let mut out = String::with_capacity(self.body.len());
        for seg in &self.segments {
            match seg {
                Segment::Literal(text) => out.push_str(text),
                Segment::Slot(name) => out.push_str(&value_of(name)),
            }
        }
        out
    }

    /// Substitute slot values. Required slots must be present as keys;
    /// absent optional slots render as empty.
    pub fn render(&self, slots: &BTreeMap<String, String>) -> Result<String> {
        self.check_required(slots)?;
        Ok(self.render_segments(|name| slots.get(name).cloned().unwrap_or_default()))
    }

    /// Render under an optional context limit. When over budget, `{paper}`
    /// and `{passage}` values are head-truncated at word boundaries until
    /// the prompt fits; an error reports prompts whose fixed parts alone
    /// exceed the limit.
    pub fn render_with_budget(
        &self,
        slots: &BTreeMap<String, String>,
        tok: &dyn Tokenizer,
        limit: Option<usize>,
    ) -> Result<RenderedPrompt> {
        self.check_required(slots)?;
        let Some(limit) = limit else {
            return Ok(RenderedPrompt {
                text: self.render(slots)?,
                truncated: false,
            });
        };

        let full = self.render(slots)?;
        if tok.count_tokens(&full) <= limit {
            return Ok(RenderedPrompt {
                text: full,
                truncated: false,
            });
        }

        // Fixed cost: instruction text plus every non-truncatable slot.
        let fixed = self.render_segments(|name| {
            if TRUNCATABLE_SLOTS.contains(&name) {
                String::new()
            } else {
                slots.get(name).cloned().unwrap_or_default()
            }
        });
        let fixed_tokens = tok.count_tokens(&fixed);
        if fixed_tokens > limit {
            return Err(Error::PromptTooLong {
                instruction_tokens: fixed_tokens,
                limit,
            });
        }

        let counts: BTreeMap<&str, usize> = TRUNCATABLE_SLOTS
            .iter()
            .map(|&name| {
                let v = slots.get(name).map(String::as_str).unwrap_or("");
                (name, tok.count_tokens(v))
            })
            .collect();
        let total_trunc: usize = counts.values().sum();
        let mut budget = limit - fixed_tokens;

        // Token counts are not exactly additive across concatenation, so
        // shrink until the rendered whole fits. With whitespace-separated
        // slots this resolves in one pass.
        for _ in 0..8 {
            let mut remaining = budget;
            let mut values: BTreeMap<&str, String> = BTreeMap::new();
            for &name in TRUNCATABLE_SLOTS {
                let count = counts[&name];
                let share = (budget * count).checked_div(total_trunc).unwrap_or(0);
                let allow = share.min(remaining).min(count);
                let v = slots.get(name).map(String::as_str).unwrap_or("");
                let cut = head_tokens(v, allow, tok);
                remaining -= tok.count_tokens(&cut).min(remaining);
                values.insert(name, cut);
            }
            let text = self.render_segments(|name| {
                values
                    .get(name)
                    .cloned()
                    .unwrap_or_else(|| slots.get(name).cloned().unwrap_or_default())
            });
            if tok.count_tokens(&text) <= limit {
                return Ok(RenderedPrompt {
                    text,
                    truncated: true,
                });
            }
            if budget == 0 {
                break;
            }
            budget = budget.saturating_sub((budget / 4).max(1));
        }
        Err(Error::PromptTooLong {
            instruction_tokens: fixed_tokens,
            limit,
        })
    }
}

/// Longest whitespace-word prefix of `text` within `max_tokens`.
fn head_tokens(text: &str, max_tokens: usize, tok: &dyn Tokenizer) -> String {
    if max_tokens == 0 {
        return String::new();
    }
    if tok.count_tokens(text) <= max_tokens {
        return text.to_string();
    }
    let mut out = String::new();
    for word in text.split_whitespace() {
        let candidate = if out.is_empty() {
            word.to_string()
        } else {
            format!("{out} {word}")
        };
        if tok.count_tokens(&candidate) > max_tokens {
            break;
        }
        out = candidate;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPrompt {
    pub text: String,
    pub truncated: bool,
}

/// The six template roles, loaded from a directory or from the built-in
/// defaults compiled into the crate.
#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<TemplateRole, PromptTemplate>,
}

impl PromptSet {
    pub fn builtin() -> PromptSet {
        let templates = TemplateRole::all()
            .into_iter()
            .map(|role| {
                let t = PromptTemplate::for_role(role, role.builtin_body())
                    .expect("built-in templates are valid");
                (role, t)
            })
            .collect();
        PromptSet { templates }
    }

    /// Load whichever role files exist in `dir`; templates present must
    /// validate. Roles without a file fall back at `get` time only if
    /// merged over `builtin` by the caller.
    pub fn load_dir(dir: &Path) -> Result<PromptSet> {
        let mut templates = BTreeMap::new();
        for role in TemplateRole::all() {
            let path = dir.join(role.file_name());
            if !path.exists() {
                continue;
            }
            let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            templates.insert(role, PromptTemplate::for_role(role, body)?);
        }
        Ok(PromptSet { templates })
    }

    /// Directory templates where present, built-in bodies elsewhere.
    pub fn load_dir_with_fallback(dir: &Path) -> Result<PromptSet> {
        let mut set = PromptSet::builtin();
        for (role, t) in PromptSet::load_dir(dir)?.templates {
            set.templates.insert(role, t);
        }
        Ok(set)
    }

    pub fn get(&self, role: TemplateRole) -> Result<&PromptTemplate> {
        self.templates
            .get(&role)
            .ok_or_else(|| Error::MissingTemplate(role.name().to_string(), role.file_name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunker::DefaultTokenizer;

    fn slots(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn render_substitutes_all_markers() {
        let t = PromptTemplate::new("t", "Read {paper} and {summary}.", &["paper"]).unwrap();
        let out = t
            .render(&slots(&[("paper", "BODY"), ("summary", "SUM")]))
            .unwrap();
        assert_eq!(out, "Read BODY and SUM.");
    }

    #[test]
    fn render_missing_required_slot_names_it() {
        let t = PromptTemplate::new("t", "Read {paper}.", &["paper"]).unwrap();
        match t.render(&slots(&[])) {
            Err(Error::MissingSlot { slot, .. }) => assert_eq!(slot, "paper"),
            other => panic!("expected MissingSlot, got {other:?}"),
        }
    }

    #[test]
    fn render_absent_optional_slot_is_empty() {
        let t = PromptTemplate::new("t", "A{summary}B", &[]).unwrap();
        assert_eq!(t.render(&slots(&[])).unwrap(), "AB");
    }

    #[test]
    fn unknown_slot_rejected_at_load() {
        match PromptTemplate::new("t", "Use {pasage} here.", &[]) {
            Err(Error::UnknownSlot { slot, .. }) => assert_eq!(slot, "pasage"),
            other => panic!("expected UnknownSlot, got {other:?}"),
        }
    }

    #[test]
    fn required_marker_must_appear_in_body() {
        assert!(matches!(
            PromptTemplate::new("t", "No markers here.", &["paper"]),
            Err(Error::MissingSlot { .. })
        ));
    }

    #[test]
    fn braced_prose_is_literal() {
        let t = PromptTemplate::new("t", "Return {\"score\": N} for {candidates}.", &[]).unwrap();
        let out = t.render(&slots(&[("candidates", "X")])).unwrap();
        assert_eq!(out, "Return {\"score\": N} for X.");
    }

    #[test]
    fn slot_values_are_not_rescanned() {
        let t = PromptTemplate::new("t", "P: {passage}", &["passage"]).unwrap();
        let out = t.render(&slots(&[("passage", "evil {paper} text")])).unwrap();
        assert_eq!(out, "P: evil {paper} text");
    }

    #[test]
    fn same_slot_can_repeat() {
        let t = PromptTemplate::new("t", "{summary} ... {summary}", &[]).unwrap();
        let out = t.render(&slots(&[("summary", "S")])).unwrap();
        assert_eq!(out, "S ... S");
    }

    #[test]
    fn budget_no_limit_never_truncates() {
        let t = PromptTemplate::new("t", "Read:\n{paper}\nGo.", &["paper"]).unwrap();
        let long = "word ".repeat(500);
        let out = t
            .render_with_budget(&slots(&[("paper", &long)]), &DefaultTokenizer, None)
            .unwrap();
        assert!(!out.truncated);
    }

    #[test]
    fn budget_truncates_paper_head_only() {
        let t = PromptTemplate::new("t", "Read this paper:\n{paper}\nList limitations:", &["paper"]).unwrap();
        let words: Vec<String> = (0..100).map(|i| format!("w{i}")).collect();
        let paper = words.join(" ");
        let out = t
            .render_with_budget(&slots(&[("paper", &paper)]), &DefaultTokenizer, Some(40))
            .unwrap();
        assert!(out.truncated);
        let tok = DefaultTokenizer;
        assert!(tok.count_tokens(&out.text) <= 40);
        // Instructions survive in full.
        assert!(out.text.starts_with("Read this paper:\n"));
        assert!(out.text.ends_with("\nList limitations:"));
        // Head truncation keeps the earliest words.
        assert!(out.text.contains("w0 w1 w2"));
        assert!(!out.text.contains("w99"));
    }

    #[test]
    fn budget_never_cuts_untruncatable_slots() {
        let t = PromptTemplate::new(
            "t",
            "Summary: {summary}\nPassage: {passage}\nGo.",
            &["passage"],
        )
        .unwrap();
        let summary = "s ".repeat(10).trim().to_string();
        let passage = "p ".repeat(200).trim().to_string();
        let out = t
            .render_with_budget(
                &slots(&[("summary", &summary), ("passage", &passage)]),
                &DefaultTokenizer,
                Some(50),
            )
            .unwrap();
        assert!(out.truncated);
        assert!(out.text.contains(&summary));
    }

    #[test]
    fn budget_errors_when_fixed_parts_exceed_limit() {
        let t = PromptTemplate::new("t", "Candidates: {candidates}\nRefine.", &["candidates"]).unwrap();
        let huge = "c ".repeat(300).trim().to_string();
        assert!(matches!(
            t.render_with_budget(&slots(&[("candidates", &huge)]), &DefaultTokenizer, Some(20)),
            Err(Error::PromptTooLong { .. })
        ));
    }

    #[test]
    fn budget_fitting_prompt_is_untouched() {
        let t = PromptTemplate::new("t", "Read {paper} now.", &["paper"]).unwrap();
        let out = t
            .render_with_budget(&slots(&[("paper", "short text")]), &DefaultTokenizer, Some(50))
            .unwrap();
        assert_eq!(out.text, "Read short text now.");
        assert!(!out.truncated);
    }

    #[test]
    fn builtin_set_has_all_roles() {
        let set = PromptSet::builtin();
        for role in TemplateRole::all() {
            let t = set.get(role).unwrap();
            assert!(!t.body.is_empty());
        }
    }

    #[test]
    fn builtin_full_paper_ends_with_cue() {
        let set = PromptSet::builtin();
        let t = set.get(TemplateRole::FullPaper).unwrap();
        assert!(t.body.trim_end().ends_with("Limitations:"));
    }

    #[test]
    fn load_dir_overrides_builtin() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("summary.txt"), "Custom {paper} summary.").unwrap();
        let set = PromptSet::load_dir_with_fallback(dir.path()).unwrap();
        assert_eq!(set.get(TemplateRole::Summary).unwrap().body, "Custom {paper} summary.");
        // Other roles still resolve.
        assert!(set.get(TemplateRole::Judge).is_ok());
    }

    #[test]
    fn load_dir_rejects_bad_template() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("dpr.txt"), "No passage slot at all.").unwrap();
        assert!(PromptSet::load_dir(dir.path()).is_err());
    }
}
