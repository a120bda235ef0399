//! Prompt templates shipped as text files with `{placeholder}` slots.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub text: &'static str,
    /// Slot names in order of appearance.
    pub slots: &'static [&'static str],
}

pub const USAGE_SNIPPET_EXTRACTION: PromptTemplate = PromptTemplate {
    name: "usage_snippet_extraction",
    text: include_str!("../../prompts/usage_snippet_extraction.txt"),
    slots: &["code"],
};

pub const PARSING: PromptTemplate =
    PromptTemplate { name: "parsing", text: include_str!("../../prompts/parsing.txt"), slots: &["USER_INPUT"] };

pub const DOMAIN_CLASSIFICATION: PromptTemplate = PromptTemplate {
    name: "domain_classification",
    text: include_str!("../../prompts/domain_classification.txt"),
    slots: &["domains", "query"],
};

pub const ACTION_SELECTION: PromptTemplate = PromptTemplate {
    name: "action_selection",
    text: include_str!("../../prompts/action_selection.txt"),
    slots: &["user_instruction", "actions"],
};

pub const ALL: [PromptTemplate; 4] = [USAGE_SNIPPET_EXTRACTION, PARSING, DOMAIN_CLASSIFICATION, ACTION_SELECTION];

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl PromptTemplate {
    pub fn checksum(&self) -> String {
        sha256_hex(self.text)
    }

    /// Replaces each `{slot}` with its value. Slots are filled in one pass
    /// over the template, so values containing `{...}` are left untouched.
    pub fn fill(&self, values: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(self.text.len());
        for segment in self.segments() {
            match segment {
                Segment::Literal(l) => out.push_str(l),
                Segment::Slot(s) => {
                    let v = values
                        .iter()
                        .find(|(k, _)| *k == s)
                        .unwrap_or_else(|| panic!("no value for prompt slot `{s}`"));
                    out.push_str(v.1);
                }
            }
        }
        out
    }

    fn segments(&self) -> Vec<Segment<'static>> {
        let mut segs = Vec::new();
        let mut rest = self.text;
        loop {
            let next = self
                .slots
                .iter()
                .filter_map(|s| rest.find(&format!("{{{s}}}")).map(|i| (i, *s)))
                .min_by_key(|(i, _)| *i);
            match next {
                Some((i, slot)) => {
                    segs.push(Segment::Literal(&rest[..i]));
                    segs.push(Segment::Slot(slot));
                    rest = &rest[i + slot.len() + 2..];
                }
                None => {
                    segs.push(Segment::Literal(rest));
                    return segs;
                }
            }
        }
    }

    /// Inverse of [`fill`](Self::fill): recovers slot values from a filled
    /// prompt, or `None` if the prompt was not produced from this template.
    /// The last literal is matched as a suffix; a prompt may carry extra
    /// text appended after it.
    pub fn extract(&self, filled: &str) -> Option<BTreeMap<String, String>> {
        let segs = self.segments();
        let mut out = BTreeMap::new();
        let mut pos = 0;
        let mut pending: Option<&str> = None;
        let last_literal = segs.iter().rposition(|s| matches!(s, Segment::Literal(_)));
        for (i, seg) in segs.iter().enumerate() {
            match seg {
                Segment::Literal(lit) => {
                    let found = if pending.is_none() {
                        filled[pos..].starts_with(lit).then_some(pos)
                    } else if Some(i) == last_literal {
                        filled[pos..].rfind(lit).map(|j| pos + j)
                    } else {
                        filled[pos..].find(lit).map(|j| pos + j)
                    }?;
                    if let Some(slot) = pending.take() {
                        out.insert(slot.to_string(), filled[pos..found].to_string());
                    }
                    pos = found + lit.len();
                }
                Segment::Slot(s) => pending = Some(s),
            }
        }
        if let Some(slot) = pending {
            out.insert(slot.to_string(), filled[pos..].to_string());
        }
        Some(out)
    }

    pub fn matches(&self, filled: &str) -> bool {
        self.extract(filled).is_some()
    }
}

enum Segment<'a> {
    Literal(&'a str),
    Slot(&'a str),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_and_extract_round_trip() {
        let p = DOMAIN_CLASSIFICATION.fill(&[("domains", "['audio', 'summarisation']"), ("query", "Summarise {this}")]);
        assert!(p.contains("Provided Query: Summarise {this}. 'The order matters'"));
        let slots = DOMAIN_CLASSIFICATION.extract(&p).unwrap();
        assert_eq!(slots["domains"], "['audio', 'summarisation']");
        assert_eq!(slots["query"], "Summarise {this}");
        assert!(PARSING.extract(&p).is_none());
    }

    #[test]
    fn extraction_tolerates_appended_repair_text() {
        let p = format!(
            "{}\nDo not generate anything other than a parsable JSON",
            PARSING.fill(&[("USER_INPUT", "Transcribe ./a.wav")])
        );
        assert_eq!(PARSING.extract(&p).unwrap()["USER_INPUT"], "Transcribe ./a.wav");
    }

    #[test]
    fn every_template_has_its_slots_once() {
        for t in ALL {
            for s in t.slots {
                assert_eq!(t.text.matches(&format!("{{{s}}}")).count(), 1, "{} {s}", t.name);
            }
        }
    }
}
