//! Builds graph content from local model cards and benchmark records, and
//! grows the task taxonomy.

pub mod taxonomy;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ckg::{BenchmarkResult, CapabilityGraph, Direction, EdgeKind, GraphError, NodeId, NodeKind, Object, Triple};
use crate::exec::{BackendKind, ExecutionSpec, SemanticType, SpecParam, SpecStore};
use crate::nlu::prompts::USAGE_SNIPPET_EXTRACTION;
use crate::nlu::{GenerationParams, ProviderError, TextCompletion};

pub use taxonomy::{
    build_taxonomy, build_taxonomy_traced, flatten_taxonomy, Taxonomy, TaxonomyAction, TaxonomyDecision, TaxonomyNode,
};

pub const DEFAULT_KEYWORDS: [&str; 6] = ["usage", "how to use", "example", "inference", "pipeline", "quickstart"];
pub const SPEC_REPAIR_SUFFIX: &str = "\nReturn only fenced code.";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{source_name}: {message}")]
    Card { source_name: String, message: String },
    #[error("pwc line {line}: {message}")]
    Pwc { line: usize, message: String },
    #[error("spec parse error: {0}")]
    SpecParse(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelCard {
    pub model_id: String,
    pub markdown: String,
    pub declared_tasks: Vec<String>,
    pub license: Option<String>,
    pub size_bytes: Option<u64>,
    pub arxiv_ids: Vec<String>,
}

pub fn is_arxiv_id(s: &str) -> bool {
    match s.split_once('.') {
        Some((a, b)) => {
            a.len() >= 4
                && (4..=5).contains(&b.len())
                && a.bytes().all(|c| c.is_ascii_digit())
                && b.bytes().all(|c| c.is_ascii_digit())
        }
        None => false,
    }
}

fn parse_list(v: &str) -> Vec<String> {
    v.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(|s| s.trim().trim_matches(|c| c == '"' || c == '\'').to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

impl ModelCard {
    /// Parses a card: a `---` delimited header of `key: value` lines
    /// (`model_id`, `license`, `size_bytes`, `tasks`, `arxiv_ids`; lists in
    /// brackets) followed by the markdown body.
    pub fn parse(text: &str, source_name: &str) -> Result<Self, IngestError> {
        let err = |m: String| IngestError::Card { source_name: source_name.to_string(), message: m };
        let rest = text.strip_prefix("---").ok_or_else(|| err("missing front-matter header".into()))?;
        let (header, body) = rest.split_once("\n---").ok_or_else(|| err("unterminated front-matter header".into()))?;
        let body = body.strip_prefix('\n').or_else(|| body.strip_prefix("\r\n")).unwrap_or(body);
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        for line in header.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once(':').ok_or_else(|| err(format!("header line without `:`: {line}")))?;
            fields.insert(k.trim().to_string(), v.trim().trim_matches('"').to_string());
        }
        let model_id =
            fields.remove("model_id").filter(|s| !s.is_empty()).ok_or_else(|| err("missing model_id".into()))?;
        let size_bytes = match fields.remove("size_bytes") {
            Some(s) if !s.is_empty() => {
                Some(s.replace('_', "").parse::<u64>().map_err(|e| err(format!("size_bytes: {e}")))?)
            }
            _ => None,
        };
        let arxiv_ids = fields.remove("arxiv_ids").map(|v| parse_list(&v)).unwrap_or_default();
        if let Some(bad) = arxiv_ids.iter().find(|a| !is_arxiv_id(a)) {
            return Err(err(format!("malformed arxiv id `{bad}`")));
        }
        let card = ModelCard {
            model_id,
            markdown: body.to_string(),
            declared_tasks: fields.remove("tasks").map(|v| parse_list(&v)).unwrap_or_default(),
            license: fields.remove("license").filter(|s| !s.is_empty()),
            size_bytes,
            arxiv_ids,
        };
        if let Some(k) = fields.keys().next() {
            return Err(err(format!("unknown header key `{k}`")));
        }
        Ok(card)
    }
}

/// Cards in `dir` (files ending in `.md`), in file-name order.
pub fn load_cards(dir: &Path) -> Result<Vec<ModelCard>, IngestError> {
    let io = |e: std::io::Error| IngestError::Io { path: dir.display().to_string(), message: e.to_string() };
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "md"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(io)?;
            ModelCard::parse(&text, &p.display().to_string())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeBlock {
    pub language_hint: Option<String>,
    pub text: String,
    /// Byte offset of `text` within the card markdown.
    pub source_offset: usize,
}

/// Fenced blocks whose body or three preceding lines mention a keyword.
pub fn extract_code_blocks(card: &ModelCard, keywords: &[&str]) -> Vec<CodeBlock> {
    let md = &card.markdown;
    let keywords: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    let mentions = |s: &str| {
        let l = s.to_lowercase();
        keywords.iter().any(|k| l.contains(k.as_str()))
    };
    // (byte offset, line) pairs.
    let mut lines = Vec::new();
    let mut off = 0;
    for l in md.split_inclusive('\n') {
        lines.push((off, l));
        off += l.len();
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let (_, line) = lines[i];
        let Some(hint) = line.trim_start().strip_prefix("```") else {
            i += 1;
            continue;
        };
        let hint = hint.trim();
        let Some(close) = (i + 1..lines.len()).find(|&j| lines[j].1.trim_start().starts_with("```")) else {
            break;
        };
        if close > i + 1 {
            let start = lines[i + 1].0;
            let end = lines[close].0;
            let text = &md[start..end];
            let before: String = lines[i.saturating_sub(3)..i].iter().map(|(_, l)| *l).collect();
            if !text.trim().is_empty() && (mentions(&before) || mentions(text)) {
                out.push(CodeBlock {
                    language_hint: (!hint.is_empty()).then(|| hint.to_string()),
                    text: text.to_string(),
                    source_offset: start,
                });
            }
        }
        i = close + 1;
    }
    out
}

/// Body of the first fenced block in a reply.
fn fenced_code(reply: &str) -> Option<&str> {
    let start = reply.find("```")?;
    let after = &reply[start + 3..];
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let end = body.find("```")?;
    Some(&body[..end])
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut start = 0;
    let mut prev = '\0';
    for (i, c) in s.char_indices() {
        match quote {
            Some(q) if c == q && prev != '\\' => quote = None,
            Some(_) => {}
            None => match c {
                '\'' | '"' => quote = Some(c),
                '(' | '[' | '{' => depth += 1,
                ')' | ']' | '}' => depth -= 1,
                ',' if depth == 0 => {
                    parts.push(&s[start..i]);
                    start = i + 1;
                }
                _ => {}
            },
        }
        prev = c;
    }
    parts.push(&s[start..]);
    parts.into_iter().map(str::trim).filter(|p| !p.is_empty()).collect()
}

fn unquote(v: &str) -> String {
    let v = v.trim();
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return v[1..v.len() - 1].to_string();
        }
    }
    v.to_string()
}

/// Parameters of the first `def` in `code`. Every parameter must carry a
/// default; `*args`, `**kwargs` and bare `*` / `/` markers are skipped.
pub fn parse_signature(code: &str) -> Result<Vec<SpecParam>, IngestError> {
    let def = code.find("def ").ok_or_else(|| IngestError::SpecParse("no function definition".into()))?;
    let open = def + code[def..].find('(').ok_or_else(|| IngestError::SpecParse("no parameter list".into()))?;
    let mut depth = 0;
    let mut close = None;
    for (i, c) in code[open..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    close = Some(open + i);
                    break;
                }
            }
            _ => {}
        }
    }
    let close = close.ok_or_else(|| IngestError::SpecParse("unbalanced parameter list".into()))?;
    let mut params = Vec::new();
    for p in split_top_level(&code[open + 1..close]) {
        if p.starts_with('*') || p == "/" || p == "self" {
            continue;
        }
        let (head, default) = match p.split_once('=') {
            Some((h, d)) => (h, Some(unquote(d))),
            None => (p, None),
        };
        let name = head.split(':').next().unwrap_or(head).trim().to_string();
        let default = default.ok_or_else(|| IngestError::SpecParse(format!("parameter `{name}` has no default")))?;
        params.push(SpecParam { semantic_type: SemanticType::infer(&name), name, default: Some(default) });
    }
    Ok(params)
}

fn spec_from_reply(model_id: &str, reply: &str) -> Result<ExecutionSpec, IngestError> {
    let code = fenced_code(reply).ok_or_else(|| IngestError::SpecParse("no fenced code in reply".into()))?;
    let params = parse_signature(code)?;
    Ok(ExecutionSpec {
        model_id: NodeId::new(NodeKind::Model, model_id)?,
        params,
        snippet: code.to_string(),
        backend: BackendKind::Stub,
    })
}

/// Asks the provider to turn the blocks into one defaulted function, with
/// one repair retry.
pub fn synthesize_execution_spec(
    model_id: &str,
    blocks: &[CodeBlock],
    provider: &dyn TextCompletion,
    params: &GenerationParams,
) -> Result<ExecutionSpec, IngestError> {
    assert!(!blocks.is_empty(), "no code blocks to synthesize from");
    let code = blocks.iter().map(|b| b.text.as_str()).collect::<Vec<_>>().join("\n");
    let prompt = USAGE_SNIPPET_EXTRACTION.fill(&[("code", &code)]);
    match spec_from_reply(model_id, &provider.complete(&prompt, params)?) {
        Ok(s) => Ok(s),
        Err(IngestError::SpecParse(_)) => {
            spec_from_reply(model_id, &provider.complete(&format!("{prompt}{SPEC_REPAIR_SUFFIX}"), params)?)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwcRecord {
    pub arxiv_id: String,
    pub model_variant: String,
    pub benchmark: String,
    pub metric: String,
    pub value: f64,
}

pub fn load_pwc(text: &str) -> Result<Vec<PwcRecord>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let r: PwcRecord =
            serde_json::from_str(t).map_err(|e| IngestError::Pwc { line: i + 1, message: e.to_string() })?;
        if !r.value.is_finite() {
            return Err(IngestError::Pwc { line: i + 1, message: "value is not finite".into() });
        }
        out.push(r);
    }
    Ok(out)
}

fn normalize_id(s: &str) -> String {
    s.chars().filter(char::is_ascii_alphanumeric).collect::<String>().to_lowercase()
}

/// True when `variant` names the model: it equals the final path segment
/// of `model_id`, ignoring case and non-alphanumerics.
pub fn variant_matches(variant: &str, model_id: &str) -> bool {
    let last = model_id.rsplit('/').next().unwrap_or(model_id);
    let v = normalize_id(variant);
    !v.is_empty() && v == normalize_id(last)
}

pub fn align_benchmarks(card: &ModelCard, records: &[PwcRecord]) -> Vec<BenchmarkResult> {
    records
        .iter()
        .filter(|r| card.arxiv_ids.contains(&r.arxiv_id) && variant_matches(&r.model_variant, &card.model_id))
        .map(|r| BenchmarkResult {
            benchmark: r.benchmark.clone(),
            metric: r.metric.clone(),
            value: r.value,
            direction: Direction::for_metric(&r.metric),
        })
        .collect()
}

/// Triples describing one card: tasks, license, size, results and, when a
/// spec exists, the snippet link.
pub fn card_triples(
    card: &ModelCard,
    results: &[BenchmarkResult],
    spec: Option<&ExecutionSpec>,
) -> Result<Vec<Triple>, IngestError> {
    let m = NodeId::new(NodeKind::Model, &card.model_id)?;
    let mut out = Vec::new();
    for t in &card.declared_tasks {
        out.push(Triple::node(m.clone(), EdgeKind::SupportsTask, NodeId::new(NodeKind::Task, t)?));
    }
    if let Some(l) = &card.license {
        out.push(Triple::node(m.clone(), EdgeKind::HasLicense, NodeId::new(NodeKind::License, l)?));
    }
    if let Some(s) = card.size_bytes {
        let v = i64::try_from(s).map_err(|_| IngestError::Card {
            source_name: card.model_id.clone(),
            message: "size_bytes too large".into(),
        })?;
        out.push(Triple::new(m.clone(), EdgeKind::HasSizeBytes, Object::Int(v)));
    }
    for r in results {
        let node = NodeId::new(NodeKind::Result, format!("{}#{}#{}", card.model_id, r.benchmark, r.metric))?;
        out.extend(r.reify(&m, node)?);
    }
    if let Some(s) = spec {
        out.push(Triple::node(m, EdgeKind::HasSnippet, s.snippet_node()));
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct IngestOutput {
    pub graph: CapabilityGraph,
    pub specs: SpecStore,
    pub warnings: Vec<String>,
}

/// Full card pipeline. Spec synthesis failures leave the model without a
/// snippet and are reported as warnings.
pub fn ingest_cards(
    cards: &[ModelCard],
    records: &[PwcRecord],
    provider: &dyn TextCompletion,
    params: &GenerationParams,
) -> Result<IngestOutput, IngestError> {
    let mut out = IngestOutput::default();
    for card in cards {
        let blocks = extract_code_blocks(card, &DEFAULT_KEYWORDS);
        let spec = if blocks.is_empty() {
            None
        } else {
            match synthesize_execution_spec(&card.model_id, &blocks, provider, params) {
                Ok(s) => Some(s),
                Err(e) => {
                    out.warnings.push(format!("{}: {e}", card.model_id));
                    None
                }
            }
        };
        let results = align_benchmarks(card, records);
        out.graph.extend(card_triples(card, &results, spec.as_ref())?)?;
        if let Some(s) = spec {
            out.specs.insert(s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlu::HeuristicProvider;

    const CARD: &str = "---
model_id: openai/whisper-large-v2
license: Apache-2.0
size_bytes: 6170000000
tasks: [automatic_speech_recognition]
arxiv_ids: [2212.04356]
---
# Whisper

Some prose.

```python
print('not shown')
```

## Usage

```python
from transformers import pipeline
asr = pipeline(\"automatic-speech-recognition\", model=\"openai/whisper-large-v2\")
result = asr(audio)
```
";

    fn card() -> ModelCard {
        ModelCard::parse(CARD, "whisper.md").unwrap()
    }

    #[test]
    fn front_matter() {
        let c = card();
        assert_eq!(c.model_id, "openai/whisper-large-v2");
        assert_eq!(c.size_bytes, Some(6_170_000_000));
        assert_eq!(c.declared_tasks, vec!["automatic_speech_recognition"]);
        assert!(c.markdown.starts_with("# Whisper"));
        assert!(ModelCard::parse("---\nlicense: MIT\n---\n", "x").is_err());
        assert!(ModelCard::parse("---\nmodel_id: a\narxiv_ids: [12.3]\n---\n", "x").is_err());
        assert!(ModelCard::parse("no header", "x").is_err());
    }

    #[test]
    fn keyword_blocks() {
        let c = card();
        let blocks = extract_code_blocks(&c, &["usage"]);
        assert_eq!(blocks.len(), 1);
        assert!(blocks[0].text.contains("pipeline("));
        assert_eq!(&c.markdown[blocks[0].source_offset..][..blocks[0].text.len()], blocks[0].text);
        assert_eq!(blocks[0].language_hint.as_deref(), Some("python"));

        let two = ModelCard { markdown: "```\nx = 1\n```\n\n```\ny = pipeline()\n```\n".into(), ..c.clone() };
        let b = extract_code_blocks(&two, &DEFAULT_KEYWORDS);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].text, "y = pipeline()\n");

        let none = ModelCard { markdown: "just prose, usage example inference".into(), ..c };
        assert!(extract_code_blocks(&none, &DEFAULT_KEYWORDS).is_empty());
    }

    struct Canned(&'static str);
    impl TextCompletion for Canned {
        fn complete(&self, _: &str, _: &GenerationParams) -> Result<String, ProviderError> {
            Ok(self.0.to_string())
        }
    }

    fn block() -> Vec<CodeBlock> {
        vec![CodeBlock { language_hint: None, text: "x".into(), source_offset: 0 }]
    }

    #[test]
    fn spec_from_stub_reply() {
        let p = GenerationParams::default();
        let s = synthesize_execution_spec(
            "m",
            &block(),
            &Canned("```python\ndef f(input=\"hello\", model_path='m'):\n    return 1\n```"),
            &p,
        )
        .unwrap();
        assert_eq!(s.params.len(), 2);
        assert_eq!(s.params[0].default.as_deref(), Some("hello"));
        assert_eq!(s.params[1].semantic_type, SemanticType::ModelPath);

        assert!(matches!(
            synthesize_execution_spec("m", &block(), &Canned("no code, sorry"), &p),
            Err(IngestError::SpecParse(_))
        ));
        assert!(matches!(
            synthesize_execution_spec("m", &block(), &Canned("```\ndef f(a, b=1):\n  pass\n```"), &p),
            Err(IngestError::SpecParse(_))
        ));
    }

    #[test]
    fn signature_edge_cases() {
        let ps = parse_signature("def run(text: str = \"a, b\", opts={'k': (1, 2)}, *args, **kw):").unwrap();
        assert_eq!(ps.iter().map(|p| p.name.as_str()).collect::<Vec<_>>(), vec!["text", "opts"]);
        assert_eq!(ps[0].default.as_deref(), Some("a, b"));
    }

    #[test]
    fn alignment_rule() {
        let rec = |a: &str, v: &str| PwcRecord {
            arxiv_id: a.into(),
            model_variant: v.into(),
            benchmark: "common-voice-en".into(),
            metric: "WER".into(),
            value: 9.0,
        };
        let c = card();
        let r = align_benchmarks(&c, &[rec("2212.04356", "whisper-large-v2")]);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].direction, Direction::LowerBetter);
        assert!(align_benchmarks(&c, &[rec("1810.04805", "whisper-large-v2")]).is_empty());
        assert!(align_benchmarks(&c, &[rec("2212.04356", "whisper-tiny")]).is_empty());
        assert!(variant_matches("Whisper_Large v2", "openai/whisper-large-v2"));
    }

    #[test]
    fn pwc_errors_carry_lines() {
        assert!(matches!(load_pwc("\n{\"arxiv_id\": 1}"), Err(IngestError::Pwc { line: 2, .. })));
    }

    #[test]
    fn offline_ingest_of_one_card() {
        let out = ingest_cards(&[card()], &[], &HeuristicProvider, &GenerationParams::default()).unwrap();
        let m = NodeId::model("openai/whisper-large-v2");
        let rec = out.graph.record(&m);
        assert_eq!(rec.license.as_deref(), Some("Apache-2.0"));
        let spec = out.specs.spec_for(&m, &out.graph).unwrap();
        assert!(spec.params.iter().any(|p| p.default.as_deref() == Some("openai/whisper-large-v2")));
        assert!(out.warnings.is_empty());
    }
}
