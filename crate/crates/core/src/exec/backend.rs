use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ExecutionSpec;
use crate::ckg::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend failed: {0}")]
    Failed(String),
    #[error("unknown stub `{0}`")]
    UnknownStub(String),
    #[error("registry: {0}")]
    Registry(String),
}

pub struct Invocation<'a> {
    /// Task name with any domain prefix removed.
    pub action: &'a str,
    pub model: &'a NodeId,
    pub spec: &'a ExecutionSpec,
    pub args: &'a BTreeMap<String, String>,
}

pub trait Backend: Send + Sync {
    fn invoke(&self, inv: &Invocation<'_>) -> Result<String, BackendError>;
}

/// Canned transcript returned by the `asr` stub.
pub const STUB_TRANSCRIPT: &str = "We, the people of the United States, in order to form a more perfect union, \
establish justice, ensure domestic tranquility, provide for the common defense, promote the general welfare \
and secure the blessings of liberty to ourselves and our posterity, do ordain and establish this Constitution \
for the United States of America.";

/// Deterministic in-process transforms, selected by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubBackend {
    pub name: String,
}

impl StubBackend {
    pub fn new(name: impl Into<String>) -> Self {
        StubBackend { name: name.into() }
    }
}

/// Value of the first argument, in name order, that is not the model path.
fn primary_input(inv: &Invocation<'_>) -> String {
    let model_params: Vec<&str> = inv
        .spec
        .params
        .iter()
        .filter(|p| p.semantic_type == super::SemanticType::ModelPath)
        .map(|p| p.name.as_str())
        .collect();
    let typed = |t: super::SemanticType| {
        inv.spec.params.iter().find(|p| p.semantic_type == t).and_then(|p| inv.args.get(&p.name)).cloned()
    };
    typed(super::SemanticType::Text)
        .or_else(|| typed(super::SemanticType::AudioPath))
        .or_else(|| typed(super::SemanticType::ImagePath))
        .or_else(|| inv.args.iter().find(|(k, _)| !model_params.contains(&k.as_str())).map(|(_, v)| v.clone()))
        .unwrap_or_default()
}

fn short_hash(s: &str) -> String {
    crate::nlu::prompts::sha256_hex(s)[..12].to_string()
}

/// Maximal runs of capitalized words, allowing a lowercase `of` between
/// two capitalized words. The first word of a sentence is not counted.
pub fn capitalized_spans(text: &str) -> Vec<String> {
    let mut spans = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let mut pending_of = false;
    let mut sentence_start = true;
    let flush = |current: &mut Vec<&str>, spans: &mut Vec<String>| {
        if !current.is_empty() {
            spans.push(current.join(" "));
            current.clear();
        }
    };
    for raw in text.split_whitespace() {
        let word = raw.trim_matches(|c: char| !c.is_alphanumeric());
        let capital = word.chars().next().is_some_and(char::is_uppercase);
        if capital && !sentence_start {
            if pending_of {
                current.push("of");
                pending_of = false;
            }
            current.push(word);
        } else if word == "of" && !current.is_empty() && !pending_of {
            pending_of = true;
        } else {
            pending_of = false;
            flush(&mut current, &mut spans);
        }
        let ends_clause = raw.ends_with([',', '.', ';', ':', '!', '?']);
        if ends_clause {
            pending_of = false;
            flush(&mut current, &mut spans);
        }
        sentence_start = raw.ends_with(['.', '!', '?']);
    }
    flush(&mut current, &mut spans);
    spans
}

/// Multi-word spans are tagged `LOC`, single words `MISC`.
pub fn stub_entities(text: &str) -> String {
    let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for span in capitalized_spans(text) {
        let tag = if span.contains(' ') { "LOC" } else { "MISC" };
        let list = groups.entry(tag).or_default();
        if !list.contains(&span) {
            list.push(span);
        }
    }
    serde_json::to_string_pretty(&groups).expect("entities serialize")
}

impl Backend for StubBackend {
    fn invoke(&self, inv: &Invocation<'_>) -> Result<String, BackendError> {
        let input = primary_input(inv);
        match self.name.as_str() {
            "asr" => Ok(STUB_TRANSCRIPT.to_string()),
            "ner" => Ok(stub_entities(&input)),
            "echo" => Ok(input),
            "summarize" => Ok(input.split_inclusive(['.', '!', '?']).next().unwrap_or("").trim().to_string()),
            "classify" => {
                let cats: Vec<String> =
                    inv.args.iter().find_map(|(_, v)| serde_json::from_str::<Vec<String>>(v).ok()).unwrap_or_default();
                Ok(cats.first().cloned().unwrap_or_else(|| "Other".into()))
            }
            "tts" => Ok(format!("./out/speech_{}.wav", short_hash(&input))),
            "image" => Ok(format!("./out/image_{}.png", short_hash(&input))),
            "caption" => Ok(format!("a picture ({input})")),
            "answer" => Ok(format!("answer to {input}")),
            "generate" => Ok(format!("generated text about: {input}")),
            "fail" => Err(BackendError::Failed(format!("stub `fail` refused {}", inv.action))),
            other => Err(BackendError::UnknownStub(other.to_string())),
        }
    }
}

/// Runs a command template; `{param}` placeholders inside each
/// whitespace-separated word are replaced by bound arguments. No shell is
/// involved. Stdout, trimmed, is the artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubprocessBackend {
    pub template: String,
}

impl SubprocessBackend {
    pub fn render(&self, args: &BTreeMap<String, String>) -> Vec<String> {
        self.template
            .split_whitespace()
            .map(|w| {
                let mut w = w.to_string();
                for (k, v) in args {
                    w = w.replace(&format!("{{{k}}}"), v);
                }
                w
            })
            .collect()
    }
}

impl Backend for SubprocessBackend {
    fn invoke(&self, inv: &Invocation<'_>) -> Result<String, BackendError> {
        let argv = self.render(inv.args);
        let (prog, rest) = argv.split_first().ok_or_else(|| BackendError::Failed("empty command template".into()))?;
        let out = Command::new(prog).args(rest).output().map_err(|e| BackendError::Failed(format!("{prog}: {e}")))?;
        if !out.status.success() {
            return Err(BackendError::Failed(format!(
                "{prog} exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
    }
}

/// POSTs `{model, action, args}` and reads `{output}`.
pub struct RemoteBackend {
    pub url: String,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        RemoteBackend { url: url.into(), agent: ureq::AgentBuilder::new().timeout(timeout).build() }
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    model: String,
    action: &'a str,
    args: &'a BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct RemoteResponse {
    output: String,
}

impl Backend for RemoteBackend {
    fn invoke(&self, inv: &Invocation<'_>) -> Result<String, BackendError> {
        let body = RemoteRequest { model: inv.model.local_name.clone(), action: inv.action, args: inv.args };
        self.agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| BackendError::Failed(e.to_string()))?
            .into_json::<RemoteResponse>()
            .map(|r| r.output)
            .map_err(|e| BackendError::Failed(e.to_string()))
    }
}

/// One registry entry as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum BackendConfig {
    Stub { stub: String },
    Subprocess { template: String },
    Remote { url: String },
}

/// Backends per model id, loaded from a JSON object.
#[derive(Default)]
pub struct BackendRegistry {
    entries: BTreeMap<String, (BackendConfig, Box<dyn Backend>)>,
}

impl BackendRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, model_id: impl Into<String>, cfg: BackendConfig) {
        let backend: Box<dyn Backend> = match &cfg {
            BackendConfig::Stub { stub } => Box::new(StubBackend::new(stub.clone())),
            BackendConfig::Subprocess { template } => Box::new(SubprocessBackend { template: template.clone() }),
            BackendConfig::Remote { url } => Box::new(RemoteBackend::new(url.clone(), Duration::from_secs(60))),
        };
        self.entries.insert(model_id.into(), (cfg, backend));
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let raw: BTreeMap<String, BackendConfig> =
            serde_json::from_str(text).map_err(|e| BackendError::Registry(e.to_string()))?;
        let mut r = BackendRegistry::new();
        for (k, v) in raw {
            r.register(k, v);
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| BackendError::Registry(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn config(&self, model_id: &str) -> Option<&BackendConfig> {
        self.entries.get(model_id).map(|(c, _)| c)
    }

    /// Backend of the selected model, else of the model the spec came from.
    pub fn lookup(&self, selected: &NodeId, spec_source: &NodeId) -> Option<&dyn Backend> {
        self.entries
            .get(&selected.local_name)
            .or_else(|| self.entries.get(&spec_source.local_name))
            .map(|(_, b)| b.as_ref())
    }
}
