//! Plan execution: resolve each step's execution spec, bind its arguments
//! from the query and earlier outputs, and run it through a backend.

pub mod backend;
pub mod report;

use std::collections::BTreeMap;
use std::io::BufRead;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ckg::{CapabilityGraph, NodeId, NodeKind};
use crate::embed::TextEmbedder;
use crate::nlu::ParsedQuery;
use crate::pddl::{modality_for_path, DomainFile};
use crate::planner::Plan;
use crate::selection::SelectionResult;

pub use backend::{Backend, BackendConfig, BackendError, BackendRegistry, Invocation, StubBackend};
pub use report::{render_report, render_report_json, ExecutionTrace};

/// Cosine at or above which a parameter name may bind to a differently
/// named key.
pub const SIMILARITY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticType {
    Text,
    AudioPath,
    ImagePath,
    Table,
    Categories,
    Question,
    ModelPath,
    Other,
}

impl SemanticType {
    /// Guess from a parameter name, for specs synthesized from snippets.
    pub fn infer(name: &str) -> Self {
        let n = name.to_lowercase();
        let has = |xs: &[&str]| xs.iter().any(|x| n.contains(x));
        if has(&["model"]) {
            SemanticType::ModelPath
        } else if has(&["audio", "wav", "speech_file", "sound"]) {
            SemanticType::AudioPath
        } else if has(&["image", "img", "picture", "photo"]) {
            SemanticType::ImagePath
        } else if has(&["question", "query"]) {
            SemanticType::Question
        } else if has(&["categor", "label", "class"]) {
            SemanticType::Categories
        } else if has(&["table", "data"]) {
            SemanticType::Table
        } else if has(&["text", "input", "prompt", "context", "sentence", "content"]) {
            SemanticType::Text
        } else {
            SemanticType::Other
        }
    }

    /// Type of an artifact produced under a `;; produces:` tag.
    pub fn for_modality(modality: &str) -> Self {
        match modality {
            "text" => SemanticType::Text,
            "audio" => SemanticType::AudioPath,
            "image" => SemanticType::ImagePath,
            "table" => SemanticType::Table,
            _ => SemanticType::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Stub,
    Subprocess,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecParam {
    pub name: String,
    pub semantic_type: SemanticType,
    #[serde(default)]
    pub default: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionSpec {
    pub model_id: NodeId,
    pub params: Vec<SpecParam>,
    pub snippet: String,
    pub backend: BackendKind,
}

impl ExecutionSpec {
    /// Node under which the graph references this spec.
    pub fn snippet_node(&self) -> NodeId {
        snippet_node_for(&self.model_id)
    }
}

pub fn snippet_node_for(model: &NodeId) -> NodeId {
    NodeId::new(NodeKind::Snippet, model.local_name.clone()).expect("model names are non-empty")
}

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("parameter `{0}` could not be bound")]
    UnboundParameter(String),
    #[error("spec store line {line}: {message}")]
    SpecStore { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Execution specs keyed by snippet node, stored one JSON spec per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpecStore {
    specs: BTreeMap<NodeId, ExecutionSpec>,
}

impl SpecStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, spec: ExecutionSpec) {
        self.specs.insert(spec.snippet_node(), spec);
    }

    pub fn get(&self, snippet: &NodeId) -> Option<&ExecutionSpec> {
        self.specs.get(snippet)
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ExecutionSpec> {
        self.specs.values()
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self, ExecError> {
        let mut store = SpecStore::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let spec: ExecutionSpec =
                serde_json::from_str(t).map_err(|e| ExecError::SpecStore { line: i + 1, message: e.to_string() })?;
            store.insert(spec);
        }
        Ok(store)
    }

    pub fn to_jsonl(&self) -> String {
        self.specs.values().map(|s| serde_json::to_string(s).expect("spec serializes") + "\n").collect()
    }

    /// Spec of `model`, when the graph links it to a stored snippet.
    pub fn spec_for(&self, model: &NodeId, graph: &CapabilityGraph) -> Option<&ExecutionSpec> {
        graph.record(model).snippet.and_then(|s| self.specs.get(&s))
    }
}

/// Spec borrowed from the first same-task sibling (by name) that has one,
/// with model path defaults pointing at `model`.
pub fn fallback_spec(
    model: &NodeId,
    task: &NodeId,
    graph: &CapabilityGraph,
    store: &SpecStore,
) -> Option<ExecutionSpec> {
    let sibling = graph
        .models_for_task(task)
        .into_iter()
        .filter(|m| &m.model != model)
        .find_map(|m| m.snippet.and_then(|s| store.get(&s)))?;
    let mut spec = sibling.clone();
    for p in &mut spec.params {
        if p.semantic_type == SemanticType::ModelPath {
            p.default = Some(model.local_name.clone());
        }
    }
    Some(spec)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub semantic_type: SemanticType,
    pub value: String,
    /// Step that produced it; -1 for query inputs.
    pub producer_step: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blackboard {
    pub artifacts: BTreeMap<String, Artifact>,
}

pub const QUERY_PRODUCER: i64 = -1;

impl Blackboard {
    /// Seeds query inputs under their field names.
    pub fn from_query(pq: &ParsedQuery) -> Self {
        let mut bb = Blackboard::default();
        let mut put = |k: &str, t: SemanticType, v: String| {
            bb.artifacts.insert(k.to_string(), Artifact { semantic_type: t, value: v, producer_step: QUERY_PRODUCER });
        };
        if let Some(u) = &pq.url {
            let t = match modality_for_path(u) {
                "audio" => SemanticType::AudioPath,
                "image" => SemanticType::ImagePath,
                _ => SemanticType::Other,
            };
            put("url", t, u.clone());
        }
        if let Some(t) = &pq.input_text {
            put("input_text", SemanticType::Text, t.clone());
        }
        if let Some(q) = &pq.question {
            put("question", SemanticType::Question, q.clone());
        }
        if let Some(i) = &pq.instruction {
            put("instruction", SemanticType::Other, i.clone());
        }
        if !pq.data_dict.is_empty() {
            put("data_dict", SemanticType::Table, serde_json::to_string(&pq.data_dict).expect("map serializes"));
        }
        if !pq.categories.is_empty() {
            put(
                "categories",
                SemanticType::Categories,
                serde_json::to_string(&pq.categories).expect("list serializes"),
            );
        }
        bb
    }

    pub fn put(&mut self, key: String, artifact: Artifact) {
        let previous = self.artifacts.insert(key, artifact);
        debug_assert!(previous.is_none(), "artifact keys are unique");
    }

    /// Artifacts step `step` is allowed to read.
    pub fn visible(&self, step: i64) -> impl Iterator<Item = (&String, &Artifact)> {
        self.artifacts.iter().filter(move |(_, a)| a.producer_step == QUERY_PRODUCER || a.producer_step < step)
    }

    /// Most recent visible artifact of type `t`; ties go to the first key.
    fn latest(&self, step: i64, t: SemanticType, outputs_only: bool) -> Option<(&String, &Artifact)> {
        self.visible(step).filter(|(_, a)| a.semantic_type == t && (!outputs_only || a.producer_step >= 0)).fold(
            None,
            |best: Option<(&String, &Artifact)>, cur| match best {
                Some(b) if b.1.producer_step >= cur.1.producer_step => Some(b),
                _ => Some(cur),
            },
        )
    }

    /// The last artifact written by a step.
    pub fn final_output(&self) -> Option<(&String, &Artifact)> {
        self.artifacts.iter().filter(|(_, a)| a.producer_step >= 0).max_by_key(|(_, a)| a.producer_step)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundArg {
    pub value: String,
    /// Which rule bound it: `name`, `type`, `similar`, or `default`,
    /// followed by the key it came from.
    pub source: String,
}

/// Binds every spec parameter. Per parameter the first rule that matches
/// wins: exact key name, semantic type, name similarity, spec default.
pub fn map_arguments(
    spec: &ExecutionSpec,
    bb: &Blackboard,
    step: i64,
    embedder: &dyn TextEmbedder,
) -> Result<BTreeMap<String, BoundArg>, ExecError> {
    let mut out = BTreeMap::new();
    for p in &spec.params {
        let bound = by_name(p, bb, step)
            .or_else(|| by_type(p, bb, step))
            .or_else(|| by_similarity(p, bb, step, embedder))
            .or_else(|| p.default.clone().map(|v| BoundArg { value: v, source: "default".into() }))
            .ok_or_else(|| ExecError::UnboundParameter(p.name.clone()))?;
        out.insert(p.name.clone(), bound);
    }
    Ok(out)
}

fn by_name(p: &SpecParam, bb: &Blackboard, step: i64) -> Option<BoundArg> {
    bb.visible(step)
        .find(|(k, _)| **k == p.name)
        .map(|(k, a)| BoundArg { value: a.value.clone(), source: format!("name:{k}") })
}

fn by_type(p: &SpecParam, bb: &Blackboard, step: i64) -> Option<BoundArg> {
    let hit = |(k, a): (&String, &Artifact)| BoundArg { value: a.value.clone(), source: format!("type:{k}") };
    let key = |name: &str| bb.visible(step).find(|(k, _)| *k == name);
    match p.semantic_type {
        SemanticType::AudioPath | SemanticType::ImagePath | SemanticType::Table => {
            bb.latest(step, p.semantic_type, false).map(hit)
        }
        SemanticType::Text => bb
            .latest(step, SemanticType::Text, true)
            .or_else(|| key("input_text"))
            .or_else(|| key("instruction"))
            .map(hit),
        SemanticType::Question => key("question").map(hit),
        SemanticType::Categories => key("categories").map(hit),
        SemanticType::ModelPath | SemanticType::Other => None,
    }
}

fn by_similarity(p: &SpecParam, bb: &Blackboard, step: i64, embedder: &dyn TextEmbedder) -> Option<BoundArg> {
    let mut best: Option<(f64, &String, &Artifact)> = None;
    for (k, a) in bb.visible(step) {
        let s = embedder.similarity(&p.name, k).ok()?;
        if s >= SIMILARITY_THRESHOLD && best.is_none_or(|(b, _, _)| s > b) {
            best = Some((s, k, a));
        }
    }
    best.map(|(_, k, a)| BoundArg { value: a.value.clone(), source: format!("similar:{k}") })
}

/// Millisecond time source; the logical clock makes traces reproducible.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug)]
pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { start: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }
}

/// Advances by a fixed tick on every reading.
#[derive(Debug, Default)]
pub struct LogicalClock {
    ticks: AtomicU64,
    step: u64,
}

impl LogicalClock {
    pub fn new(step: u64) -> Self {
        LogicalClock { ticks: AtomicU64::new(0), step }
    }
}

impl Clock for LogicalClock {
    fn now_ms(&self) -> u64 {
        self.ticks.fetch_add(self.step, Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason")]
pub enum StepStatus {
    Ok,
    Err(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub action: String,
    pub model: Option<NodeId>,
    /// Model whose spec was borrowed, when the fallback applied.
    pub spec_from: Option<NodeId>,
    pub bound_args: BTreeMap<String, BoundArg>,
    pub output_key: Option<String>,
    pub duration_ms: u64,
    #[serde(flatten)]
    pub status: StepStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinalStatus {
    Ok,
    Err,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionRun {
    pub steps: Vec<StepRecord>,
    pub final_status: FinalStatus,
    pub failure: Option<String>,
    pub output: Option<Artifact>,
    pub blackboard: Blackboard,
}

/// Everything a step needs besides the plan itself.
pub struct ExecEnv<'a> {
    pub graph: &'a CapabilityGraph,
    pub specs: &'a SpecStore,
    pub registry: &'a BackendRegistry,
    pub domain: &'a DomainFile,
    pub embedder: &'a dyn TextEmbedder,
    pub clock: &'a dyn Clock,
}

/// Task node for a (possibly domain-prefixed) action name.
pub fn task_of(action: &str) -> NodeId {
    NodeId::task(action.rsplit("__").next().unwrap_or(action))
}

/// Runs the plan in order. Failures never escape: they end the run and are
/// recorded in the returned value.
pub fn execute_plan(plan: &Plan, sel: &SelectionResult, pq: &ParsedQuery, env: &ExecEnv<'_>) -> ExecutionRun {
    let mut bb = Blackboard::from_query(pq);
    let mut run = ExecutionRun {
        steps: Vec::new(),
        final_status: FinalStatus::Ok,
        failure: None,
        output: None,
        blackboard: Blackboard::default(),
    };
    let missing: Vec<&str> =
        plan.steps.iter().map(|s| s.schema.as_str()).filter(|a| sel.model_for(a).is_none()).collect();
    if !missing.is_empty() {
        run.final_status = FinalStatus::Err;
        run.failure = Some(format!("unassigned actions: {}", missing.join(", ")));
        run.blackboard = bb;
        return run;
    }
    for (i, step) in plan.steps.iter().enumerate() {
        let started = env.clock.now_ms();
        let mut record = StepRecord {
            index: i,
            action: step.schema.clone(),
            model: sel.model_for(&step.schema).cloned(),
            spec_from: None,
            bound_args: BTreeMap::new(),
            output_key: None,
            duration_ms: 0,
            status: StepStatus::Ok,
        };
        let result = run_step(i, step.schema.as_str(), &mut record, &mut bb, env);
        record.duration_ms = env.clock.now_ms().saturating_sub(started);
        if let Err(reason) = result {
            record.status = StepStatus::Err(reason.clone());
            run.steps.push(record);
            run.final_status = FinalStatus::Err;
            run.failure = Some(format!("step {i} ({}) failed: {reason}", step.schema));
            break;
        }
        run.steps.push(record);
    }
    if run.final_status == FinalStatus::Ok {
        run.output = bb.final_output().map(|(_, a)| a.clone());
    }
    run.blackboard = bb;
    run
}

fn run_step(
    i: usize,
    action: &str,
    record: &mut StepRecord,
    bb: &mut Blackboard,
    env: &ExecEnv<'_>,
) -> Result<(), String> {
    let model = record.model.clone().expect("checked before the loop");
    let task = task_of(action);
    let spec = match env.specs.spec_for(&model, env.graph) {
        Some(s) => s.clone(),
        None => {
            let s = fallback_spec(&model, &task, env.graph, env.specs)
                .ok_or_else(|| format!("NoExecutionSpec for {}", model.local_name))?;
            record.spec_from = Some(s.model_id.clone());
            s
        }
    };
    let args = map_arguments(&spec, bb, i as i64, env.embedder).map_err(|e| e.to_string())?;
    record.bound_args = args.clone();
    let backend =
        env.registry.lookup(&model, &spec.model_id).ok_or_else(|| format!("NoBackend for {}", model.local_name))?;
    let plain: BTreeMap<String, String> = args.into_iter().map(|(k, v)| (k, v.value)).collect();
    let inv = Invocation { action: task.local_name.as_str(), model: &model, spec: &spec, args: &plain };
    let output = backend.invoke(&inv).map_err(|e| e.to_string())?;
    let produced = env.domain.action(action).and_then(|a| a.produces.first().cloned()).unwrap_or_else(|| "text".into());
    let key = format!("step{i}.{}", task.local_name);
    bb.put(
        key.clone(),
        Artifact { semantic_type: SemanticType::for_modality(&produced), value: output, producer_step: i as i64 },
    );
    record.output_key = Some(key);
    Ok(())
}
