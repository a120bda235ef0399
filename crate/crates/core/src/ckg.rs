//! Capability knowledge graph: a typed triple store linking models to the
//! tasks they support, their licenses, sizes, benchmark results and
//! execution snippets.
//!
//! Benchmark results are reified: a model points at a `Result` node with
//! `reports_result`, and that node carries exactly one benchmark, metric,
//! value and direction triple.
//!
//! On disk the graph is one JSON object per line:
//!
//! ```text
//! {"s":"model:openai/whisper-large-v2","p":"supports_task","o":"task:automatic_speech_recognition","ot":"node"}
//! {"s":"model:openai/whisper-large-v2","p":"has_size_bytes","o":6170000000,"ot":"int"}
//! ```
//!
//! Lines starting with `#` are comments.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("{}arity violation: {message}", line_prefix(*.line))]
    Arity { line: Option<usize>, message: String },
    #[error("result node {0} is incomplete: {1}")]
    IncompleteResult(NodeId, String),
    #[error("invalid node id `{0}`")]
    InvalidNodeId(String),
    #[error("io error: {0}")]
    Io(String),
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Model,
    Task,
    Benchmark,
    Metric,
    License,
    Organization,
    Language,
    Snippet,
    Result,
}

impl NodeKind {
    pub const ALL: [NodeKind; 9] = [
        NodeKind::Model,
        NodeKind::Task,
        NodeKind::Benchmark,
        NodeKind::Metric,
        NodeKind::License,
        NodeKind::Organization,
        NodeKind::Language,
        NodeKind::Snippet,
        NodeKind::Result,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Model => "model",
            NodeKind::Task => "task",
            NodeKind::Benchmark => "benchmark",
            NodeKind::Metric => "metric",
            NodeKind::License => "license",
            NodeKind::Organization => "organization",
            NodeKind::Language => "language",
            NodeKind::Snippet => "snippet",
            NodeKind::Result => "result",
        }
    }
}

impl FromStr for NodeKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| GraphError::InvalidNodeId(s.to_string()))
    }
}

/// A graph vertex, keyed by `(kind, local_name)`. Local names keep their case.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub kind: NodeKind,
    pub local_name: String,
}

impl NodeId {
    pub fn new(kind: NodeKind, local_name: impl Into<String>) -> Result<Self, GraphError> {
        let local_name = local_name.into();
        if local_name.trim().is_empty() {
            return Err(GraphError::InvalidNodeId(format!("{}:{}", kind.as_str(), local_name)));
        }
        Ok(NodeId { kind, local_name })
    }

    pub fn model(name: &str) -> Self {
        Self::new(NodeKind::Model, name).expect("model name must be non-empty")
    }

    pub fn task(name: &str) -> Self {
        Self::new(NodeKind::Task, name).expect("task name must be non-empty")
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_str(), self.local_name)
    }
}

impl FromStr for NodeId {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, name) = s.split_once(':').ok_or_else(|| GraphError::InvalidNodeId(s.to_string()))?;
        NodeId::new(kind.parse()?, name)
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    SupportsTask,
    HasLicense,
    HasSizeBytes,
    AuthoredBy,
    CoversLanguage,
    HasSnippet,
    ReportsResult,
    ResultOnBenchmark,
    ResultMetric,
    ResultValue,
    ResultDirection,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 11] = [
        EdgeKind::SupportsTask,
        EdgeKind::HasLicense,
        EdgeKind::HasSizeBytes,
        EdgeKind::AuthoredBy,
        EdgeKind::CoversLanguage,
        EdgeKind::HasSnippet,
        EdgeKind::ReportsResult,
        EdgeKind::ResultOnBenchmark,
        EdgeKind::ResultMetric,
        EdgeKind::ResultValue,
        EdgeKind::ResultDirection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::SupportsTask => "supports_task",
            EdgeKind::HasLicense => "has_license",
            EdgeKind::HasSizeBytes => "has_size_bytes",
            EdgeKind::AuthoredBy => "authored_by",
            EdgeKind::CoversLanguage => "covers_language",
            EdgeKind::HasSnippet => "has_snippet",
            EdgeKind::ReportsResult => "reports_result",
            EdgeKind::ResultOnBenchmark => "result_on_benchmark",
            EdgeKind::ResultMetric => "result_metric",
            EdgeKind::ResultValue => "result_value",
            EdgeKind::ResultDirection => "result_direction",
        }
    }

    /// Subject and object node kinds for node-valued predicates.
    fn node_kinds(self) -> Option<(NodeKind, NodeKind)> {
        use NodeKind::*;
        Some(match self {
            EdgeKind::SupportsTask => (Model, Task),
            EdgeKind::HasLicense => (Model, License),
            EdgeKind::AuthoredBy => (Model, Organization),
            EdgeKind::CoversLanguage => (Model, Language),
            EdgeKind::HasSnippet => (Model, Snippet),
            EdgeKind::ReportsResult => (Model, Result),
            EdgeKind::ResultOnBenchmark => (Result, Benchmark),
            EdgeKind::ResultMetric => (Result, Metric),
            EdgeKind::HasSizeBytes | EdgeKind::ResultValue | EdgeKind::ResultDirection => return None,
        })
    }
}

impl FromStr for EdgeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EdgeKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown predicate `{s}`"))
    }
}

#[derive(Debug, Clone)]
pub enum Object {
    Node(NodeId),
    Str(String),
    Int(i64),
    Float(f64),
}

impl Object {
    fn rank(&self) -> u8 {
        match self {
            Object::Node(_) => 0,
            Object::Str(_) => 1,
            Object::Int(_) => 2,
            Object::Float(_) => 3,
        }
    }

    pub fn as_node(&self) -> Option<&NodeId> {
        match self {
            Object::Node(n) => Some(n),
            _ => None,
        }
    }

    fn type_tag(&self) -> &'static str {
        match self {
            Object::Node(_) => "node",
            Object::Str(_) => "str",
            Object::Int(_) => "int",
            Object::Float(_) => "float",
        }
    }
}

impl PartialEq for Object {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Object {}

impl PartialOrd for Object {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Object {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Object::Node(a), Object::Node(b)) => a.cmp(b),
            (Object::Str(a), Object::Str(b)) => a.cmp(b),
            (Object::Int(a), Object::Int(b)) => a.cmp(b),
            (Object::Float(a), Object::Float(b)) => a.total_cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Triple {
    pub subject: NodeId,
    pub predicate: EdgeKind,
    pub object: Object,
}

impl Triple {
    pub fn new(subject: NodeId, predicate: EdgeKind, object: Object) -> Self {
        Triple { subject, predicate, object }
    }

    pub fn node(subject: NodeId, predicate: EdgeKind, object: NodeId) -> Self {
        Triple::new(subject, predicate, Object::Node(object))
    }

    /// Checks the predicate's object-type rule and the node kinds it links.
    pub fn check_arity(&self) -> Result<(), String> {
        let p = self.predicate.as_str();
        match (self.predicate, &self.object) {
            (EdgeKind::HasSizeBytes, Object::Int(v)) if *v >= 0 => expect_kind(&self.subject, NodeKind::Model, p),
            (EdgeKind::HasSizeBytes, o) => {
                Err(format!("{p} needs a non-negative integer, got {} object", o.type_tag()))
            }
            (EdgeKind::ResultValue, Object::Float(v)) if v.is_finite() => {
                expect_kind(&self.subject, NodeKind::Result, p)
            }
            (EdgeKind::ResultValue, o) => Err(format!("{p} needs a finite float, got {} object", o.type_tag())),
            (EdgeKind::ResultDirection, Object::Str(s)) if s == "higher_better" || s == "lower_better" => {
                expect_kind(&self.subject, NodeKind::Result, p)
            }
            (EdgeKind::ResultDirection, _) => Err(format!("{p} needs \"higher_better\" or \"lower_better\"")),
            (pred, Object::Node(obj)) => {
                let (sk, ok) = pred.node_kinds().expect("node-valued predicate");
                expect_kind(&self.subject, sk, p)?;
                if obj.kind != ok {
                    return Err(format!("{p} object must be a {} node, got {obj}", ok.as_str()));
                }
                Ok(())
            }
            (_, o) => Err(format!("{p} needs a node object, got {} object", o.type_tag())),
        }
    }
}

fn expect_kind(node: &NodeId, kind: NodeKind, pred: &str) -> Result<(), String> {
    if node.kind == kind {
        Ok(())
    } else {
        Err(format!("{pred} subject must be a {} node, got {node}", kind.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Direction {
    /// Default direction for a metric name: lower is better for error- and
    /// distance-style metrics, higher for everything else.
    pub fn for_metric(metric: &str) -> Self {
        const LOWER: [&str; 6] = ["wer", "cer", "perplexity", "mae", "rmse", "fid"];
        let m = metric.trim().to_lowercase();
        if LOWER.contains(&m.as_str()) {
            Direction::LowerBetter
        } else {
            Direction::HigherBetter
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::HigherBetter => "higher_better",
            Direction::LowerBetter => "lower_better",
        }
    }

    /// True when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::HigherBetter => a > b,
            Direction::LowerBetter => a < b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub benchmark: String,
    pub metric: String,
    pub value: f64,
    pub direction: Direction,
}

impl BenchmarkResult {
    /// The four triples reifying this result under `result` for `model`.
    pub fn reify(&self, model: &NodeId, result: NodeId) -> Result<Vec<Triple>, GraphError> {
        Ok(vec![
            Triple::node(model.clone(), EdgeKind::ReportsResult, result.clone()),
            Triple::node(
                result.clone(),
                EdgeKind::ResultOnBenchmark,
                NodeId::new(NodeKind::Benchmark, &self.benchmark)?,
            ),
            Triple::node(result.clone(), EdgeKind::ResultMetric, NodeId::new(NodeKind::Metric, &self.metric)?),
            Triple::new(result.clone(), EdgeKind::ResultValue, Object::Float(self.value)),
            Triple::new(result, EdgeKind::ResultDirection, Object::Str(self.direction.as_str().to_string())),
        ])
    }
}

/// Materialized view of one model's attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    pub model: NodeId,
    pub tasks: BTreeSet<NodeId>,
    pub license: Option<String>,
    pub size_bytes: Option<u64>,
    pub results: Vec<BenchmarkResult>,
    pub snippet: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub triples: usize,
    pub entities: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CapabilityGraph {
    triples: BTreeSet<Triple>,
    by_subject: BTreeMap<NodeId, BTreeSet<(EdgeKind, Object)>>,
    by_predicate_object: BTreeMap<(EdgeKind, Object), BTreeSet<NodeId>>,
}

impl CapabilityGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a triple. Re-inserting a stored triple is a no-op; the
    /// return value tells whether the graph changed.
    pub fn add_triple(&mut self, t: Triple) -> Result<bool, GraphError> {
        t.check_arity().map_err(|message| GraphError::Arity { line: None, message })?;
        if self.triples.contains(&t) {
            return Ok(false);
        }
        self.by_subject.entry(t.subject.clone()).or_default().insert((t.predicate, t.object.clone()));
        self.by_predicate_object.entry((t.predicate, t.object.clone())).or_default().insert(t.subject.clone());
        self.triples.insert(t);
        Ok(true)
    }

    pub fn extend<I: IntoIterator<Item = Triple>>(&mut self, triples: I) -> Result<(), GraphError> {
        for t in triples {
            self.add_triple(t)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    pub fn stats(&self) -> GraphStats {
        let mut entities: BTreeSet<&NodeId> = BTreeSet::new();
        for t in &self.triples {
            entities.insert(&t.subject);
            if let Object::Node(n) = &t.object {
                entities.insert(n);
            }
        }
        GraphStats { triples: self.triples.len(), entities: entities.len() }
    }

    fn objects(&self, subject: &NodeId, predicate: EdgeKind) -> impl Iterator<Item = &Object> {
        self.by_subject
            .get(subject)
            .into_iter()
            .flat_map(move |set| set.iter().filter(move |(p, _)| *p == predicate).map(|(_, o)| o))
    }

    fn subjects(&self, predicate: EdgeKind, object: &NodeId) -> impl Iterator<Item = &NodeId> {
        self.by_predicate_object.get(&(predicate, Object::Node(object.clone()))).into_iter().flatten()
    }

    /// All model nodes, ascending by local name.
    pub fn models(&self) -> Vec<NodeId> {
        let mut models: Vec<NodeId> = self.by_subject.keys().filter(|n| n.kind == NodeKind::Model).cloned().collect();
        models.sort_by(|a, b| a.local_name.cmp(&b.local_name));
        models
    }

    /// Every task node that some model supports.
    pub fn tasks(&self) -> BTreeSet<NodeId> {
        self.triples
            .iter()
            .filter(|t| t.predicate == EdgeKind::SupportsTask)
            .filter_map(|t| t.object.as_node().cloned())
            .collect()
    }

    pub fn has_task(&self, task: &NodeId) -> bool {
        self.subjects(EdgeKind::SupportsTask, task).next().is_some()
    }

    pub fn record(&self, model: &NodeId) -> ModelRecord {
        let tasks = self.objects(model, EdgeKind::SupportsTask).filter_map(Object::as_node).cloned().collect();
        let license =
            self.objects(model, EdgeKind::HasLicense).filter_map(Object::as_node).map(|n| n.local_name.clone()).next();
        let size_bytes = self.objects(model, EdgeKind::HasSizeBytes).find_map(|o| match o {
            Object::Int(v) => u64::try_from(*v).ok(),
            _ => None,
        });
        let snippet = self.objects(model, EdgeKind::HasSnippet).filter_map(Object::as_node).next().cloned();
        ModelRecord {
            model: model.clone(),
            tasks,
            license,
            size_bytes,
            results: self.results_for(model, None),
            snippet,
        }
    }

    /// Models supporting `task`, ascending by local name.
    pub fn models_for_task(&self, task: &NodeId) -> Vec<ModelRecord> {
        let mut models: Vec<&NodeId> = self.subjects(EdgeKind::SupportsTask, task).collect();
        models.sort_by(|a, b| a.local_name.cmp(&b.local_name));
        models.into_iter().map(|m| self.record(m)).collect()
    }

    /// Reified results of `model`, optionally restricted to one benchmark
    /// (compared case-insensitively by name).
    pub fn results_for(&self, model: &NodeId, benchmark: Option<&str>) -> Vec<BenchmarkResult> {
        let wanted = benchmark.map(str::to_lowercase);
        let mut out: Vec<BenchmarkResult> = self
            .objects(model, EdgeKind::ReportsResult)
            .filter_map(Object::as_node)
            .filter_map(|r| self.result(r))
            .filter(|r| wanted.as_ref().is_none_or(|w| r.benchmark.to_lowercase() == *w))
            .collect();
        out.sort_by(|a, b| (&a.benchmark, &a.metric).cmp(&(&b.benchmark, &b.metric)).then(a.value.total_cmp(&b.value)));
        out
    }

    fn result(&self, node: &NodeId) -> Option<BenchmarkResult> {
        let benchmark = self.objects(node, EdgeKind::ResultOnBenchmark).find_map(Object::as_node)?;
        let metric = self.objects(node, EdgeKind::ResultMetric).find_map(Object::as_node)?;
        let value = self.objects(node, EdgeKind::ResultValue).find_map(|o| match o {
            Object::Float(v) => Some(*v),
            _ => None,
        })?;
        let direction = self.objects(node, EdgeKind::ResultDirection).find_map(|o| match o {
            Object::Str(s) if s == "lower_better" => Some(Direction::LowerBetter),
            Object::Str(s) if s == "higher_better" => Some(Direction::HigherBetter),
            _ => None,
        })?;
        Some(BenchmarkResult {
            benchmark: benchmark.local_name.clone(),
            metric: metric.local_name.clone(),
            value,
            direction,
        })
    }

    /// Verifies that every referenced result node carries exactly one of
    /// each of its four attribute triples.
    pub fn check_results(&self) -> Result<(), GraphError> {
        let referenced: BTreeSet<&NodeId> = self
            .triples
            .iter()
            .filter(|t| t.predicate == EdgeKind::ReportsResult)
            .filter_map(|t| t.object.as_node())
            .collect();
        for node in referenced {
            for pred in
                [EdgeKind::ResultOnBenchmark, EdgeKind::ResultMetric, EdgeKind::ResultValue, EdgeKind::ResultDirection]
            {
                let n = self.objects(node, pred).count();
                if n != 1 {
                    return Err(GraphError::IncompleteResult(
                        node.clone(),
                        format!("expected exactly one {} triple, found {n}", pred.as_str()),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Snippet nodes referenced through `has_snippet`.
    pub fn snippet_refs(&self) -> BTreeSet<&NodeId> {
        self.triples.iter().filter(|t| t.predicate == EdgeKind::HasSnippet).filter_map(|t| t.object.as_node()).collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), GraphError> {
        for t in &self.triples {
            let line = serde_json::to_string(&TripleRecord::from(t)).map_err(|e| GraphError::Io(e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| GraphError::Io(e.to_string()))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("graph text is UTF-8")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TripleRecord {
    s: String,
    p: String,
    o: serde_json::Value,
    ot: String,
}

impl From<&Triple> for TripleRecord {
    fn from(t: &Triple) -> Self {
        let (o, ot) = match &t.object {
            Object::Node(n) => (serde_json::Value::String(n.to_string()), "node"),
            Object::Str(s) => (serde_json::Value::String(s.clone()), "str"),
            Object::Int(v) => (serde_json::Value::from(*v), "int"),
            Object::Float(v) => (serde_json::Value::from(*v), "float"),
        };
        TripleRecord { s: t.subject.to_string(), p: t.predicate.as_str().to_string(), o, ot: ot.into() }
    }
}

fn parse_record(line: &str) -> Result<Triple, String> {
    let rec: TripleRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let subject: NodeId = rec.s.parse().map_err(|e: GraphError| e.to_string())?;
    let predicate: EdgeKind = rec.p.parse()?;
    let object = match (rec.ot.as_str(), &rec.o) {
        ("node", serde_json::Value::String(s)) => Object::Node(s.parse().map_err(|e: GraphError| e.to_string())?),
        ("str", serde_json::Value::String(s)) => Object::Str(s.clone()),
        ("int", v) => Object::Int(v.as_i64().ok_or("`int` object is not an integer")?),
        ("float", v) => Object::Float(v.as_f64().ok_or("`float` object is not a number")?),
        (ot @ ("node" | "str"), _) => return Err(format!("`{ot}` object must be a string")),
        (ot, _) => return Err(format!("unknown object type `{ot}`")),
    };
    Ok(Triple { subject, predicate, object })
}

/// Reads the line-delimited triple format. Blank lines and `#` comments are
/// skipped; line numbers in errors are 1-based.
pub fn load_graph<R: BufRead>(reader: R) -> Result<CapabilityGraph, GraphError> {
    let mut graph = CapabilityGraph::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| GraphError::Io(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let triple = parse_record(trimmed).map_err(|message| GraphError::Parse { line: line_no, message })?;
        graph.add_triple(triple).map_err(|e| match e {
            GraphError::Arity { message, .. } => GraphError::Arity { line: Some(line_no), message },
            other => other,
        })?;
    }
    graph.check_results()?;
    Ok(graph)
}

pub fn load_graph_str(text: &str) -> Result<CapabilityGraph, GraphError> {
    load_graph(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn whisper() -> NodeId {
        NodeId::model("openai/whisper-large-v2")
    }

    #[test]
    fn duplicate_insert_is_idempotent() {
        let mut g = CapabilityGraph::new();
        let t = Triple::node(whisper(), EdgeKind::SupportsTask, NodeId::task("automatic_speech_recognition"));
        assert!(g.add_triple(t.clone()).unwrap());
        assert!(!g.add_triple(t).unwrap());
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn size_must_be_integer() {
        let mut g = CapabilityGraph::new();
        let err =
            g.add_triple(Triple::new(whisper(), EdgeKind::HasSizeBytes, Object::Str("large".into()))).unwrap_err();
        assert!(matches!(err, GraphError::Arity { .. }));
        let err = g.add_triple(Triple::new(whisper(), EdgeKind::HasSizeBytes, Object::Int(-1))).unwrap_err();
        assert!(matches!(err, GraphError::Arity { .. }));
    }

    #[test]
    fn result_value_must_be_finite() {
        let r = NodeId::new(NodeKind::Result, "r1").unwrap();
        let mut g = CapabilityGraph::new();
        assert!(g.add_triple(Triple::new(r, EdgeKind::ResultValue, Object::Float(f64::NAN))).is_err());
    }

    #[test]
    fn node_kinds_are_checked() {
        let mut g = CapabilityGraph::new();
        let bad = Triple::node(whisper(), EdgeKind::SupportsTask, NodeId::model("other"));
        assert!(g.add_triple(bad).is_err());
    }

    #[test]
    fn reified_result_is_materialized_once() {
        let mut g = CapabilityGraph::new();
        let r = BenchmarkResult {
            benchmark: "speech recognition on common voice english".into(),
            metric: "WER".into(),
            value: 9.0,
            direction: Direction::LowerBetter,
        };
        let node = NodeId::new(NodeKind::Result, "whisper-cv-wer").unwrap();
        g.extend(r.reify(&whisper(), node).unwrap()).unwrap();
        g.check_results().unwrap();
        assert_eq!(g.results_for(&whisper(), None), vec![r.clone()]);
        assert_eq!(g.results_for(&whisper(), Some("Speech Recognition on Common Voice English")), vec![r]);
        assert!(g.results_for(&whisper(), Some("librispeech")).is_empty());
    }

    #[test]
    fn stats_of_small_graphs() {
        let mut g = CapabilityGraph::new();
        assert_eq!(g.stats(), GraphStats { triples: 0, entities: 0 });
        g.add_triple(Triple::node(whisper(), EdgeKind::SupportsTask, NodeId::task("asr"))).unwrap();
        assert_eq!(g.stats(), GraphStats { triples: 1, entities: 2 });
        g.add_triple(Triple::new(whisper(), EdgeKind::HasSizeBytes, Object::Int(10))).unwrap();
        assert_eq!(g.stats(), GraphStats { triples: 2, entities: 2 });
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "# comment\n\n{\"s\":\"model:a\",\"o\":\"task:t\",\"ot\":\"node\"}\n";
        match load_graph_str(text) {
            Err(GraphError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_predicate_is_a_parse_error() {
        let text = r#"{"s":"model:a","p":"likes","o":"task:t","ot":"node"}"#;
        assert!(matches!(load_graph_str(text), Err(GraphError::Parse { line: 1, .. })));
    }

    #[test]
    fn arity_errors_carry_line_numbers() {
        let text = "{\"s\":\"model:a\",\"p\":\"supports_task\",\"o\":\"task:t\",\"ot\":\"node\"}\n\
                    {\"s\":\"model:a\",\"p\":\"has_size_bytes\",\"o\":\"large\",\"ot\":\"str\"}\n";
        assert!(matches!(load_graph_str(text), Err(GraphError::Arity { line: Some(2), .. })));
    }

    #[test]
    fn incomplete_result_is_rejected() {
        let text = r#"{"s":"model:a","p":"reports_result","o":"result:r","ot":"node"}"#;
        assert!(matches!(load_graph_str(text), Err(GraphError::IncompleteResult(..))));
    }

    #[test]
    fn metric_direction_table() {
        for m in ["WER", "cer", "Perplexity", "mae", "RMSE", "fid"] {
            assert_eq!(Direction::for_metric(m), Direction::LowerBetter, "{m}");
        }
        assert_eq!(Direction::for_metric("accuracy"), Direction::HigherBetter);
        assert_eq!(Direction::for_metric("BLEU"), Direction::HigherBetter);
    }

    #[test]
    fn unknown_task_has_no_models() {
        assert!(CapabilityGraph::new().models_for_task(&NodeId::task("nothing")).is_empty());
    }
}
