//! Query to trace: parse, classify, merge domains, select actions, plan,
//! select models, execute. Also drives live benchmark runs.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::ckg::{load_graph, CapabilityGraph};
use crate::config::{Config, ConfigError};
use crate::embed::TrigramEmbedder;
use crate::evalbench::{BenchRecord, EvalError, OrErr, OutputJudge, RunOutcome, Score};
use crate::exec::{
    execute_plan, task_of, BackendRegistry, Clock, ExecEnv, ExecutionTrace, FinalStatus, LogicalClock, SpecStore,
    SystemClock,
};
use crate::nlu::{
    classify_domains, parse_query, select_actions, DomainOutcome, DomainSubset, GenerationParams, NluError,
    ParseOutcome, TextCompletion,
};
use crate::pddl::{ground, merge_domains, parse_domain, synthesize_problem, DomainFile, PddlError};
use crate::planner::{bfws_plan, Plan, PlanError, SearchConfig};
use crate::selection::{explain_selection, select_models, ConstraintSet, SelectionResult};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Nlu(#[from] NluError),
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

impl PipelineError {
    /// 1 for bad input or environment, 2 for planning or selection.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Nlu(NluError::EmptySelection(_)) | PipelineError::Plan(_) => 2,
            PipelineError::Pddl(
                PddlError::NoInputArtifact { .. } | PddlError::UnknownAction(_) | PddlError::GroundingExplosion { .. },
            ) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClockMode {
    System,
    /// One millisecond per reading; makes traces reproducible.
    Logical,
}

/// Everything decided before execution.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub query: String,
    pub parse: ParseOutcome,
    pub domains: DomainOutcome,
    pub selected_actions: Vec<String>,
    pub domain: DomainFile,
    pub plan: Plan,
    pub selection: SelectionResult,
    pub t_parse_ms: u64,
    pub t_plan_ms: u64,
    pub t_select_ms: u64,
}

impl PlanOutcome {
    /// Task names of the plan steps, first occurrence kept.
    pub fn plan_tasks(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.plan.steps {
            let t = task_of(&s.schema).local_name;
            if !out.contains(&t) {
                out.push(t);
            }
        }
        out
    }
}

pub struct Engine {
    pub graph: CapabilityGraph,
    pub specs: SpecStore,
    pub registry: BackendRegistry,
    /// Registered domains, in name order.
    pub domains: Vec<DomainFile>,
    pub provider: Box<dyn TextCompletion>,
    pub params: GenerationParams,
    pub search: SearchConfig,
    pub max_ground_actions: usize,
    pub clock: ClockMode,
    /// Echoed into every trace.
    pub config: serde_json::Value,
}

fn input_err(what: &str, path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Input(format!("{what} {}: {e}", path.display()))
}

pub fn load_graph_file(path: &Path) -> Result<CapabilityGraph, PipelineError> {
    let f = std::fs::File::open(path).map_err(|e| input_err("graph", path, e))?;
    load_graph(std::io::BufReader::new(f)).map_err(|e| input_err("graph", path, e))
}

/// Spec store at `path`; a missing file is an empty store.
pub fn load_specs_file(path: &Path) -> Result<SpecStore, PipelineError> {
    match std::fs::File::open(path) {
        Ok(f) => SpecStore::load(std::io::BufReader::new(f)).map_err(|e| input_err("specs", path, e)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(SpecStore::new()),
        Err(e) => Err(input_err("specs", path, e)),
    }
}

/// Every `*.pddl` file in `dir`, sorted by file name.
pub fn load_domains(dir: &Path) -> Result<Vec<DomainFile>, PipelineError> {
    let rd = std::fs::read_dir(dir).map_err(|e| input_err("domains", dir, e))?;
    let mut paths: Vec<_> =
        rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "pddl")).collect();
    paths.sort();
    let mut out: Vec<DomainFile> = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(|e| input_err("domain", &p, e))?;
        let d = parse_domain(&text).map_err(|e| input_err("domain", &p, e))?;
        d.validate().map_err(|e| input_err("domain", &p, e))?;
        if out.iter().any(|o| o.name == d.name) {
            return Err(input_err("domain", &p, format!("duplicate domain name `{}`", d.name)));
        }
        out.push(d);
    }
    Ok(out)
}

/// Moves the selected actions to the front, in selection order. The
/// planner breaks ties first-in first-out, so this keeps the selection
/// order wherever modalities leave the order open.
pub fn prioritize_actions(mut d: DomainFile, selected: &[String]) -> DomainFile {
    d.actions.sort_by_key(|a| selected.iter().position(|s| s == &a.name).unwrap_or(usize::MAX));
    d
}

impl Engine {
    /// Defaults for everything but the data: logical clock, default search.
    pub fn new(
        graph: CapabilityGraph,
        specs: SpecStore,
        registry: BackendRegistry,
        domains: Vec<DomainFile>,
        provider: Box<dyn TextCompletion>,
    ) -> Self {
        Engine {
            graph,
            specs,
            registry,
            domains,
            provider,
            params: GenerationParams::default(),
            search: SearchConfig::default(),
            max_ground_actions: crate::pddl::DEFAULT_MAX_GROUND_ACTIONS,
            clock: ClockMode::Logical,
            config: serde_json::Value::Null,
        }
    }

    pub fn from_config(c: &Config) -> Result<Self, PipelineError> {
        let provider = c.provider()?;
        let graph_path = c.ckg.path.as_deref().ok_or_else(|| PipelineError::Input("ckg.path is not set".into()))?;
        let graph = load_graph_file(graph_path)?;
        let specs = match c.specs_path() {
            Some(p) => load_specs_file(&p)?,
            None => SpecStore::new(),
        };
        let registry = match &c.registry.path {
            Some(p) => BackendRegistry::load(p).map_err(|e| PipelineError::Input(e.to_string()))?,
            None => BackendRegistry::new(),
        };
        let dir = c.pddl.domains.as_deref().ok_or_else(|| PipelineError::Input("pddl.domains is not set".into()))?;
        let domains = load_domains(dir)?;
        let mut e = Engine::new(graph, specs, registry, domains, provider);
        e.search = c.search();
        e.max_ground_actions = c.ground.max_actions;
        e.clock = if c.provider.offline { ClockMode::Logical } else { ClockMode::System };
        e.config = c.echo();
        Ok(e)
    }

    pub fn registered_domains(&self) -> Vec<String> {
        self.domains.iter().map(|d| d.name.clone()).collect()
    }

    pub fn new_clock(&self) -> Box<dyn Clock> {
        match self.clock {
            ClockMode::System => Box::new(SystemClock::new()),
            ClockMode::Logical => Box::new(LogicalClock::new(1)),
        }
    }

    pub fn plan(&self, query: &str, constraints: &ConstraintSet) -> Result<PlanOutcome, PipelineError> {
        self.plan_with_clock(query, constraints, self.new_clock().as_ref())
    }

    /// Everything up to and including model selection. A query that
    /// touches no registered domain yields an empty plan.
    pub fn plan_with_clock(
        &self,
        query: &str,
        constraints: &ConstraintSet,
        clock: &dyn Clock,
    ) -> Result<PlanOutcome, PipelineError> {
        let t0 = clock.now_ms();
        let parse = parse_query(query, self.provider.as_ref(), &self.params, true)?;
        let t1 = clock.now_ms();

        let instruction = parse.query.instruction_or(query).to_string();
        let registered = self.registered_domains();
        let domains = classify_domains(&instruction, &registered, self.provider.as_ref(), &self.params)?;
        let chosen: Vec<DomainFile> =
            self.domains.iter().filter(|d| domains.subset.domains.contains(&d.name)).cloned().collect();

        let (selected_actions, domain, plan) = if chosen.is_empty() {
            (Vec::new(), DomainFile::new("merged"), Plan::default())
        } else {
            let merged = merge_domains(&chosen)?;
            let selected = select_actions(&instruction, &merged.action_names(), self.provider.as_ref(), &self.params)?;
            let merged = prioritize_actions(merged, &selected);
            let problem = synthesize_problem(&parse.query, &selected, &merged)?;
            let task = ground(&merged, &problem, self.max_ground_actions)?;
            let plan = bfws_plan(&task, &self.search)?;
            (selected, merged, plan)
        };
        let t2 = clock.now_ms();

        let pairs: Vec<(String, crate::ckg::NodeId)> =
            plan.steps.iter().map(|s| (s.schema.clone(), task_of(&s.schema))).collect();
        let selection = select_models(&pairs, &self.graph, constraints);
        let t3 = clock.now_ms();

        Ok(PlanOutcome {
            query: query.to_string(),
            parse,
            domains,
            selected_actions,
            domain,
            plan,
            selection,
            t_parse_ms: t1 - t0,
            t_plan_ms: t2 - t1,
            t_select_ms: t3 - t0,
        })
    }

    pub fn execute(&self, p: &PlanOutcome, clock: &dyn Clock) -> ExecutionTrace {
        let embedder = TrigramEmbedder;
        let env = ExecEnv {
            graph: &self.graph,
            specs: &self.specs,
            registry: &self.registry,
            domain: &p.domain,
            embedder: &embedder,
            clock,
        };
        let run = execute_plan(&p.plan, &p.selection, &p.parse.query, &env);
        ExecutionTrace {
            query: p.query.clone(),
            parsed: p.parse.query.clone(),
            parse_degraded: p.parse.degraded,
            domains: DomainSubset { domains: p.domains.subset.domains.clone() },
            selected_actions: p.selected_actions.clone(),
            plan: p.plan.clone(),
            selection: p.selection.clone(),
            steps: run.steps,
            t_parse_ms: p.t_parse_ms,
            t_plan_ms: p.t_plan_ms,
            t_select_ms: p.t_select_ms,
            final_status: run.final_status,
            failure: run.failure,
            output: run.output,
            config: self.config.clone(),
        }
    }

    /// Plan and execute on one clock.
    pub fn run(&self, query: &str, constraints: &ConstraintSet) -> Result<ExecutionTrace, PipelineError> {
        let clock = self.new_clock();
        let p = self.plan_with_clock(query, constraints, clock.as_ref())?;
        Ok(self.execute(&p, clock.as_ref()))
    }

    /// One benchmark record through the full system. Pipeline errors make
    /// every field Err; a failed execution makes only O Err.
    pub fn run_record(
        &self,
        rec: &BenchRecord,
        constraints: &ConstraintSet,
        judge: &dyn OutputJudge,
    ) -> Result<RunOutcome, EvalError> {
        let clock = self.new_clock();
        let p = match self.plan_with_clock(&rec.query, constraints, clock.as_ref()) {
            Ok(p) => p,
            Err(_) => {
                return Ok(RunOutcome {
                    record_id: rec.id.clone(),
                    selected_tasks: OrErr::err(),
                    plan_order: OrErr::err(),
                    output_ok: Some(Score::Err),
                    t_select_ms: None,
                })
            }
        };
        let trace = self.execute(&p, clock.as_ref());
        let tasks = p.plan_tasks();
        let output_ok = match trace.final_status {
            FinalStatus::Err => Score::Err,
            FinalStatus::Ok => {
                let text = trace.output.as_ref().map(|a| a.value.as_str()).unwrap_or("");
                match judge.judge(&rec.id, text) {
                    Some(s) => s,
                    None => match rec.output_verdict {
                        Some(1) => Score::One,
                        Some(_) => Score::Zero,
                        None => return Err(EvalError::MissingVerdict(rec.id.clone())),
                    },
                }
            }
        };
        Ok(RunOutcome {
            record_id: rec.id.clone(),
            selected_tasks: OrErr::Ok(tasks.clone()),
            plan_order: OrErr::Ok(tasks),
            output_ok: Some(output_ok),
            t_select_ms: Some(p.t_select_ms),
        })
    }

    /// Runs records on up to `jobs` threads; outcomes keep record order.
    pub fn run_bench(
        &self,
        records: &[BenchRecord],
        constraints: &ConstraintSet,
        judge: &dyn OutputJudge,
        jobs: usize,
    ) -> Result<Vec<RunOutcome>, EvalError> {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<RunOutcome, EvalError>>>> = Mutex::new(vec![None; records.len()]);
        std::thread::scope(|s| {
            for _ in 0..jobs.clamp(1, records.len().max(1)) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(rec) = records.get(i) else { break };
                    let r = self.run_record(rec, constraints, judge);
                    slots.lock().expect("no panics while holding the lock")[i] = Some(r);
                });
            }
        });
        slots.into_inner().expect("threads joined").into_iter().map(|r| r.expect("every slot filled")).collect()
    }
}

/// Plan, selection rationale and timings, without execution.
pub fn render_plan(p: &PlanOutcome) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "query: {}", p.query);
    if p.parse.degraded {
        let _ = writeln!(s, "parse: degraded (pattern fallback)");
    }
    let _ = writeln!(s, "domains: {}", crate::exec::report::or_dash(p.domains.subset.domains.join("; ")));
    let _ = writeln!(s, "selected actions: {}", crate::exec::report::or_dash(p.selected_actions.join(", ")));
    let _ = writeln!(s, "\n[plan] {} step(s)", p.plan.len());
    for (i, st) in p.plan.steps.iter().enumerate() {
        let model = p.selection.model_for(&st.schema).map_or("-".to_string(), |m| m.local_name.clone());
        let _ = writeln!(s, "  {}. ({} {})  model: {model}", i + 1, st.schema, st.args.join(" "));
    }
    let _ = writeln!(s, "\n[selection]");
    for line in explain_selection(&p.selection).lines() {
        let _ = writeln!(s, "  {line}");
    }
    let _ = writeln!(s, "\n[timing] parse {} ms, plan {} ms, select {} ms", p.t_parse_ms, p.t_plan_ms, p.t_select_ms);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ckg::{EdgeKind, NodeId, NodeKind, Triple};
    use crate::exec::BackendConfig;
    use crate::nlu::HeuristicProvider;

    const AUDIO: &str = "
(define (domain audio)
  (:requirements :strips :typing)
  (:types modality artifact)
  (:constants audio text - modality)
  (:predicates (available ?m - modality ?x - artifact))
  ;; produces: text
  (:action automatic_speech_recognition
    :parameters (?x - artifact)
    :precondition (and (available audio ?x))
    :effect (and (available text ?x))))";

    const TOKENS: &str = "
(define (domain token_classification)
  (:requirements :strips :typing)
  (:types modality artifact)
  (:constants text - modality)
  (:predicates (available ?m - modality ?x - artifact))
  ;; produces: text
  (:action named_entity_recognition
    :parameters (?x - artifact)
    :precondition (and (available text ?x))
    :effect (and (available text ?x))))";

    fn engine() -> Engine {
        let mut g = CapabilityGraph::new();
        for (m, t) in [("asr-model", "automatic_speech_recognition"), ("ner-model", "named_entity_recognition")] {
            g.add_triple(Triple::node(NodeId::model(m), EdgeKind::SupportsTask, NodeId::task(t))).unwrap();
            g.add_triple(Triple::node(
                NodeId::model(m),
                EdgeKind::HasLicense,
                NodeId::new(NodeKind::License, "MIT").unwrap(),
            ))
            .unwrap();
            g.add_triple(Triple::node(
                NodeId::model(m),
                EdgeKind::HasSnippet,
                NodeId::new(NodeKind::Snippet, m).unwrap(),
            ))
            .unwrap();
        }
        let specs = SpecStore::load(
            concat!(
                r#"{"model_id":"model:asr-model","params":[{"name":"audio","semantic_type":"audio_path"}],"snippet":"","backend":"stub"}"#,
                "\n",
                r#"{"model_id":"model:ner-model","params":[{"name":"text","semantic_type":"text"}],"snippet":"","backend":"stub"}"#,
            )
            .as_bytes(),
        )
        .unwrap();
        let mut reg = BackendRegistry::new();
        reg.register("asr-model", BackendConfig::Stub { stub: "asr".into() });
        reg.register("ner-model", BackendConfig::Stub { stub: "ner".into() });
        let domains = vec![parse_domain(AUDIO).unwrap(), parse_domain(TOKENS).unwrap()];
        Engine::new(g, specs, reg, domains, Box::new(HeuristicProvider))
    }

    #[test]
    fn asr_then_ner() {
        let e = engine();
        let t =
            e.run("Transcribe the audio from ./audio_1.wav and find entity tokens", &ConstraintSet::default()).unwrap();
        assert_eq!(t.plan.action_names(), vec!["automatic_speech_recognition", "named_entity_recognition"]);
        assert_eq!(t.final_status, FinalStatus::Ok);
        assert!(t.output.unwrap().value.contains("United States of America"));
        assert!(t.t_parse_ms + t.t_plan_ms <= t.t_select_ms);
    }

    #[test]
    fn greeting_is_an_empty_plan() {
        let t = engine().run("Hello there!", &ConstraintSet::default()).unwrap();
        assert!(t.plan.is_empty());
        assert_eq!(t.final_status, FinalStatus::Ok);
    }

    #[test]
    fn no_audio_input_is_a_planning_error() {
        let err = engine().plan("Transcribe the recording please", &ConstraintSet::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }

    #[test]
    fn prioritize_is_stable() {
        let d = parse_domain(AUDIO).unwrap();
        let mut m = merge_domains(&[d, parse_domain(TOKENS).unwrap()]).unwrap();
        m = prioritize_actions(m, &["named_entity_recognition".into()]);
        assert_eq!(m.action_names(), vec!["named_entity_recognition", "automatic_speech_recognition"]);
    }
}
