//! Constrained model selection: filter the candidates of each planned task,
//! then rank them lexicographically by the active rule.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ckg::{CapabilityGraph, Direction, ModelRecord, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkConstraint {
    pub name: String,
    pub metric: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    /// License whitelist, matched case-insensitively.
    pub licenses: Option<BTreeSet<String>>,
    pub minimize_size: bool,
    pub benchmark: Option<BenchmarkConstraint>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstraintError {
    #[error("size minimization and benchmark ranking cannot both be active")]
    ConflictingRules,
    #[error("empty license whitelist")]
    EmptyLicenses,
}

impl ConstraintSet {
    pub fn new(
        licenses: Option<BTreeSet<String>>,
        minimize_size: bool,
        benchmark: Option<BenchmarkConstraint>,
    ) -> Result<Self, ConstraintError> {
        let c = ConstraintSet { licenses, minimize_size, benchmark };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConstraintError> {
        if self.minimize_size && self.benchmark.is_some() {
            return Err(ConstraintError::ConflictingRules);
        }
        if self.licenses.as_ref().is_some_and(|l| l.is_empty()) {
            return Err(ConstraintError::EmptyLicenses);
        }
        Ok(())
    }

    pub fn ranking_rule(&self) -> String {
        if self.minimize_size {
            "minimize_size".into()
        } else if let Some(b) = &self.benchmark {
            format!("benchmark({}, {})", b.name, b.metric)
        } else {
            "most_results".into()
        }
    }

    fn license_ok(&self, m: &ModelRecord) -> bool {
        match (&self.licenses, &m.license) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(allowed), Some(l)) => allowed.iter().any(|a| a.eq_ignore_ascii_case(l)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RankValue {
    Number(f64),
    Text(String),
}

impl std::fmt::Display for RankValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RankValue::Number(v) => write!(f, "{v}"),
            RankValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationaleRecord {
    pub candidates_considered: usize,
    pub filters_applied: Vec<String>,
    pub ranking_rule: String,
    pub winning_value: RankValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub task: NodeId,
    pub model: NodeId,
    pub rationale: RationaleRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnassignedReason {
    UnknownTask,
    NoCompliantModel,
}

impl UnassignedReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            UnassignedReason::UnknownTask => "UnknownTask",
            UnassignedReason::NoCompliantModel => "NoCompliantModel",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unassigned {
    pub action: String,
    pub task: NodeId,
    pub reason: UnassignedReason,
    pub candidates_considered: usize,
    pub filters_applied: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub assignments: BTreeMap<String, Assignment>,
    pub unassigned: Vec<Unassigned>,
}

impl SelectionResult {
    pub fn is_complete(&self) -> bool {
        self.unassigned.is_empty()
    }

    pub fn model_for(&self, action: &str) -> Option<&NodeId> {
        self.assignments.get(action).map(|a| &a.model)
    }
}

/// Ranks survivors; returns the winner and its rank value, or `None` when
/// the rule excludes every candidate.
fn rank(c: &ConstraintSet, survivors: Vec<ModelRecord>) -> Option<(ModelRecord, RankValue)> {
    let by_name = |a: &ModelRecord, b: &ModelRecord| a.model.local_name.cmp(&b.model.local_name);
    if c.minimize_size {
        survivors
            .into_iter()
            .filter_map(|m| m.size_bytes.map(|s| (s, m)))
            .min_by(|(sa, a), (sb, b)| sa.cmp(sb).then_with(|| by_name(a, b)))
            .map(|(s, m)| (m, RankValue::Number(s as f64)))
    } else if let Some(b) = &c.benchmark {
        let scored: Vec<(f64, Direction, ModelRecord)> = survivors
            .into_iter()
            .filter_map(|m| {
                let results: Vec<_> = m
                    .results
                    .iter()
                    .filter(|r| r.benchmark.eq_ignore_ascii_case(&b.name) && r.metric.eq_ignore_ascii_case(&b.metric))
                    .cloned()
                    .collect();
                let dir = results.first()?.direction;
                let best = results.iter().map(|r| r.value).reduce(|x, y| if dir.better(y, x) { y } else { x })?;
                Some((best, dir, m))
            })
            .collect();
        let dir = scored.first().map(|s| s.1)?;
        let key = |v: f64| match dir {
            Direction::LowerBetter => v,
            Direction::HigherBetter => -v,
        };
        scored
            .into_iter()
            .min_by(|(va, _, a), (vb, _, b)| key(*va).total_cmp(&key(*vb)).then_with(|| by_name(a, b)))
            .map(|(v, _, m)| (m, RankValue::Number(v)))
    } else {
        survivors
            .into_iter()
            .min_by(|a, b| match b.results.len().cmp(&a.results.len()) {
                Ordering::Equal => by_name(a, b),
                o => o,
            })
            .map(|m| {
                let n = m.results.len() as f64;
                (m, RankValue::Number(n))
            })
    }
}

/// Chooses one model per planned action. Every failure mode lands in
/// `unassigned`; a violating model is never returned.
pub fn select_models(plan_tasks: &[(String, NodeId)], graph: &CapabilityGraph, c: &ConstraintSet) -> SelectionResult {
    let mut out = SelectionResult::default();
    let mut seen = BTreeSet::new();
    for (action, task) in plan_tasks {
        if !seen.insert(action.clone()) {
            continue;
        }
        if !graph.has_task(task) {
            out.unassigned.push(Unassigned {
                action: action.clone(),
                task: task.clone(),
                reason: UnassignedReason::UnknownTask,
                candidates_considered: 0,
                filters_applied: Vec::new(),
            });
            continue;
        }
        let candidates = graph.models_for_task(task);
        let considered = candidates.len();
        let mut filters = Vec::new();
        let survivors: Vec<ModelRecord> = match &c.licenses {
            Some(allowed) => {
                let list: Vec<&str> = allowed.iter().map(String::as_str).collect();
                filters.push(format!("license in {{{}}}", list.join(", ")));
                candidates.into_iter().filter(|m| c.license_ok(m)).collect()
            }
            None => candidates,
        };
        match rank(c, survivors) {
            Some((m, v)) => {
                out.assignments.insert(
                    action.clone(),
                    Assignment {
                        task: task.clone(),
                        model: m.model,
                        rationale: RationaleRecord {
                            candidates_considered: considered,
                            filters_applied: filters,
                            ranking_rule: c.ranking_rule(),
                            winning_value: v,
                        },
                    },
                );
            }
            None => out.unassigned.push(Unassigned {
                action: action.clone(),
                task: task.clone(),
                reason: UnassignedReason::NoCompliantModel,
                candidates_considered: considered,
                filters_applied: filters,
            }),
        }
    }
    out
}

pub fn explain_selection(r: &SelectionResult) -> String {
    if r.assignments.is_empty() && r.unassigned.is_empty() {
        return "no actions\n".into();
    }
    let mut s = String::new();
    for (action, a) in &r.assignments {
        let _ = writeln!(s, "{action} -> {}", a.model.local_name);
        let _ = writeln!(s, "  task: {}", a.task.local_name);
        let _ = writeln!(s, "  candidates: {}", a.rationale.candidates_considered);
        let filters = if a.rationale.filters_applied.is_empty() {
            "none".to_string()
        } else {
            a.rationale.filters_applied.join("; ")
        };
        let _ = writeln!(s, "  filters: {filters}");
        let _ = writeln!(s, "  rule: {} = {}", a.rationale.ranking_rule, a.rationale.winning_value);
    }
    for u in &r.unassigned {
        let _ = writeln!(s, "{} -> {}", u.action, u.reason.as_str());
        let _ = writeln!(s, "  task: {}", u.task.local_name);
        let _ = writeln!(s, "  candidates: {}", u.candidates_considered);
        if !u.filters_applied.is_empty() {
            let _ = writeln!(s, "  filters: {}", u.filters_applied.join("; "));
        }
    }
    s
}
