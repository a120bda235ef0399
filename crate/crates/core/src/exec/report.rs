use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Artifact, FinalStatus, StepRecord, StepStatus};
use crate::nlu::{DomainSubset, ParsedQuery};
use crate::planner::Plan;
use crate::selection::{explain_selection, SelectionResult};

/// Full record of one query: what was understood, planned, chosen and run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub query: String,
    pub parsed: ParsedQuery,
    pub parse_degraded: bool,
    pub domains: DomainSubset,
    pub selected_actions: Vec<String>,
    pub plan: Plan,
    pub selection: SelectionResult,
    pub steps: Vec<StepRecord>,
    pub t_parse_ms: u64,
    pub t_plan_ms: u64,
    pub t_select_ms: u64,
    pub final_status: FinalStatus,
    pub failure: Option<String>,
    pub output: Option<Artifact>,
    /// Effective configuration, echoed for reproducibility.
    #[serde(default)]
    pub config: serde_json::Value,
}

fn opt(v: &Option<String>) -> &str {
    v.as_deref().unwrap_or("-")
}

fn summary(s: &str) -> String {
    const MAX: usize = 400;
    if s.chars().count() <= MAX {
        s.to_string()
    } else {
        let cut: String = s.chars().take(MAX).collect();
        format!("{cut}...")
    }
}

/// Human-readable report. Plan steps and executed steps are printed from
/// one walk over the plan, so the two cannot disagree.
pub(crate) fn or_dash(s: String) -> String {
    if s.is_empty() {
        "-".into()
    } else {
        s
    }
}

pub fn render_report(t: &ExecutionTrace) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "query: {}", t.query);
    let _ = writeln!(s, "\n[parsed]{}", if t.parse_degraded { " (degraded: pattern fallback)" } else { "" });
    let _ = writeln!(s, "  instruction: {}", opt(&t.parsed.instruction));
    let _ = writeln!(s, "  input_text: {}", opt(&t.parsed.input_text));
    let _ = writeln!(s, "  question: {}", opt(&t.parsed.question));
    let _ = writeln!(s, "  url: {}", opt(&t.parsed.url));
    if !t.parsed.data_dict.is_empty() {
        let _ = writeln!(s, "  data_dict: {}", serde_json::to_string(&t.parsed.data_dict).unwrap_or_default());
    }
    if !t.parsed.categories.is_empty() {
        let _ = writeln!(s, "  categories: {}", t.parsed.categories.join(", "));
    }
    let _ = writeln!(s, "\n[domains] {}", or_dash(t.domains.domains.join("; ")));
    let _ = writeln!(s, "[selected actions] {}", or_dash(t.selected_actions.join(", ")));

    let _ = writeln!(s, "\n[plan] {} step(s)", t.plan.len());
    for (i, p) in t.plan.steps.iter().enumerate() {
        let _ = writeln!(s, "  {}. ({} {})", i + 1, p.schema, p.args.join(" "));
        match t.steps.get(i) {
            Some(r) => {
                let model = r.model.as_ref().map_or("-".to_string(), |m| m.local_name.clone());
                let _ = writeln!(s, "     model: {model}");
                if let Some(from) = &r.spec_from {
                    let _ = writeln!(s, "     spec: borrowed from {}", from.local_name);
                }
                for (k, v) in &r.bound_args {
                    let _ = writeln!(s, "     {k} = {} [{}]", summary(&v.value), v.source);
                }
                let status = match &r.status {
                    StepStatus::Ok => "ok".to_string(),
                    StepStatus::Err(e) => format!("FAILED at step {i}: {e}"),
                };
                let _ = writeln!(s, "     status: {status} ({} ms)", r.duration_ms);
            }
            None => {
                let _ = writeln!(s, "     status: skipped");
            }
        }
    }

    let _ = writeln!(s, "\n[selection]");
    for line in explain_selection(&t.selection).lines() {
        let _ = writeln!(s, "  {line}");
    }

    let _ = writeln!(s, "\n[timing] parse {} ms, plan {} ms, select {} ms", t.t_parse_ms, t.t_plan_ms, t.t_select_ms);
    let status = match t.final_status {
        FinalStatus::Ok => "Ok",
        FinalStatus::Err => "Err",
    };
    let _ = writeln!(s, "[status] {status}");
    if let Some(f) = &t.failure {
        let _ = writeln!(s, "[failure] {f}");
    }
    match &t.output {
        Some(a) => {
            let _ = writeln!(s, "[output]\n{}", summary(&a.value));
        }
        None => {
            let _ = writeln!(s, "[output] none");
        }
    }
    s
}

pub fn render_report_json(t: &ExecutionTrace) -> String {
    serde_json::to_string_pretty(t).expect("trace serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ckg::NodeId;
    use crate::planner::PlanStep;
    use std::collections::BTreeMap;

    fn trace(status: FinalStatus, steps: Vec<StepRecord>) -> ExecutionTrace {
        ExecutionTrace {
            query: "q".into(),
            parsed: ParsedQuery::default(),
            parse_degraded: false,
            domains: DomainSubset::default(),
            selected_actions: vec![],
            plan: Plan {
                steps: vec![
                    PlanStep { action: 0, schema: "a".into(), args: vec!["x".into()] },
                    PlanStep { action: 1, schema: "b".into(), args: vec!["x".into()] },
                ],
            },
            selection: SelectionResult::default(),
            steps,
            t_parse_ms: 1,
            t_plan_ms: 2,
            t_select_ms: 4,
            final_status: status,
            failure: None,
            output: None,
            config: serde_json::Value::Null,
        }
    }

    fn record(i: usize, status: StepStatus) -> StepRecord {
        StepRecord {
            index: i,
            action: "a".into(),
            model: Some(NodeId::model("m")),
            spec_from: None,
            bound_args: BTreeMap::new(),
            output_key: None,
            duration_ms: 1,
            status,
        }
    }

    #[test]
    fn failed_step_and_skipped_rest() {
        let t = trace(FinalStatus::Err, vec![record(0, StepStatus::Err("boom".into()))]);
        let r = render_report(&t);
        assert!(r.contains("FAILED at step 0: boom"));
        assert!(r.contains("status: skipped"));
        assert!(r.contains("[plan] 2 step(s)"));
    }

    #[test]
    fn json_round_trip() {
        let t = trace(FinalStatus::Ok, vec![record(0, StepStatus::Ok), record(1, StepStatus::Ok)]);
        let back: ExecutionTrace = serde_json::from_str(&render_report_json(&t)).unwrap();
        assert_eq!(back, t);
    }
}
