//! Best-first width search over a grounded task, plus plan validation and a
//! breadth-first oracle used to cross-check it.
//!
//! Nodes are ordered by `(novelty, unsatisfied goals, path cost)` with FIFO
//! tie-breaking. Novelty is the size of the smallest tuple of true atoms
//! (up to `max_width`) never seen in a previously generated state; nodes
//! whose novelty exceeds `max_width` are discarded. If that pruned search
//! runs dry after discarding something, a second pass runs the same
//! ordering without pruning, so the planner fails only when no plan exists.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::AtomSet;
use crate::pddl::GroundedTask;

pub type State = AtomSet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("no plan found: search space exhausted")]
    NoPlanFound,
    #[error("search budget exceeded after {0} expansions")]
    BudgetExceeded(usize),
    #[error("oracle refuses tasks with {actions} ground actions (limit {limit})")]
    ScaleGuard { actions: usize, limit: usize },
    #[error("max_width must be 1 or 2, got {0}")]
    InvalidWidth(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieBreak {
    #[default]
    Fifo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub max_width: usize,
    pub max_expansions: usize,
    pub tie_break: TieBreak,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { max_width: 2, max_expansions: 1_000_000, tie_break: TieBreak::Fifo }
    }
}

/// Atom tuples (sizes 1 and 2) seen so far.
#[derive(Debug, Clone, Default)]
pub struct NoveltyTable {
    singles: HashSet<usize>,
    pairs: HashSet<(usize, usize)>,
}

impl NoveltyTable {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Smallest `k <= max_width` such that `state` holds a `k`-tuple of true
/// atoms absent from `seen`, or `max_width + 1`. Records every new tuple.
pub fn novelty(state: &State, seen: &mut NoveltyTable, max_width: usize) -> usize {
    let atoms: Vec<usize> = state.iter().collect();
    let mut best = max_width + 1;
    for &a in &atoms {
        if seen.singles.insert(a) {
            best = best.min(1);
        }
    }
    if max_width >= 2 {
        for (i, &a) in atoms.iter().enumerate() {
            for &b in &atoms[i + 1..] {
                if seen.pairs.insert((a, b)) {
                    best = best.min(2);
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    /// Index into the grounded task's action list.
    pub action: usize,
    pub schema: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn from_indices(task: &GroundedTask, indices: &[usize]) -> Self {
        Plan {
            steps: indices
                .iter()
                .map(|&i| PlanStep {
                    action: i,
                    schema: task.actions[i].schema.clone(),
                    args: task.actions[i].args.clone(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn action_names(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.schema.clone()).collect()
    }
}

/// Simulates the plan from the initial state. Never panics on bad input.
pub fn validate_plan(task: &GroundedTask, plan: &Plan) -> bool {
    let mut state = task.init.clone();
    for step in &plan.steps {
        let Some(action) = task.actions.get(step.action) else {
            return false;
        };
        if !action.applicable(&state) {
            return false;
        }
        state = action.apply(&state);
    }
    task.goal.is_subset(&state)
}

struct Node {
    state: State,
    parent: Option<(usize, usize)>,
}

fn extract(nodes: &[Node], mut idx: usize) -> Vec<usize> {
    let mut actions = Vec::new();
    while let Some((parent, action)) = nodes[idx].parent {
        actions.push(action);
        idx = parent;
    }
    actions.reverse();
    actions
}

enum Outcome {
    Found(Vec<usize>),
    Exhausted { pruned: usize },
}

fn search(task: &GroundedTask, cfg: &SearchConfig, prune: bool, expansions: &mut usize) -> Result<Outcome, PlanError> {
    let mut table = NoveltyTable::new();
    let mut nodes = vec![Node { state: task.init.clone(), parent: None }];
    let mut generated: HashSet<State> = HashSet::from([task.init.clone()]);
    let mut open = BinaryHeap::new();
    let mut seq = 0usize;
    let root_novelty = novelty(&task.init, &mut table, cfg.max_width);
    open.push(Reverse((root_novelty, task.goal.count_missing(&task.init), 0usize, seq, 0usize)));
    let mut pruned = 0;

    while let Some(Reverse((_, _, cost, _, idx))) = open.pop() {
        *expansions += 1;
        if *expansions > cfg.max_expansions {
            return Err(PlanError::BudgetExceeded(cfg.max_expansions));
        }
        for (ai, action) in task.actions.iter().enumerate() {
            if !action.applicable(&nodes[idx].state) {
                continue;
            }
            let next = action.apply(&nodes[idx].state);
            if !generated.insert(next.clone()) {
                continue;
            }
            let nov = novelty(&next, &mut table, cfg.max_width);
            nodes.push(Node { state: next, parent: Some((idx, ai)) });
            let child = nodes.len() - 1;
            let missing = task.goal.count_missing(&nodes[child].state);
            if missing == 0 {
                return Ok(Outcome::Found(extract(&nodes, child)));
            }
            if prune && nov > cfg.max_width {
                pruned += 1;
                continue;
            }
            seq += 1;
            open.push(Reverse((nov, missing, cost + 1, seq, child)));
        }
    }
    Ok(Outcome::Exhausted { pruned })
}

pub fn bfws_plan(task: &GroundedTask, cfg: &SearchConfig) -> Result<Plan, PlanError> {
    if !(1..=2).contains(&cfg.max_width) {
        return Err(PlanError::InvalidWidth(cfg.max_width));
    }
    if task.goal.is_subset(&task.init) {
        return Ok(Plan::default());
    }
    let mut expansions = 0;
    match search(task, cfg, true, &mut expansions)? {
        Outcome::Found(p) => return Ok(Plan::from_indices(task, &p)),
        Outcome::Exhausted { pruned: 0 } => return Err(PlanError::NoPlanFound),
        Outcome::Exhausted { .. } => {}
    }
    match search(task, cfg, false, &mut expansions)? {
        Outcome::Found(p) => Ok(Plan::from_indices(task, &p)),
        Outcome::Exhausted { .. } => Err(PlanError::NoPlanFound),
    }
}

pub const ORACLE_MAX_ACTIONS: usize = 2000;

/// Breadth-first search returning a shortest plan. Test oracle only.
pub fn bfs_oracle(task: &GroundedTask) -> Result<Plan, PlanError> {
    if task.actions.len() > ORACLE_MAX_ACTIONS {
        return Err(PlanError::ScaleGuard { actions: task.actions.len(), limit: ORACLE_MAX_ACTIONS });
    }
    if task.goal.is_subset(&task.init) {
        return Ok(Plan::default());
    }
    let mut nodes = vec![Node { state: task.init.clone(), parent: None }];
    let mut visited: HashSet<State> = HashSet::from([task.init.clone()]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        for (ai, action) in task.actions.iter().enumerate() {
            if !action.applicable(&nodes[idx].state) {
                continue;
            }
            let next = action.apply(&nodes[idx].state);
            if !visited.insert(next.clone()) {
                continue;
            }
            let done = task.goal.is_subset(&next);
            nodes.push(Node { state: next, parent: Some((idx, ai)) });
            let child = nodes.len() - 1;
            if done {
                return Ok(Plan::from_indices(task, &extract(&nodes, child)));
            }
            queue.push_back(child);
        }
    }
    Err(PlanError::NoPlanFound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{GroundAction, GroundAtom};

    fn atoms(n: usize) -> Vec<GroundAtom> {
        (0..n).map(|i| GroundAtom::new(format!("p{i:02}"), vec![])).collect()
    }

    fn act(n: usize, name: &str, pre: &[usize], add: &[usize], del: &[usize]) -> GroundAction {
        GroundAction {
            schema: name.into(),
            args: vec![],
            pre: AtomSet::from_indices(n, pre.iter().copied()),
            add: AtomSet::from_indices(n, add.iter().copied()),
            del: AtomSet::from_indices(n, del.iter().copied()),
        }
    }

    fn task(n: usize, init: &[usize], goal: &[usize], actions: Vec<GroundAction>) -> GroundedTask {
        GroundedTask::from_parts(
            atoms(n),
            AtomSet::from_indices(n, init.iter().copied()),
            AtomSet::from_indices(n, goal.iter().copied()),
            actions,
        )
    }

    #[test]
    fn first_state_is_novel_and_repeat_is_not() {
        let mut table = NoveltyTable::new();
        let s = AtomSet::from_indices(3, [0]);
        assert_eq!(novelty(&s, &mut table, 2), 1);
        assert_eq!(novelty(&s, &mut table, 2), 3);
        assert_eq!(novelty(&s, &mut table, 1), 2);
    }

    #[test]
    fn pair_novelty() {
        // Universe {0,1,2}: see {0,1} and {2}, then {0,2} has only a new pair.
        let mut table = NoveltyTable::new();
        assert_eq!(novelty(&AtomSet::from_indices(3, [0, 1]), &mut table, 2), 1);
        assert_eq!(novelty(&AtomSet::from_indices(3, [2]), &mut table, 2), 1);
        assert_eq!(novelty(&AtomSet::from_indices(3, [0, 2]), &mut table, 2), 2);
        assert_eq!(novelty(&AtomSet::from_indices(3, [1, 2]), &mut table, 2), 2);
        assert_eq!(novelty(&AtomSet::from_indices(3, [0, 1, 2]), &mut table, 2), 3);
    }

    #[test]
    fn empty_state_has_no_novelty() {
        let mut table = NoveltyTable::new();
        assert_eq!(novelty(&AtomSet::empty(4), &mut table, 2), 3);
    }

    #[test]
    fn one_step_plan() {
        let t = task(2, &[0], &[1], vec![act(2, "go", &[0], &[1], &[])]);
        let p = bfws_plan(&t, &SearchConfig::default()).unwrap();
        assert_eq!(p.action_names(), vec!["go"]);
        assert!(validate_plan(&t, &p));
        assert_eq!(bfs_oracle(&t).unwrap(), p);
    }

    #[test]
    fn goal_in_init_gives_empty_plan() {
        let t = task(1, &[0], &[0], vec![]);
        assert!(bfws_plan(&t, &SearchConfig::default()).unwrap().is_empty());
        assert!(validate_plan(&t, &Plan::default()));
    }

    #[test]
    fn chain_is_ordered() {
        // 0 audio, 1 text, 2 done_asr, 3 done_ner
        let t = task(4, &[0], &[2, 3], vec![act(4, "ner", &[1], &[3], &[]), act(4, "asr", &[0], &[1, 2], &[])]);
        let p = bfws_plan(&t, &SearchConfig::default()).unwrap();
        assert_eq!(p.action_names(), vec!["asr", "ner"]);
        assert_eq!(bfs_oracle(&t).unwrap().action_names(), vec!["asr", "ner"]);
    }

    #[test]
    fn out_of_order_plan_is_invalid() {
        let t = task(4, &[0], &[2, 3], vec![act(4, "ner", &[1], &[3], &[]), act(4, "asr", &[0], &[1, 2], &[])]);
        assert!(!validate_plan(&t, &Plan::from_indices(&t, &[0, 1])));
        assert!(validate_plan(&t, &Plan::from_indices(&t, &[1, 0])));
        let bogus = Plan { steps: vec![PlanStep { action: 9, schema: "x".into(), args: vec![] }] };
        assert!(!validate_plan(&t, &bogus));
    }

    #[test]
    fn unreachable_goal() {
        let t = task(2, &[0], &[1], vec![act(2, "noop", &[0], &[0], &[])]);
        assert_eq!(bfws_plan(&t, &SearchConfig::default()), Err(PlanError::NoPlanFound));
        assert_eq!(bfs_oracle(&t), Err(PlanError::NoPlanFound));
    }

    #[test]
    fn width_must_be_one_or_two() {
        let t = task(1, &[], &[0], vec![]);
        let cfg = SearchConfig { max_width: 3, ..Default::default() };
        assert_eq!(bfws_plan(&t, &cfg), Err(PlanError::InvalidWidth(3)));
    }

    #[test]
    fn budget_is_enforced() {
        // A counter that must be walked through many states.
        let n = 8;
        let mut actions = Vec::new();
        for i in 0..n - 1 {
            actions.push(act(n, &format!("step{i}"), &[i], &[i + 1], &[i]));
        }
        let t = task(n, &[0], &[n - 1], actions);
        let cfg = SearchConfig { max_expansions: 3, ..Default::default() };
        assert_eq!(bfws_plan(&t, &cfg), Err(PlanError::BudgetExceeded(3)));
        assert_eq!(bfws_plan(&t, &SearchConfig::default()).unwrap().len(), n - 1);
    }

    #[test]
    fn pruned_search_falls_back_to_complete_pass() {
        // Reaching the goal requires revisiting atom combinations that width-1
        // novelty has already seen: toggle 0 off and on again while 1 holds.
        let t = task(
            3,
            &[0],
            &[2],
            vec![
                act(3, "a", &[0], &[1], &[0]),
                act(3, "b", &[1], &[0], &[1]),
                act(3, "c", &[0], &[1], &[]),
                act(3, "goal", &[0, 1], &[2], &[]),
            ],
        );
        let cfg = SearchConfig { max_width: 1, ..Default::default() };
        let p = bfws_plan(&t, &cfg).unwrap();
        assert!(validate_plan(&t, &p));
    }

    #[test]
    fn search_is_deterministic() {
        let t = task(
            5,
            &[0],
            &[3, 4],
            vec![
                act(5, "x", &[0], &[1], &[]),
                act(5, "y", &[0], &[2], &[]),
                act(5, "z", &[1], &[3], &[]),
                act(5, "w", &[2], &[4], &[]),
                act(5, "v", &[1, 2], &[3, 4], &[]),
            ],
        );
        let a = bfws_plan(&t, &SearchConfig::default()).unwrap();
        let b = bfws_plan(&t, &SearchConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(validate_plan(&t, &a));
    }
}
