use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Atom, DomainFile, GroundAtom, PddlError, ProblemFile, Term};
use crate::bitset::AtomSet;

pub const DEFAULT_MAX_GROUND_ACTIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub schema: String,
    pub args: Vec<String>,
    pub pre: AtomSet,
    pub add: AtomSet,
    pub del: AtomSet,
}

impl GroundAction {
    pub fn applicable(&self, state: &AtomSet) -> bool {
        self.pre.is_subset(state)
    }

    /// Deletes first, then adds.
    pub fn apply(&self, state: &AtomSet) -> AtomSet {
        let mut next = state.difference(&self.del);
        next.union_with(&self.add);
        next
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.schema)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// Propositional form of a planning problem over an indexed atom universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundedTask {
    pub atoms: Vec<GroundAtom>,
    pub init: AtomSet,
    pub goal: AtomSet,
    pub actions: Vec<GroundAction>,
}

impl GroundedTask {
    /// Builds a task directly from index sets; used by generators and tests.
    pub fn from_parts(atoms: Vec<GroundAtom>, init: AtomSet, goal: AtomSet, actions: Vec<GroundAction>) -> Self {
        GroundedTask { atoms, init, goal, actions }
    }

    pub fn atom_index(&self, atom: &GroundAtom) -> Option<usize> {
        self.atoms.binary_search(atom).ok()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Atoms reachable from init when delete effects are ignored.
    pub fn relaxed_reachable(&self) -> AtomSet {
        let mut reached = self.init.clone();
        loop {
            let mut changed = false;
            for a in &self.actions {
                if a.pre.is_subset(&reached) && !a.add.is_subset(&reached) {
                    reached.union_with(&a.add);
                    changed = true;
                }
            }
            if !changed {
                return reached;
            }
        }
    }
}

fn objects_by_type<'a>(domain: &'a DomainFile, problem: &'a ProblemFile) -> Vec<(&'a str, &'a str)> {
    let mut all: BTreeMap<&str, &str> = BTreeMap::new();
    for (c, t) in &domain.constants {
        all.insert(c, t);
    }
    for (o, t) in &problem.objects {
        all.insert(o, t);
    }
    all.into_iter().collect()
}

fn substitute(atom: &Atom, binding: &BTreeMap<&str, &str>) -> GroundAtom {
    GroundAtom::new(
        atom.predicate.clone(),
        atom.args
            .iter()
            .map(|t| match t {
                Term::Var(v) => binding[v.as_str()].to_string(),
                Term::Const(c) => c.clone(),
            })
            .collect(),
    )
}

/// Instantiates every action schema over all type-consistent object
/// tuples. Atoms are indexed in lexicographic order; actions follow schema
/// order, then argument tuples in object-name order.
/// Schema name, arguments, precondition, add and delete atoms.
type Instantiated = (String, Vec<String>, Vec<GroundAtom>, Vec<GroundAtom>, Vec<GroundAtom>);

pub fn ground(domain: &DomainFile, problem: &ProblemFile, max_actions: usize) -> Result<GroundedTask, PddlError> {
    let objects = objects_by_type(domain, problem);
    let candidates =
        |ty: &str| -> Vec<&str> { objects.iter().filter(|(_, t)| domain.is_subtype(t, ty)).map(|(o, _)| *o).collect() };

    // Count before instantiating so an explosion fails fast.
    let mut per_schema: Vec<Vec<Vec<&str>>> = Vec::new();
    let mut total: usize = 0;
    for schema in &domain.actions {
        let domains: Vec<Vec<&str>> = schema.params.iter().map(|p| candidates(&p.ty)).collect();
        let count = domains.iter().try_fold(1usize, |acc, d| acc.checked_mul(d.len())).unwrap_or(usize::MAX);
        total = total.saturating_add(count);
        if total > max_actions {
            return Err(PddlError::GroundingExplosion { cap: max_actions });
        }
        per_schema.push(domains);
    }

    let mut lifted: Vec<Instantiated> = Vec::new();
    let mut universe: BTreeSet<GroundAtom> = BTreeSet::new();
    universe.extend(problem.init.iter().cloned());
    universe.extend(problem.goal.iter().cloned());
    for (schema, domains) in domain.actions.iter().zip(&per_schema) {
        let mut tuple: Vec<&str> = Vec::with_capacity(domains.len());
        for_each_tuple(domains, &mut tuple, &mut |args| {
            let binding: BTreeMap<&str, &str> =
                schema.params.iter().map(|p| p.name.as_str()).zip(args.iter().copied()).collect();
            let pre: Vec<GroundAtom> = schema.precondition.iter().map(|a| substitute(a, &binding)).collect();
            let add: Vec<GroundAtom> = schema.add_effects.iter().map(|a| substitute(a, &binding)).collect();
            let del: Vec<GroundAtom> = schema.del_effects.iter().map(|a| substitute(a, &binding)).collect();
            universe.extend(pre.iter().chain(&add).chain(&del).cloned());
            lifted.push((schema.name.clone(), args.iter().map(|s| s.to_string()).collect(), pre, add, del));
        });
    }

    let atoms: Vec<GroundAtom> = universe.into_iter().collect();
    let n = atoms.len();
    let index = |a: &GroundAtom| atoms.binary_search(a).expect("atom is in the universe");
    let set_of = |xs: &[GroundAtom]| AtomSet::from_indices(n, xs.iter().map(index));
    let actions = lifted
        .iter()
        .map(|(schema, args, pre, add, del)| GroundAction {
            schema: schema.clone(),
            args: args.clone(),
            pre: set_of(pre),
            add: set_of(add),
            del: set_of(del),
        })
        .collect();
    let init = AtomSet::from_indices(n, problem.init.iter().map(index));
    let goal = set_of(&problem.goal);
    Ok(GroundedTask { atoms, init, goal, actions })
}

fn for_each_tuple<'a>(domains: &[Vec<&'a str>], tuple: &mut Vec<&'a str>, f: &mut dyn FnMut(&[&'a str])) {
    if tuple.len() == domains.len() {
        f(tuple);
        return;
    }
    for &o in &domains[tuple.len()] {
        tuple.push(o);
        for_each_tuple(domains, tuple, f);
        tuple.pop();
    }
}
