use std::collections::BTreeMap;

use super::{ActionSchema, Atom, DomainFile, PddlError, PredicateDecl};

/// Prefix of the 0-ary marker predicate each merged action adds, so that a
/// goal can require "this action has been performed".
pub const DONE_PREFIX: &str = "done_";

fn union_named(into: &mut Vec<(String, String)>, from: &[(String, String)]) -> Result<(), PddlError> {
    for (name, ty) in from {
        match into.iter().find(|(n, _)| n == name) {
            Some((_, existing)) if existing != ty => return Err(PddlError::TypeConflict(name.clone())),
            Some(_) => {}
            None => into.push((name.clone(), ty.clone())),
        }
    }
    Ok(())
}

/// Adds a `(done_<action>)` add-effect to every action and declares the
/// marker predicates. Applying it twice changes nothing.
pub fn with_done_markers(mut d: DomainFile) -> DomainFile {
    for action in &mut d.actions {
        let marker = Atom::new(format!("{DONE_PREFIX}{}", action.name), vec![]);
        if !action.add_effects.contains(&marker) {
            action.add_effects.push(marker.clone());
        }
        if !d.predicates.iter().any(|p| p.name == marker.predicate) {
            d.predicates.push(PredicateDecl { name: marker.predicate, params: vec![] });
        }
    }
    d
}

/// Unions a list of domains into one named `merged`.
///
/// Identical schemas deduplicate. Different schemas sharing a name are all
/// kept, each renamed `<domain>__<action>`. Every resulting action carries
/// a done marker (see [`with_done_markers`]).
pub fn merge_domains(ds: &[DomainFile]) -> Result<DomainFile, PddlError> {
    let mut merged = DomainFile::new("merged");
    merged.requirements.clear();
    for d in ds {
        merged.requirements.extend(d.requirements.iter().cloned());
        union_named(&mut merged.types, &d.types)?;
        union_named(&mut merged.constants, &d.constants)?;
        for p in &d.predicates {
            match merged.predicates.iter().find(|q| q.name == p.name) {
                Some(q) if !q.same_signature(p) => return Err(PddlError::PredicateConflict(p.name.clone())),
                Some(_) => {}
                None => merged.predicates.push(p.clone()),
            }
        }
    }

    // Distinct schemas per action name, in first-seen order, each tagged
    // with the domain it first came from.
    let mut order: Vec<String> = Vec::new();
    let mut variants: BTreeMap<String, Vec<(String, ActionSchema)>> = BTreeMap::new();
    for d in ds {
        for a in &d.actions {
            let entry = variants.entry(a.name.clone()).or_insert_with(|| {
                order.push(a.name.clone());
                Vec::new()
            });
            if !entry.iter().any(|(_, existing)| same_schema(existing, a)) {
                entry.push((d.name.clone(), a.clone()));
            }
        }
    }
    for name in order {
        let vs = &variants[&name];
        if vs.len() == 1 {
            merged.actions.push(vs[0].1.clone());
        } else {
            for (domain, schema) in vs {
                let mut renamed = schema.clone();
                renamed.name = format!("{domain}__{}", schema.name);
                let old_marker = Atom::new(format!("{DONE_PREFIX}{}", schema.name), vec![]);
                renamed.add_effects.retain(|e| *e != old_marker);
                merged.actions.push(renamed);
            }
        }
    }
    let merged = with_done_markers(merged);
    merged.validate()?;
    Ok(merged)
}

/// Schema equality ignoring done markers, so merging an already-merged
/// domain with one of its inputs still deduplicates.
fn same_schema(a: &ActionSchema, b: &ActionSchema) -> bool {
    let strip = |s: &ActionSchema| {
        let mut s = s.clone();
        s.add_effects.retain(|e| !(e.args.is_empty() && e.predicate.starts_with(DONE_PREFIX)));
        s
    };
    strip(a) == strip(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, Term};

    fn domain(name: &str, actions: &[(&str, &str)]) -> DomainFile {
        let mut text =
            format!("(define (domain {name}) (:types artifact) (:predicates (p ?x - artifact) (q ?x - artifact))");
        for (a, ty) in actions {
            text.push_str(&format!(
                "(:action {a} :parameters (?x - {ty}) :precondition (and (p ?x)) :effect (and (q ?x)))"
            ));
        }
        text.push(')');
        parse_domain(&text).unwrap()
    }

    #[test]
    fn disjoint_domains_union() {
        let a = domain("a", &[("a1", "artifact"), ("a2", "artifact")]);
        let b = domain("b", &[("b1", "artifact"), ("b2", "artifact"), ("b3", "artifact")]);
        let m = merge_domains(&[a, b]).unwrap();
        assert_eq!(m.name, "merged");
        assert_eq!(m.actions.len(), 5);
        assert_eq!(m.action_names(), vec!["a1", "a2", "b1", "b2", "b3"]);
        assert!(m.predicate("done_b3").is_some());
    }

    #[test]
    fn identical_actions_deduplicate() {
        let a = domain("a", &[("shared", "artifact")]);
        let b = domain("b", &[("shared", "artifact")]);
        let m = merge_domains(&[a, b]).unwrap();
        assert_eq!(m.action_names(), vec!["shared"]);
    }

    #[test]
    fn colliding_names_are_prefixed() {
        let a = domain("a", &[("run", "artifact")]);
        let mut b = domain("b", &[("run", "artifact")]);
        b.actions[0].params[0].ty = "object".into();
        let m = merge_domains(&[a, b]).unwrap();
        assert_eq!(m.action_names(), vec!["a__run", "b__run"]);
        let renamed = m.action("b__run").unwrap();
        assert!(renamed.add_effects.contains(&Atom::new("done_b__run", vec![])));
        assert!(!renamed.add_effects.contains(&Atom::new("done_run", vec![])));
    }

    #[test]
    fn predicate_conflict() {
        let a = domain("a", &[]);
        let b = parse_domain("(define (domain b) (:predicates (p)))").unwrap();
        assert_eq!(merge_domains(&[a, b]), Err(PddlError::PredicateConflict("p".into())));
    }

    #[test]
    fn merge_is_idempotent_on_single_input() {
        let a = domain("a", &[("a1", "artifact")]);
        let once = merge_domains(&[a]).unwrap();
        let twice = merge_domains(std::slice::from_ref(&once)).unwrap();
        assert_eq!(once, twice);
        assert_eq!(
            once.actions[0].add_effects,
            vec![Atom::new("q", vec![Term::Var("x".into())]), Atom::new("done_a1", vec![])]
        );
    }
}
