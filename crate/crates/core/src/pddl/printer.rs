use std::fmt::Write;

use super::{Atom, DomainFile, ProblemFile, TypedParam};

fn params(ps: &[TypedParam]) -> String {
    ps.iter().map(|p| format!("?{} - {}", p.name, p.ty)).collect::<Vec<_>>().join(" ")
}

fn conj(atoms: &[Atom]) -> String {
    let mut s = String::from("(and");
    for a in atoms {
        write!(s, " {a}").unwrap();
    }
    s.push(')');
    s
}

/// Canonical text: two-space indent, lowercase keywords, sections in the
/// order requirements, types, constants, predicates, actions.
pub fn print_domain(d: &DomainFile) -> String {
    let mut out = String::new();
    writeln!(out, "(define (domain {})", d.name).unwrap();
    if !d.requirements.is_empty() {
        let reqs: Vec<String> = d.requirements.iter().map(|r| format!(":{r}")).collect();
        writeln!(out, "  (:requirements {})", reqs.join(" ")).unwrap();
    }
    if !d.types.is_empty() {
        out.push_str("  (:types");
        for (t, parent) in &d.types {
            write!(out, "\n    {t} - {parent}").unwrap();
        }
        out.push_str(")\n");
    }
    if !d.constants.is_empty() {
        out.push_str("  (:constants");
        for (c, t) in &d.constants {
            write!(out, "\n    {c} - {t}").unwrap();
        }
        out.push_str(")\n");
    }
    out.push_str("  (:predicates");
    for p in &d.predicates {
        if p.params.is_empty() {
            write!(out, "\n    ({})", p.name).unwrap();
        } else {
            write!(out, "\n    ({} {})", p.name, params(&p.params)).unwrap();
        }
    }
    out.push_str(")\n");
    for a in &d.actions {
        if !a.produces.is_empty() {
            writeln!(out, "  ;; produces: {}", a.produces.join(", ")).unwrap();
        }
        writeln!(out, "  (:action {}", a.name).unwrap();
        writeln!(out, "    :parameters ({})", params(&a.params)).unwrap();
        writeln!(out, "    :precondition {}", conj(&a.precondition)).unwrap();
        let mut effect = String::from("(and");
        for e in &a.add_effects {
            write!(effect, " {e}").unwrap();
        }
        for e in &a.del_effects {
            write!(effect, " (not {e})").unwrap();
        }
        effect.push(')');
        writeln!(out, "    :effect {effect})").unwrap();
    }
    out.push_str(")\n");
    out
}

pub fn print_problem(p: &ProblemFile) -> String {
    let mut out = String::new();
    writeln!(out, "(define (problem {})", p.name).unwrap();
    writeln!(out, "  (:domain {})", p.domain_name).unwrap();
    out.push_str("  (:objects");
    for (o, t) in &p.objects {
        write!(out, "\n    {o} - {t}").unwrap();
    }
    out.push_str(")\n  (:init");
    for a in &p.init {
        write!(out, "\n    {a}").unwrap();
    }
    out.push_str(")\n  (:goal (and");
    for g in &p.goal {
        write!(out, "\n    {g}").unwrap();
    }
    out.push_str(")))\n");
    out
}
