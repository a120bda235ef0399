//! A STRIPS + typing subset of PDDL: data model, parser, printer, domain
//! merging, problem synthesis from a parsed query, and grounding.
//!
//! Supported: `:strips`, `:typing`, domain `:constants`, positive
//! conjunctive preconditions and goals, add and delete effects. An action
//! may be preceded by a structured comment naming the artifact types it
//! produces:
//!
//! ```text
//! ;; produces: text
//! (:action automatic_speech_recognition ...)
//! ```

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

mod ground;
mod merge;
mod parser;
mod printer;
mod problem;

pub use ground::{ground, GroundAction, GroundedTask, DEFAULT_MAX_GROUND_ACTIONS};
pub use merge::{merge_domains, with_done_markers, DONE_PREFIX};
pub use parser::{parse_domain, parse_problem};
pub use printer::{print_domain, print_problem};
pub use problem::{modality_for_path, synthesize_problem, ARTIFACT_TYPE, AVAILABLE, MODALITY_TYPE};

pub const ROOT_TYPE: &str = "object";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PddlError {
    #[error("syntax error at {line}:{col}: expected {expected}")]
    Syntax { line: usize, col: usize, expected: String },
    #[error("unsupported PDDL feature: {0}")]
    UnsupportedFeature(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("predicate `{0}` declared with conflicting signatures")]
    PredicateConflict(String),
    #[error("`{0}` declared with conflicting types")]
    TypeConflict(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("no input artifact can satisfy action `{action}`")]
    NoInputArtifact { action: String },
    #[error("grounding produces more than {cap} actions")]
    GroundingExplosion { cap: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypedParam {
    /// Variable name without the leading `?`.
    pub name: String,
    pub ty: String,
}

impl TypedParam {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        TypedParam { name: name.into(), ty: ty.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<TypedParam>,
}

impl PredicateDecl {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn same_signature(&self, other: &PredicateDecl) -> bool {
        self.name == other.name
            && self.params.len() == other.params.len()
            && self.params.iter().zip(&other.params).all(|(a, b)| a.ty == b.ty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => f.write_str(c),
        }
    }
}

/// A lifted atom appearing in an action schema.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { predicate: predicate.into(), args }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: Vec<String>) -> Self {
        GroundAtom { predicate: predicate.into(), args }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedParam>,
    pub precondition: Vec<Atom>,
    pub add_effects: Vec<Atom>,
    pub del_effects: Vec<Atom>,
    /// Artifact types this action outputs, from the `;; produces:` comment.
    pub produces: Vec<String>,
}

impl ActionSchema {
    pub fn new(name: impl Into<String>) -> Self {
        ActionSchema {
            name: name.into(),
            params: Vec::new(),
            precondition: Vec::new(),
            add_effects: Vec::new(),
            del_effects: Vec::new(),
            produces: Vec::new(),
        }
    }

    fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.precondition.iter().chain(&self.add_effects).chain(&self.del_effects)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainFile {
    pub name: String,
    pub requirements: BTreeSet<String>,
    /// `(type, parent)` pairs; untyped declarations get parent `object`.
    pub types: Vec<(String, String)>,
    /// Domain constants as `(name, type)`.
    pub constants: Vec<(String, String)>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
}

impl DomainFile {
    pub fn new(name: impl Into<String>) -> Self {
        DomainFile {
            name: name.into(),
            requirements: ["strips", "typing"].into_iter().map(String::from).collect(),
            types: Vec::new(),
            constants: Vec::new(),
            predicates: Vec::new(),
            actions: Vec::new(),
        }
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action_names(&self) -> Vec<String> {
        self.actions.iter().map(|a| a.name.clone()).collect()
    }

    /// Parent of a declared type, `None` for `object` or unknown names.
    pub fn parent_of(&self, ty: &str) -> Option<&str> {
        self.types.iter().find(|(t, _)| t == ty).map(|(_, p)| p.as_str())
    }

    pub fn is_declared_type(&self, ty: &str) -> bool {
        ty == ROOT_TYPE || self.types.iter().any(|(t, _)| t == ty)
    }

    /// Whether `ty` equals `ancestor` or derives from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        if ancestor == ROOT_TYPE {
            return true;
        }
        let mut current = ty;
        for _ in 0..=self.types.len() {
            if current == ancestor {
                return true;
            }
            match self.parent_of(current) {
                Some(p) => current = p,
                None => return false,
            }
        }
        false
    }

    pub fn constant_type(&self, name: &str) -> Option<&str> {
        self.constants.iter().find(|(c, _)| c == name).map(|(_, t)| t.as_str())
    }

    /// Structural checks: unique action names, declared predicates with
    /// matching arity, bound variables, declared types and constants, and
    /// disjoint add/delete lists.
    pub fn validate(&self) -> Result<(), PddlError> {
        let invalid = |m: String| Err(PddlError::InvalidDomain(m));
        let mut seen = BTreeSet::new();
        for (t, parent) in &self.types {
            if !self.is_declared_type(parent) {
                return invalid(format!("type `{t}` has undeclared parent `{parent}`"));
            }
        }
        for (c, t) in &self.constants {
            if !self.is_declared_type(t) {
                return invalid(format!("constant `{c}` has undeclared type `{t}`"));
            }
        }
        let mut preds = BTreeSet::new();
        for p in &self.predicates {
            if !preds.insert(&p.name) {
                return invalid(format!("predicate `{}` declared twice", p.name));
            }
            for param in &p.params {
                if !self.is_declared_type(&param.ty) {
                    return invalid(format!("predicate `{}` uses undeclared type `{}`", p.name, param.ty));
                }
            }
        }
        for a in &self.actions {
            if !seen.insert(&a.name) {
                return invalid(format!("action `{}` declared twice", a.name));
            }
            for p in &a.params {
                if !self.is_declared_type(&p.ty) {
                    return invalid(format!("action `{}` uses undeclared type `{}`", a.name, p.ty));
                }
            }
            for atom in a.atoms() {
                let decl = self.predicate(&atom.predicate).ok_or_else(|| {
                    PddlError::InvalidDomain(format!(
                        "action `{}` uses undeclared predicate `{}`",
                        a.name, atom.predicate
                    ))
                })?;
                if decl.arity() != atom.args.len() {
                    return invalid(format!(
                        "action `{}` uses `{}` with {} arguments, declared with {}",
                        a.name,
                        atom.predicate,
                        atom.args.len(),
                        decl.arity()
                    ));
                }
                for term in &atom.args {
                    match term {
                        Term::Var(v) if !a.params.iter().any(|p| &p.name == v) => {
                            return invalid(format!("action `{}` uses unbound variable `?{v}`", a.name));
                        }
                        Term::Const(c) if self.constant_type(c).is_none() => {
                            return invalid(format!("action `{}` uses undeclared constant `{c}`", a.name));
                        }
                        _ => {}
                    }
                }
            }
            if let Some(atom) = a.add_effects.iter().find(|x| a.del_effects.contains(x)) {
                return invalid(format!("action `{}` both adds and deletes {atom}", a.name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemFile {
    pub name: String,
    pub domain_name: String,
    /// Objects as `(name, type)`.
    pub objects: Vec<(String, String)>,
    pub init: BTreeSet<GroundAtom>,
    pub goal: Vec<GroundAtom>,
}

impl ProblemFile {
    /// Checks atoms against the domain: declared predicates, arity, known
    /// objects and argument types.
    pub fn validate(&self, domain: &DomainFile) -> Result<(), PddlError> {
        let invalid = |m: String| Err(PddlError::InvalidProblem(m));
        for (o, t) in &self.objects {
            if !domain.is_declared_type(t) {
                return invalid(format!("object `{o}` has undeclared type `{t}`"));
            }
        }
        let type_of = |name: &str| -> Option<String> {
            self.objects
                .iter()
                .find(|(o, _)| o == name)
                .map(|(_, t)| t.clone())
                .or_else(|| domain.constant_type(name).map(String::from))
        };
        for atom in self.init.iter().chain(&self.goal) {
            let Some(decl) = domain.predicate(&atom.predicate) else {
                return invalid(format!("undeclared predicate `{}`", atom.predicate));
            };
            if decl.arity() != atom.args.len() {
                return invalid(format!("{atom} has wrong arity"));
            }
            for (arg, param) in atom.args.iter().zip(&decl.params) {
                let Some(ty) = type_of(arg) else {
                    return invalid(format!("{atom} uses unknown object `{arg}`"));
                };
                if !domain.is_subtype(&ty, &param.ty) {
                    return invalid(format!("{atom}: `{arg}` is not a `{}`", param.ty));
                }
            }
        }
        Ok(())
    }
}
