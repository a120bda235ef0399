use std::collections::BTreeSet;

use super::{
    ActionSchema, Atom, DomainFile, GroundAtom, PddlError, PredicateDecl, ProblemFile, Term, TypedParam, ROOT_TYPE,
};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Sexpr {
    List(Vec<Sexpr>, Pos),
    Sym(String, Pos),
    /// A `;; produces: a, b` annotation.
    Produces(Vec<String>, Pos),
}

impl Sexpr {
    fn pos(&self) -> Pos {
        match self {
            Sexpr::List(_, p) | Sexpr::Sym(_, p) | Sexpr::Produces(_, p) => *p,
        }
    }
}

fn syntax(pos: Pos, expected: impl Into<String>) -> PddlError {
    PddlError::Syntax { line: pos.line, col: pos.col, expected: expected.into() }
}

#[derive(Debug)]
enum Token {
    Open(Pos),
    Close(Pos),
    Sym(String, Pos),
    Produces(Vec<String>, Pos),
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    let bump = |c: char, line: &mut usize, col: &mut usize| {
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            '(' => {
                tokens.push(Token::Open(pos));
                chars.next();
                bump(c, &mut line, &mut col);
            }
            ')' => {
                tokens.push(Token::Close(pos));
                chars.next();
                bump(c, &mut line, &mut col);
            }
            ';' => {
                let mut comment = String::new();
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    comment.push(c);
                    chars.next();
                    bump(c, &mut line, &mut col);
                }
                let body = comment.trim_start_matches(';').trim();
                if let Some(rest) = body.strip_prefix("produces:") {
                    let tags = rest.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect();
                    tokens.push(Token::Produces(tags, pos));
                }
            }
            c if c.is_whitespace() => {
                chars.next();
                bump(c, &mut line, &mut col);
            }
            _ => {
                let mut sym = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    sym.push(c);
                    chars.next();
                    bump(c, &mut line, &mut col);
                }
                tokens.push(Token::Sym(sym, pos));
            }
        }
    }
    tokens
}

fn read_sexpr(text: &str) -> Result<Sexpr, PddlError> {
    let tokens = tokenize(text);
    let mut stack: Vec<(Vec<Sexpr>, Pos)> = Vec::new();
    let mut result: Option<Sexpr> = None;
    let end_pos = {
        let lines = text.lines().count().max(1);
        Pos { line: lines, col: text.lines().last().map_or(1, |l| l.chars().count() + 1) }
    };
    for tok in tokens {
        match tok {
            Token::Open(p) => {
                if result.is_some() {
                    return Err(syntax(p, "end of input"));
                }
                stack.push((Vec::new(), p));
            }
            Token::Close(p) => {
                let (items, open) = stack.pop().ok_or_else(|| syntax(p, "`(` before `)`"))?;
                let list = Sexpr::List(items, open);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => result = Some(list),
                }
            }
            Token::Sym(s, p) => match stack.last_mut() {
                Some((parent, _)) => parent.push(Sexpr::Sym(s, p)),
                None => return Err(syntax(p, "`(`")),
            },
            Token::Produces(tags, p) => {
                if let Some((parent, _)) = stack.last_mut() {
                    parent.push(Sexpr::Produces(tags, p));
                }
            }
        }
    }
    if !stack.is_empty() {
        return Err(syntax(end_pos, "`)`"));
    }
    result.ok_or_else(|| syntax(Pos { line: 1, col: 1 }, "`(define ...)`"))
}

/// Drops `produces` annotations, which are only meaningful before actions.
fn items(list: &[Sexpr]) -> Vec<&Sexpr> {
    list.iter().filter(|s| !matches!(s, Sexpr::Produces(..))).collect()
}

fn expect_list<'a>(s: &'a Sexpr, what: &str) -> Result<&'a [Sexpr], PddlError> {
    match s {
        Sexpr::List(items, _) => Ok(items),
        other => Err(syntax(other.pos(), what)),
    }
}

fn expect_sym<'a>(s: Option<&&'a Sexpr>, fallback: Pos, what: &str) -> Result<&'a str, PddlError> {
    match s {
        Some(Sexpr::Sym(v, _)) => Ok(v),
        Some(other) => Err(syntax(other.pos(), what)),
        None => Err(syntax(fallback, what)),
    }
}

fn keyword(s: &str) -> String {
    s.to_ascii_lowercase()
}

fn unsupported_section(kw: &str) -> Option<&'static str> {
    Some(match kw {
        ":durative-action" => "durative-actions",
        ":functions" => "numeric-fluents",
        ":derived" => "derived-predicates",
        ":constraints" => "constraints",
        ":process" | ":event" => "processes",
        _ => return None,
    })
}

fn unsupported_requirement(req: &str) -> Option<String> {
    match req {
        "strips" | "typing" => None,
        other => Some(other.to_string()),
    }
}

fn unsupported_connective(head: &str) -> Option<&'static str> {
    Some(match head {
        "not" => "negative-preconditions",
        "or" | "imply" => "disjunctive-preconditions",
        "forall" | "exists" => "quantified-preconditions",
        "when" => "conditional-effects",
        "=" => "equality",
        "increase" | "decrease" | "assign" | "scale-up" | "scale-down" | "<" | ">" | "<=" | ">=" => "numeric-fluents",
        _ => return None,
    })
}

/// Parses `a b - t c - u d` into typed names. Names are returned verbatim
/// (including any `?`).
fn typed_list(list: &[&Sexpr], pos: Pos) -> Result<Vec<(String, String)>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < list.len() {
        match list[i] {
            Sexpr::Sym(s, p) if s == "-" => {
                let ty = match list.get(i + 1) {
                    Some(Sexpr::Sym(t, _)) => t.clone(),
                    Some(Sexpr::List(inner, ip)) => {
                        let head = inner.first().and_then(|h| match h {
                            Sexpr::Sym(h, _) => Some(keyword(h)),
                            _ => None,
                        });
                        if head.as_deref() == Some("either") {
                            return Err(PddlError::UnsupportedFeature("either-types".into()));
                        }
                        return Err(syntax(*ip, "type name"));
                    }
                    _ => return Err(syntax(*p, "type name after `-`")),
                };
                if pending.is_empty() {
                    return Err(syntax(*p, "name before `-`"));
                }
                out.extend(pending.drain(..).map(|n| (n, ty.clone())));
                i += 2;
            }
            Sexpr::Sym(s, _) => {
                pending.push(s.clone());
                i += 1;
            }
            other => return Err(syntax(other.pos(), "name")),
        }
    }
    let _ = pos;
    out.extend(pending.into_iter().map(|n| (n, ROOT_TYPE.to_string())));
    Ok(out)
}

fn variable_list(list: &[&Sexpr], pos: Pos) -> Result<Vec<TypedParam>, PddlError> {
    typed_list(list, pos)?
        .into_iter()
        .map(|(n, t)| match n.strip_prefix('?') {
            Some(v) if !v.is_empty() => Ok(TypedParam::new(v, t)),
            _ => Err(syntax(pos, format!("variable (`?name`), found `{n}`"))),
        })
        .collect()
}

fn parse_atom(s: &Sexpr) -> Result<Atom, PddlError> {
    let list = items(expect_list(s, "atom")?);
    let head = expect_sym(list.first(), s.pos(), "predicate name")?;
    if let Some(feature) = unsupported_connective(&keyword(head)) {
        return Err(PddlError::UnsupportedFeature(feature.into()));
    }
    let mut args = Vec::new();
    for a in &list[1..] {
        match a {
            Sexpr::Sym(v, p) => match v.strip_prefix('?') {
                Some("") => return Err(syntax(*p, "variable name")),
                Some(var) => args.push(Term::Var(var.to_string())),
                None => args.push(Term::Const(v.clone())),
            },
            other => return Err(syntax(other.pos(), "term")),
        }
    }
    Ok(Atom::new(head, args))
}

/// `(and a b ...)`, a single atom, or `()`.
fn conjunction(s: &Sexpr) -> Result<Vec<Atom>, PddlError> {
    let list = items(expect_list(s, "condition")?);
    match list.first() {
        None => Ok(Vec::new()),
        Some(Sexpr::Sym(h, _)) if keyword(h) == "and" => list[1..].iter().map(|a| parse_atom(a)).collect(),
        Some(_) => Ok(vec![parse_atom(s)?]),
    }
}

fn effects(s: &Sexpr) -> Result<(Vec<Atom>, Vec<Atom>), PddlError> {
    let list = items(expect_list(s, "effect")?);
    let parts: Vec<&Sexpr> = match list.first() {
        None => Vec::new(),
        Some(Sexpr::Sym(h, _)) if keyword(h) == "and" => list[1..].to_vec(),
        Some(_) => vec![s],
    };
    let (mut add, mut del) = (Vec::new(), Vec::new());
    for part in parts {
        let inner = items(expect_list(part, "effect literal")?);
        match inner.first() {
            Some(Sexpr::Sym(h, _)) if keyword(h) == "not" => {
                let target = inner.get(1).ok_or_else(|| syntax(part.pos(), "atom inside `not`"))?;
                del.push(parse_atom(target)?);
            }
            _ => add.push(parse_atom(part)?),
        }
    }
    Ok((add, del))
}

fn parse_action(list: &[&Sexpr], pos: Pos, produces: Vec<String>) -> Result<ActionSchema, PddlError> {
    let name = expect_sym(list.get(1), pos, "action name")?;
    let mut action = ActionSchema::new(name);
    action.produces = produces;
    let mut i = 2;
    while i < list.len() {
        let key = match list[i] {
            Sexpr::Sym(k, _) => keyword(k),
            other => return Err(syntax(other.pos(), "`:parameters`, `:precondition` or `:effect`")),
        };
        let value = list.get(i + 1).ok_or_else(|| syntax(list[i].pos(), format!("value for `{key}`")))?;
        match key.as_str() {
            ":parameters" => {
                let vars = items(expect_list(value, "parameter list")?);
                action.params = variable_list(&vars, value.pos())?;
            }
            ":precondition" => action.precondition = conjunction(value)?,
            ":effect" => (action.add_effects, action.del_effects) = effects(value)?,
            other => return Err(syntax(list[i].pos(), format!("action keyword, found `{other}`"))),
        }
        i += 2;
    }
    Ok(action)
}

fn header<'a>(root: &'a Sexpr, kind: &str) -> Result<(Vec<&'a Sexpr>, String), PddlError> {
    let top = items(expect_list(root, "`(define ...)`")?);
    match top.first() {
        Some(Sexpr::Sym(d, _)) if keyword(d) == "define" => {}
        _ => return Err(syntax(root.pos(), "`define`")),
    }
    let head = top.get(1).ok_or_else(|| syntax(root.pos(), format!("`({kind} name)`")))?;
    let head_items = items(expect_list(head, &format!("`({kind} name)`"))?);
    match head_items.first() {
        Some(Sexpr::Sym(k, _)) if keyword(k) == kind => {}
        _ => return Err(syntax(head.pos(), format!("`{kind}`"))),
    }
    let name = expect_sym(head_items.get(1), head.pos(), &format!("{kind} name"))?;
    // Annotations stay in the body so they can attach to actions.
    let Sexpr::List(all, _) = root else { unreachable!() };
    let mut structural = 0;
    let mut body = Vec::new();
    for s in all {
        if structural >= 2 {
            body.push(s);
        } else if !matches!(s, Sexpr::Produces(..)) {
            structural += 1;
        }
    }
    Ok((body, name.to_string()))
}

fn section_keyword(list: &[&Sexpr], pos: Pos) -> Result<String, PddlError> {
    Ok(keyword(expect_sym(list.first(), pos, "section keyword")?))
}

/// Parses a domain in the supported subset and validates it.
pub fn parse_domain(text: &str) -> Result<DomainFile, PddlError> {
    let root = read_sexpr(text)?;
    let (body, name) = header(&root, "domain")?;
    let mut domain = DomainFile::new(name);
    domain.requirements.clear();
    let mut pending_produces: Option<Vec<String>> = None;
    for section in body {
        if let Sexpr::Produces(tags, _) = section {
            pending_produces = Some(tags.clone());
            continue;
        }
        let list = items(expect_list(section, "domain section")?);
        let kw = section_keyword(&list, section.pos())?;
        if let Some(feature) = unsupported_section(&kw) {
            return Err(PddlError::UnsupportedFeature(feature.into()));
        }
        match kw.as_str() {
            ":requirements" => {
                for r in &list[1..] {
                    let req = match r {
                        Sexpr::Sym(s, _) => keyword(s),
                        other => return Err(syntax(other.pos(), "requirement flag")),
                    };
                    let req = req.trim_start_matches(':').to_string();
                    if let Some(feature) = unsupported_requirement(&req) {
                        return Err(PddlError::UnsupportedFeature(feature));
                    }
                    domain.requirements.insert(req);
                }
            }
            ":types" => domain.types = typed_list(&list[1..], section.pos())?,
            ":constants" => domain.constants = typed_list(&list[1..], section.pos())?,
            ":predicates" => {
                for p in &list[1..] {
                    let inner = items(expect_list(p, "predicate declaration")?);
                    let pname = expect_sym(inner.first(), p.pos(), "predicate name")?;
                    let params = variable_list(&inner[1..], p.pos())?;
                    domain.predicates.push(PredicateDecl { name: pname.to_string(), params });
                }
            }
            ":action" => {
                let produces = pending_produces.take().unwrap_or_default();
                domain.actions.push(parse_action(&list, section.pos(), produces)?);
            }
            other => return Err(syntax(section.pos(), format!("domain section, found `{other}`"))),
        }
        pending_produces = None;
    }
    domain.validate()?;
    Ok(domain)
}

fn ground_atom(s: &Sexpr) -> Result<GroundAtom, PddlError> {
    let atom = parse_atom(s)?;
    let args = atom
        .args
        .into_iter()
        .map(|t| match t {
            Term::Const(c) => Ok(c),
            Term::Var(v) => Err(syntax(s.pos(), format!("object name, found variable `?{v}`"))),
        })
        .collect::<Result<_, _>>()?;
    Ok(GroundAtom::new(atom.predicate, args))
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, PddlError> {
    let root = read_sexpr(text)?;
    let (body, name) = header(&root, "problem")?;
    let mut problem =
        ProblemFile { name, domain_name: String::new(), objects: Vec::new(), init: BTreeSet::new(), goal: Vec::new() };
    for section in body {
        if matches!(section, Sexpr::Produces(..)) {
            continue;
        }
        let list = items(expect_list(section, "problem section")?);
        let kw = section_keyword(&list, section.pos())?;
        match kw.as_str() {
            ":domain" => problem.domain_name = expect_sym(list.get(1), section.pos(), "domain name")?.to_string(),
            ":objects" => problem.objects = typed_list(&list[1..], section.pos())?,
            ":init" => {
                for a in &list[1..] {
                    problem.init.insert(ground_atom(a)?);
                }
            }
            ":goal" => {
                let g = list.get(1).ok_or_else(|| syntax(section.pos(), "goal condition"))?;
                let g_items = items(expect_list(g, "goal condition")?);
                problem.goal = match g_items.first() {
                    None => Vec::new(),
                    Some(Sexpr::Sym(h, _)) if keyword(h) == "and" => {
                        g_items[1..].iter().map(|a| ground_atom(a)).collect::<Result<_, _>>()?
                    }
                    Some(_) => vec![ground_atom(g)?],
                };
            }
            ":requirements" => {}
            ":metric" => return Err(PddlError::UnsupportedFeature("action-costs".into())),
            other => return Err(syntax(section.pos(), format!("problem section, found `{other}`"))),
        }
    }
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
(define (domain speech)
  (:requirements :strips :typing)
  (:types audio)
  (:predicates (have ?a - audio) (transcribed ?a - audio))
  ;; produces: text
  (:action transcribe
    :parameters (?a - audio)
    :precondition (have ?a)
    :effect (transcribed ?a)))";

    #[test]
    fn minimal_domain() {
        let d = parse_domain(MINIMAL).unwrap();
        assert_eq!(d.name, "speech");
        assert_eq!(d.actions.len(), 1);
        assert_eq!(d.predicates.len(), 2);
        let a = &d.actions[0];
        assert_eq!(a.params, vec![TypedParam::new("a", "audio")]);
        assert_eq!(a.precondition, vec![Atom::new("have", vec![Term::Var("a".into())])]);
        assert_eq!(a.add_effects, vec![Atom::new("transcribed", vec![Term::Var("a".into())])]);
        assert_eq!(a.produces, vec!["text".to_string()]);
        assert_eq!(d.types, vec![("audio".to_string(), "object".to_string())]);
    }

    #[test]
    fn durative_actions_are_rejected() {
        let text = "(define (domain d) (:requirements :strips)
            (:durative-action go :parameters () :duration (= ?duration 1)))";
        assert_eq!(parse_domain(text), Err(PddlError::UnsupportedFeature("durative-actions".into())));
        let req = "(define (domain d) (:requirements :strips :durative-actions))";
        assert_eq!(parse_domain(req), Err(PddlError::UnsupportedFeature("durative-actions".into())));
    }

    #[test]
    fn negative_preconditions_are_rejected() {
        let text = "(define (domain d) (:predicates (p))
            (:action a :parameters () :precondition (not (p)) :effect (p)))";
        assert_eq!(parse_domain(text), Err(PddlError::UnsupportedFeature("negative-preconditions".into())));
    }

    #[test]
    fn unbalanced_parens_report_position() {
        match parse_domain("(define (domain d)\n  (:predicates (p)") {
            Err(PddlError::Syntax { line, expected, .. }) => {
                assert_eq!(line, 2);
                assert!(expected.contains(')'));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_domain("(define (domain d))\n)") {
            Err(PddlError::Syntax { line: 2, col: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn undeclared_predicate_is_invalid() {
        let text = "(define (domain d) (:predicates (p))
            (:action a :parameters () :precondition (and (p)) :effect (and (q))))";
        assert!(matches!(parse_domain(text), Err(PddlError::InvalidDomain(_))));
    }

    #[test]
    fn unbound_variable_is_invalid() {
        let text = "(define (domain d) (:predicates (p ?x))
            (:action a :parameters () :precondition (and) :effect (and (p ?x))))";
        assert!(matches!(parse_domain(text), Err(PddlError::InvalidDomain(_))));
    }

    #[test]
    fn delete_effects_and_keywords_case() {
        let text = "(DEFINE (DOMAIN d) (:PREDICATES (p) (q))
            (:ACTION a :PARAMETERS () :PRECONDITION (AND (p)) :EFFECT (AND (q) (NOT (p)))))";
        let d = parse_domain(text).unwrap();
        assert_eq!(d.actions[0].del_effects, vec![Atom::new("p", vec![])]);
    }

    #[test]
    fn problem_parses() {
        let text = "(define (problem p1) (:domain speech)
            (:objects a0 - audio) (:init (have a0)) (:goal (and (transcribed a0))))";
        let p = parse_problem(text).unwrap();
        assert_eq!(p.domain_name, "speech");
        assert_eq!(p.objects, vec![("a0".to_string(), "audio".to_string())]);
        assert_eq!(p.goal, vec![GroundAtom::new("transcribed", vec!["a0".into()])]);
        let d = parse_domain(MINIMAL).unwrap();
        p.validate(&d).unwrap();
    }
}
