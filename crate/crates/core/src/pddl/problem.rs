use std::collections::BTreeSet;

use super::{ground, DomainFile, GroundAtom, PddlError, ProblemFile, DEFAULT_MAX_GROUND_ACTIONS, DONE_PREFIX};
use crate::nlu::ParsedQuery;

pub const AVAILABLE: &str = "available";
pub const MODALITY_TYPE: &str = "modality";
pub const ARTIFACT_TYPE: &str = "artifact";

/// Modality of a referenced file, from its extension. Anything unknown is a
/// `document`.
pub fn modality_for_path(path: &str) -> &'static str {
    let lower = path.to_ascii_lowercase();
    let ext = lower.rsplit_once('.').map(|(_, e)| e.split(['?', '#']).next().unwrap_or(e)).unwrap_or("");
    match ext {
        "wav" | "mp3" | "flac" | "ogg" => "audio",
        "jpg" | "jpeg" | "png" | "gif" | "bmp" => "image",
        _ => "document",
    }
}

/// Query inputs as `(object, modality)`. The url is `a0`, input text `t0`
/// (or the question as `q0`), a data dictionary `d0`. When the query
/// carries no artifact at all, the instruction itself becomes the text
/// artifact `p0` so that purely generative requests stay plannable.
pub(crate) fn input_artifacts(pq: &ParsedQuery) -> Vec<(String, &'static str)> {
    let mut out = Vec::new();
    if let Some(url) = &pq.url {
        out.push(("a0".to_string(), modality_for_path(url)));
    }
    if pq.input_text.is_some() {
        out.push(("t0".to_string(), "text"));
    } else if pq.question.is_some() {
        out.push(("q0".to_string(), "text"));
    }
    if !pq.data_dict.is_empty() {
        out.push(("d0".to_string(), "table"));
    }
    if out.is_empty() && pq.instruction.is_some() {
        out.push(("p0".to_string(), "text"));
    }
    out
}

/// Builds the planning problem for a parsed query: one object per input
/// artifact, `(available <modality> <object>)` facts, and a goal requiring
/// the done marker of every selected action.
pub fn synthesize_problem(
    pq: &ParsedQuery,
    selected: &[String],
    merged: &DomainFile,
) -> Result<ProblemFile, PddlError> {
    for name in selected {
        if merged.action(name).is_none() {
            return Err(PddlError::UnknownAction(name.clone()));
        }
    }
    let mut objects = Vec::new();
    let mut init = BTreeSet::new();
    let artifacts = input_artifacts(pq);
    if !artifacts.is_empty() {
        if merged.predicate(AVAILABLE).is_none() {
            return Err(PddlError::InvalidDomain(format!("domain lacks the `{AVAILABLE}` predicate")));
        }
        for (obj, modality) in &artifacts {
            if merged.constant_type(modality).is_none()
                && !objects.iter().any(|(o, _): &(String, String)| o == modality)
            {
                objects.push((modality.to_string(), MODALITY_TYPE.to_string()));
            }
            objects.push((obj.clone(), ARTIFACT_TYPE.to_string()));
            init.insert(GroundAtom::new(AVAILABLE, vec![modality.to_string(), obj.clone()]));
        }
    }
    let mut goal: Vec<GroundAtom> = Vec::new();
    for name in selected {
        let atom = GroundAtom::new(format!("{DONE_PREFIX}{name}"), vec![]);
        if !goal.contains(&atom) {
            goal.push(atom);
        }
    }
    let problem = ProblemFile { name: "query".into(), domain_name: merged.name.clone(), objects, init, goal };
    problem.validate(merged)?;

    let task = ground(merged, &problem, DEFAULT_MAX_GROUND_ACTIONS)?;
    let reachable = task.relaxed_reachable();
    for (name, atom) in selected.iter().zip(&problem.goal) {
        match task.atom_index(atom) {
            Some(i) if reachable.contains(i) => {}
            _ => return Err(PddlError::NoInputArtifact { action: name.clone() }),
        }
    }
    Ok(problem)
}
