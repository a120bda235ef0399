//! Offline provider: answers the shipped prompts deterministically from
//! keyword tables and the pattern parser, without any model.

use super::prompts::{ACTION_SELECTION, DOMAIN_CLASSIFICATION, PARSING, USAGE_SNIPPET_EXTRACTION};
use super::provider::{GenerationParams, ProviderError, TextCompletion};
use super::{fallback_parse, keyword_domains, reply, MAX_SELECTED_ACTIONS};

/// Stems per action name. An action is picked when one of its stems occurs
/// in the task text; picks are ordered by earliest occurrence.
pub const ACTION_KEYWORDS: &[(&str, &[&str])] = &[
    ("automatic_speech_recognition", &["transcri", "speech to text", "audio to text", "voice into text", "decipher"]),
    ("text_to_speech", &["read aloud", "text to speech", "into speech", "into audio", "narrat", "speak"]),
    ("text_to_image", &["generate an image", "create an image", "draw", "pictorial", "paint", "illustrat"]),
    ("image_captioning", &["caption", "describe the image", "describe this image", "about this image"]),
    ("object_detection", &["detect", "how many", "objects", "count"]),
    ("visual_question_answering", &["visual question", "in this picture", "in the picture", "color of"]),
    ("depth_estimation", &["depth", "distance"]),
    ("translation", &["translat", "into french", "into german", "into spanish"]),
    ("question_answering", &["answer", "as context", "based on the context"]),
    ("open_question_answering", &["open question", "who was", "who is", "tell me about"]),
    ("table_question_answering", &["table", "spreadsheet"]),
    ("summarization", &["summar"]),
    ("text_generation", &["write", "compose", "poem", "sonnet", "story", "essay"]),
    ("text_classification", &["classif", "categor", "sentiment"]),
    ("named_entity_recognition", &["entit", "named entit"]),
];

/// Actions from `actions` hit by [`ACTION_KEYWORDS`], earliest mention
/// first, at most three. Names may carry a `<domain>__` prefix.
pub fn keyword_actions(task: &str, actions: &[String]) -> Vec<String> {
    let lower = task.to_lowercase();
    let mut hits: Vec<(usize, usize, &String)> = Vec::new();
    for (ai, action) in actions.iter().enumerate() {
        let base = action.rsplit("__").next().unwrap_or(action);
        let Some((_, stems)) = ACTION_KEYWORDS.iter().find(|(n, _)| *n == base) else {
            continue;
        };
        if let Some(pos) = stems.iter().filter_map(|s| lower.find(s)).min() {
            hits.push((pos, ai, action));
        }
    }
    hits.sort();
    hits.into_iter().take(MAX_SELECTED_ACTIONS).map(|(_, _, a)| a.clone()).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicProvider;

impl HeuristicProvider {
    fn parse_reply(user_input: &str) -> String {
        let pq = fallback_parse(user_input.trim());
        serde_json::to_string(&pq).expect("query serializes")
    }

    fn domain_reply(domains: &str, query: &str) -> String {
        let registered = reply::parse_string_list(domains).unwrap_or_default();
        keyword_domains(query, &registered).join("; ")
    }

    fn action_reply(task: &str, actions: &str) -> String {
        let actions = reply::parse_string_list(actions).unwrap_or_default();
        serde_json::to_string(&keyword_actions(task, &actions)).expect("strings serialize")
    }

    /// Wraps the snippet in a function whose parameters all carry defaults.
    fn snippet_reply(code: &str) -> String {
        let model = code
            .split(['"', '\''])
            .skip(1)
            .step_by(2)
            .find(|s| s.contains('/') && !s.contains(' ') && !s.starts_with('.'))
            .unwrap_or("model");
        let body: String =
            code.lines().filter(|l| !l.trim_start().starts_with("```")).map(|l| format!("    {l}\n")).collect();
        format!(
            "```python\ndef run(inputs=\"\", model_path=\"{model}\"):\n{body}    return locals().get(\"result\")\n```\n"
        )
    }
}

impl TextCompletion for HeuristicProvider {
    fn complete(&self, prompt: &str, _params: &GenerationParams) -> Result<String, ProviderError> {
        if let Some(s) = PARSING.extract(prompt) {
            return Ok(Self::parse_reply(&s["USER_INPUT"]));
        }
        if let Some(s) = DOMAIN_CLASSIFICATION.extract(prompt) {
            return Ok(Self::domain_reply(&s["domains"], &s["query"]));
        }
        if let Some(s) = ACTION_SELECTION.extract(prompt) {
            return Ok(Self::action_reply(&s["user_instruction"], &s["actions"]));
        }
        if let Some(s) = USAGE_SNIPPET_EXTRACTION.extract(prompt) {
            return Ok(Self::snippet_reply(&s["code"]));
        }
        Err(ProviderError::BadResponse("prompt matches no shipped template".into()))
    }
}
