//! Query parsing, domain classification and action selection on top of a
//! [`TextCompletion`] provider, with deterministic keyword fallbacks.

pub mod offline;
pub mod prompts;
pub mod provider;
pub mod reply;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use offline::HeuristicProvider;
pub use prompts::PromptTemplate;
pub use provider::{ChainProvider, FixtureProvider, GenerationParams, HttpProvider, ProviderError, TextCompletion};

pub const PARSE_REPAIR_SUFFIX: &str = "\nDo not generate anything other than a parsable JSON";
pub const LIST_REPAIR_SUFFIX: &str = "\nDo not give any explanations, only return a list and nothing else.";
pub const MAX_SELECTED_ACTIONS: usize = 3;

const FIELDS: [&str; 6] = ["instruction", "input_text", "question", "url", "data_dict", "categories"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedQuery {
    pub instruction: Option<String>,
    pub input_text: Option<String>,
    pub question: Option<String>,
    pub url: Option<String>,
    #[serde(default)]
    pub data_dict: BTreeMap<String, String>,
    #[serde(default)]
    pub categories: Vec<String>,
}

impl ParsedQuery {
    pub fn is_empty(&self) -> bool {
        self.instruction.is_none()
            && self.input_text.is_none()
            && self.question.is_none()
            && self.url.is_none()
            && self.data_dict.is_empty()
            && self.categories.is_empty()
    }

    /// Text used for classification and selection: the instruction, or the
    /// raw query when the parse produced none.
    pub fn instruction_or<'a>(&'a self, raw: &'a str) -> &'a str {
        self.instruction.as_deref().unwrap_or(raw)
    }

    /// Builds a query from a reply object. Only the six known keys are
    /// accepted; `None`/empty values count as absent.
    pub fn from_reply(map: &serde_json::Map<String, Value>) -> Result<Self, String> {
        let mut pq = ParsedQuery::default();
        for (k, v) in map {
            let text = |v: &Value| -> Result<Option<String>, String> {
                match v {
                    Value::Null => Ok(None),
                    Value::String(s) if s.trim().is_empty() => Ok(None),
                    Value::String(s) => Ok(Some(s.clone())),
                    other => Err(format!("`{k}` must be a string, got {other}")),
                }
            };
            match k.as_str() {
                "instruction" => pq.instruction = text(v)?,
                "input_text" => pq.input_text = text(v)?,
                "question" => pq.question = text(v)?,
                "url" => pq.url = text(v)?,
                "data_dict" => match v {
                    Value::Null => {}
                    Value::Object(m) => {
                        for (dk, dv) in m {
                            let s = match dv {
                                Value::String(s) => s.clone(),
                                other => other.to_string(),
                            };
                            pq.data_dict.insert(dk.clone(), s);
                        }
                    }
                    other => return Err(format!("`data_dict` must be a map, got {other}")),
                },
                "categories" => match v {
                    Value::Null => {}
                    Value::Array(items) => {
                        for it in items {
                            match it {
                                Value::String(s) => pq.categories.push(s.clone()),
                                other => return Err(format!("category must be a string, got {other}")),
                            }
                        }
                    }
                    other => return Err(format!("`categories` must be a list, got {other}")),
                },
                other => return Err(format!("unknown key `{other}`")),
            }
        }
        Ok(pq)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NluError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no action could be selected from {0} candidates")]
    EmptySelection(usize),
    #[error("empty query")]
    EmptyQuery,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParseOutcome {
    pub query: ParsedQuery,
    /// Set when the provider reply was unusable and `fallback_parse` ran.
    pub degraded: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DomainSubset {
    pub domains: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainOutcome {
    pub subset: DomainSubset,
    pub warnings: Vec<String>,
    pub keyword_fallback: bool,
}

fn check_reply(reply: &str, q: &str) -> Result<ParsedQuery, String> {
    let map = reply::parse_object(reply).ok_or_else(|| "no object in reply".to_string())?;
    let pq = ParsedQuery::from_reply(&map)?;
    if pq.is_empty() {
        return Err("all fields absent".into());
    }
    if let Some(u) = &pq.url {
        if !q.contains(u.as_str()) {
            return Err(format!("url `{u}` is not a substring of the query"));
        }
    }
    Ok(pq)
}

/// Parses `q` through the provider with one repair retry, then falls back
/// to [`fallback_parse`]. Transport failures on both calls are returned as
/// errors only when `allow_fallback` is false.
pub fn parse_query(
    q: &str,
    provider: &dyn TextCompletion,
    params: &GenerationParams,
    allow_fallback: bool,
) -> Result<ParseOutcome, NluError> {
    if q.trim().is_empty() {
        return Err(NluError::EmptyQuery);
    }
    let prompt = prompts::PARSING.fill(&[("USER_INPUT", q)]);
    let mut warnings = Vec::new();
    let mut transport_failures = 0;
    let mut last_err = None;
    for p in [prompt.clone(), format!("{prompt}{PARSE_REPAIR_SUFFIX}")] {
        match provider.complete(&p, params) {
            Ok(reply) => match check_reply(&reply, q) {
                Ok(query) => return Ok(ParseOutcome { query, degraded: false, warnings }),
                Err(e) => warnings.push(format!("malformed parse reply: {e}")),
            },
            Err(e) => {
                transport_failures += 1;
                warnings.push(format!("provider failed: {e}"));
                last_err = Some(e);
            }
        }
    }
    if transport_failures == 2 && !allow_fallback {
        return Err(last_err.expect("two failures recorded").into());
    }
    Ok(ParseOutcome { query: fallback_parse(q), degraded: true, warnings })
}

const MEDIA_EXTENSIONS: [&str; 14] =
    ["wav", "mp3", "flac", "ogg", "jpg", "jpeg", "png", "gif", "bmp", "pdf", "csv", "txt", "json", "mp4"];

fn looks_like_path(token: &str) -> bool {
    if token.contains("://") || token.starts_with("./") || token.starts_with("../") {
        return true;
    }
    match token.rsplit_once('.') {
        Some((stem, ext)) if !stem.is_empty() => MEDIA_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()),
        _ => false,
    }
}

fn find_url(q: &str) -> Option<&str> {
    q.split_whitespace()
        .map(|t| t.trim_matches(|c: char| matches!(c, '\'' | '"' | '`' | '(' | ')' | '<' | '>')))
        .map(|t| t.trim_end_matches(['?', '!', ',', ';', ':', '.']))
        .find(|t| looks_like_path(t))
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn quoted_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?:^|[\s(\[,:])(?:'([^'\n]+)'|"([^"\n]+)"|`([^`\n]+)`)"#).unwrap())
}

fn quoted_spans(s: &str) -> Vec<&str> {
    quoted_re().captures_iter(s).filter_map(|c| c.get(1).or(c.get(2)).or(c.get(3)).map(|m| m.as_str())).collect()
}

const ENUM_MARKERS: [&str; 3] = ["such as", "categories", " or "];

fn find_categories(q: &str) -> Vec<String> {
    let lower = q.to_lowercase();
    let Some(at) = ENUM_MARKERS.iter().filter_map(|m| lower.find(m)).min() else {
        return Vec::new();
    };
    // The enumeration is the sentence holding the marker.
    let start = lower[..at].rfind(['.', '!', '?', '\n']).map_or(0, |i| i + 1);
    let end = lower[at..].find(['.', '!', '?', '\n']).map_or(q.len(), |i| at + i);
    quoted_spans(&q[start..end]).into_iter().filter(|s| s.split_whitespace().count() <= 3).map(str::to_string).collect()
}

fn find_question(text: &str) -> Option<String> {
    let q = text.find('?')?;
    let start = text[..q].rfind(['.', '!', '\n']).map_or(0, |i| i + 1);
    let s = collapse_ws(&text[start..=q]).replace(" ?", "?");
    let s = s.trim_start_matches(['\'', '"', '`']).to_string();
    (s.len() > 1).then_some(s)
}

/// Deterministic pattern-based parse used offline and as the degraded path.
pub fn fallback_parse(q: &str) -> ParsedQuery {
    let url = find_url(q).map(str::to_string);
    let without_url = match &url {
        Some(u) => q.replacen(u.as_str(), " ", 1),
        None => q.to_string(),
    };
    let instruction = collapse_ws(&without_url);
    let categories = find_categories(q);
    let input_text = quoted_spans(&without_url)
        .into_iter()
        .find(|s| s.split_whitespace().count() >= 4 && !s.trim_end().ends_with('?'))
        .map(str::to_string);
    let quoted_question =
        quoted_spans(&without_url).into_iter().find(|s| s.trim_end().ends_with('?')).map(|s| s.trim().to_string());
    ParsedQuery {
        instruction: (!instruction.is_empty()).then_some(instruction),
        input_text,
        question: quoted_question.or_else(|| find_question(&without_url)),
        url,
        data_dict: BTreeMap::new(),
        categories,
    }
}

/// Python-style list literal, as the prompts show it.
fn py_list(items: &[String]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| format!("'{s}'")).collect();
    format!("[{}]", quoted.join(", "))
}

fn json_list(items: &[String]) -> String {
    serde_json::to_string(items).expect("strings serialize")
}

/// Stem table for offline domain classification. Image stems expand to
/// every registered domain whose name starts with `image`.
const DOMAIN_KEYWORDS: &[(&str, &str)] = &[
    ("transcri", "audio"),
    ("speech", "audio"),
    ("voice", "audio"),
    ("audio", "audio"),
    ("summar", "summarisation"),
    ("entit", "token_classification"),
    ("translat", "machine_translation"),
    ("question", "question_answering"),
    ("answer", "question_answering"),
    ("classif", "text_classification"),
    ("categor", "text_classification"),
    ("sonnet", "text_generation"),
    ("poem", "text_generation"),
    ("story", "text_generation"),
    ("essay", "text_generation"),
];

const IMAGE_STEMS: [&str; 4] = ["image", "picture", "pictori", "photo"];

/// Registered domains hit by the stem table, in registered order.
pub fn keyword_domains(text: &str, registered: &[String]) -> Vec<String> {
    let lower = text.to_lowercase();
    registered
        .iter()
        .filter(|d| {
            DOMAIN_KEYWORDS.iter().any(|(stem, dom)| dom == d && lower.contains(stem))
                || (d.starts_with("image") && IMAGE_STEMS.iter().any(|s| lower.contains(s)))
        })
        .cloned()
        .collect()
}

/// Fills the domain prompt, keeps registered names in reply order, and
/// falls back to [`keyword_domains`] when nothing survives.
pub fn classify_domains(
    instruction: &str,
    registered: &[String],
    provider: &dyn TextCompletion,
    params: &GenerationParams,
) -> Result<DomainOutcome, NluError> {
    let prompt = prompts::DOMAIN_CLASSIFICATION.fill(&[("domains", &py_list(registered)), ("query", instruction)]);
    let reply = provider.complete(&prompt, params)?;
    let mut warnings = Vec::new();
    let mut domains: Vec<String> = Vec::new();
    for name in reply::parse_delimited(&reply) {
        match registered.iter().find(|r| r.eq_ignore_ascii_case(&name)) {
            Some(r) if !domains.contains(r) => domains.push(r.clone()),
            Some(_) => {}
            None => warnings.push(format!("dropped unregistered domain `{name}`")),
        }
    }
    let keyword_fallback = domains.is_empty();
    if keyword_fallback {
        domains = keyword_domains(instruction, registered);
    }
    Ok(DomainOutcome { subset: DomainSubset { domains }, warnings, keyword_fallback })
}

fn intersect_actions(reply: &str, actions: &[String]) -> Vec<String> {
    let names = reply::parse_string_list(reply).unwrap_or_else(|| reply::parse_delimited(reply));
    let mut out: Vec<String> = Vec::new();
    for n in names {
        if let Some(a) = actions.iter().find(|a| a.eq_ignore_ascii_case(n.trim())) {
            if !out.contains(a) {
                out.push(a.clone());
            }
        }
    }
    out.truncate(MAX_SELECTED_ACTIONS);
    out
}

/// Fills the action prompt and keeps at most three listed actions, in
/// reply order. One repair retry before `EmptySelection`.
pub fn select_actions(
    instruction: &str,
    actions: &[String],
    provider: &dyn TextCompletion,
    params: &GenerationParams,
) -> Result<Vec<String>, NluError> {
    let prompt = prompts::ACTION_SELECTION.fill(&[("user_instruction", instruction), ("actions", &json_list(actions))]);
    let first = intersect_actions(&provider.complete(&prompt, params)?, actions);
    if !first.is_empty() {
        return Ok(first);
    }
    let second = intersect_actions(&provider.complete(&format!("{prompt}{LIST_REPAIR_SUFFIX}"), params)?, actions);
    if second.is_empty() {
        return Err(NluError::EmptySelection(actions.len()));
    }
    Ok(second)
}

/// Field names of [`ParsedQuery`], used by argument mapping.
pub fn field_names() -> &'static [&'static str] {
    &FIELDS
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    /// Replies from a fixed script, recording the prompts it saw.
    struct Script {
        replies: Mutex<Vec<Result<String, ProviderError>>>,
        seen: Mutex<Vec<String>>,
    }

    impl Script {
        fn new(replies: Vec<Result<&str, ProviderError>>) -> Self {
            Script {
                replies: Mutex::new(replies.into_iter().rev().map(|r| r.map(str::to_string)).collect()),
                seen: Mutex::new(Vec::new()),
            }
        }
    }

    impl TextCompletion for Script {
        fn complete(&self, prompt: &str, _: &GenerationParams) -> Result<String, ProviderError> {
            self.seen.lock().unwrap().push(prompt.to_string());
            self.replies.lock().unwrap().pop().expect("script exhausted")
        }
    }

    fn p() -> GenerationParams {
        GenerationParams::default()
    }

    #[test]
    fn parse_with_valid_reply() {
        let q = "What is the date mentioned in this audio www.google.com/audio_file.mp3?";
        let s = Script::new(vec![Ok(
            r#"{{"instruction": "Convert the audio to text and then answer the question", "url": "www.google.com/audio_file.mp3", "input_text": "What is the date?"}}"#,
        )]);
        let out = parse_query(q, &s, &p(), true).unwrap();
        assert!(!out.degraded);
        assert_eq!(out.query.url.as_deref(), Some("www.google.com/audio_file.mp3"));
        assert_eq!(out.query.input_text.as_deref(), Some("What is the date?"));
        assert!(s.seen.lock().unwrap()[0].contains(&format!("User: {q}\nResponse:")));
    }

    #[test]
    fn categories_from_python_list_reply() {
        let q = "Please transcribe the voice into text ./audio/audio_1.mp3 and classify the transcribed text into categories such as 'movie', 'music', 'painting', or 'Other'.";
        let s = Script::new(vec![Ok(
            r#"{"instruction": "Convert the audio to text, and perform text classification", "url": "./audio/audio_1.mp3", "categories": ['movie', 'music', 'painting', 'Other']}"#,
        )]);
        let out = parse_query(q, &s, &p(), true).unwrap();
        assert_eq!(out.query.categories, vec!["movie", "music", "painting", "Other"]);
        assert_eq!(fallback_parse(q).categories, vec!["movie", "music", "painting", "Other"]);
        assert_eq!(fallback_parse(q).url.as_deref(), Some("./audio/audio_1.mp3"));
    }

    #[test]
    fn repair_then_fallback() {
        let s = Script::new(vec![Ok("I think you want audio."), Ok("Sorry, here you go: audio")]);
        let out = parse_query("Transcribe ./a.wav", &s, &p(), true).unwrap();
        assert!(out.degraded);
        assert_eq!(out.query, fallback_parse("Transcribe ./a.wav"));
        let seen = s.seen.lock().unwrap();
        assert!(seen[1].ends_with(PARSE_REPAIR_SUFFIX));
    }

    #[test]
    fn normalized_url_is_rejected() {
        let s = Script::new(vec![
            Ok(r#"{"url": "https://www.google.com/a.mp3"}"#),
            Ok(r#"{"url": "https://www.google.com/a.mp3"}"#),
        ]);
        let out = parse_query("play www.google.com/a.mp3", &s, &p(), true).unwrap();
        assert!(out.degraded);
        assert_eq!(out.query.url.as_deref(), Some("www.google.com/a.mp3"));
    }

    #[test]
    fn transport_failure_without_fallback_is_an_error() {
        let down = || Err(ProviderError::Transport("down".into()));
        let s = Script::new(vec![down(), down()]);
        assert!(matches!(parse_query("hi", &s, &p(), false), Err(NluError::Provider(_))));
        let s = Script::new(vec![down(), down()]);
        assert!(parse_query("hi", &s, &p(), true).unwrap().degraded);
    }

    #[test]
    fn unknown_keys_are_malformed() {
        let m = reply::parse_object(r#"{"instruction": "x", "mood": "happy"}"#).unwrap();
        assert!(ParsedQuery::from_reply(&m).is_err());
    }

    #[test]
    fn fallback_patterns() {
        let pq = fallback_parse("Transcribe ./a.wav");
        assert_eq!(pq.url.as_deref(), Some("./a.wav"));
        assert_eq!(pq.instruction.as_deref(), Some("Transcribe"));

        let pq = fallback_parse("How many people is in the image? ./data/images/image_6.jpg");
        assert_eq!(pq.question.as_deref(), Some("How many people is in the image?"));
        assert_eq!(pq.url.as_deref(), Some("./data/images/image_6.jpg"));

        let pq = fallback_parse("Write me a poem about autumn leaves");
        assert_eq!(
            pq,
            ParsedQuery { instruction: Some("Write me a poem about autumn leaves".into()), ..Default::default() }
        );

        let pq = fallback_parse("Use audio transcription as context and answer 'what is the country starting the war whom the associated speech is about?' from ./data/audios/audio_6.wav");
        assert_eq!(
            pq.question.as_deref(),
            Some("what is the country starting the war whom the associated speech is about?")
        );
        assert_eq!(pq.url.as_deref(), Some("./data/audios/audio_6.wav"));

        let pq = fallback_parse("Summarise \"The committee met on Monday and approved the budget\" please");
        assert_eq!(pq.input_text.as_deref(), Some("The committee met on Monday and approved the budget"));
    }

    #[test]
    fn url_with_trailing_question_mark() {
        let q = "What is the date mentioned in this audio www.google.com/audio_file.mp3?";
        let pq = fallback_parse(q);
        assert_eq!(pq.url.as_deref(), Some("www.google.com/audio_file.mp3"));
        assert_eq!(pq.question.as_deref(), Some("What is the date mentioned in this audio?"));
    }

    fn registered() -> Vec<String> {
        ["audio", "image_generation", "question_answering", "summarisation", "token_classification"]
            .map(String::from)
            .to_vec()
    }

    #[test]
    fn classify_keeps_reply_order_and_drops_unknown() {
        let s = Script::new(vec![Ok("summarisation; astrology; audio")]);
        let out = classify_domains("x", &registered(), &s, &p()).unwrap();
        assert_eq!(out.subset.domains, vec!["summarisation", "audio"]);
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("astrology"));
        assert!(!out.keyword_fallback);
    }

    #[test]
    fn classify_keyword_fallback() {
        let s = Script::new(vec![Ok("astrology")]);
        let out =
            classify_domains("Summarise the transcript of the audio and find entities in it", &registered(), &s, &p())
                .unwrap();
        assert!(out.keyword_fallback);
        assert_eq!(out.subset.domains, vec!["audio", "summarisation", "token_classification"]);
        assert_eq!(
            keyword_domains(
                "Answer the following questions in detail and give me a summarisation for the answer",
                &registered()
            ),
            vec!["question_answering", "summarisation"]
        );
    }

    #[test]
    fn action_selection_rules() {
        let actions: Vec<String> =
            ["Schema-Selection", "generate_SQL", "execute_query", "validate_SQL"].map(String::from).to_vec();
        let s = Script::new(vec![Ok(r#"["Schema-Selection", "generate_SQL"]"#)]);
        assert_eq!(
            select_actions("I want to select a schema and then generate a SQL query", &actions, &s, &p()).unwrap(),
            vec!["Schema-Selection", "generate_SQL"]
        );

        let five: Vec<String> = (0..5).map(|i| format!("a{i}")).collect();
        let s = Script::new(vec![Ok(r#"["a4", "a3", "a2", "a1", "a0"]"#)]);
        assert_eq!(select_actions("t", &five, &s, &p()).unwrap(), vec!["a4", "a3", "a2"]);

        let s = Script::new(vec![Ok(r#"["nope"]"#), Ok("still nothing")]);
        assert_eq!(select_actions("t", &five, &s, &p()), Err(NluError::EmptySelection(5)));
        assert!(s.seen.lock().unwrap()[1].ends_with(LIST_REPAIR_SUFFIX));
    }
}
