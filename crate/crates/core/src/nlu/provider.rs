use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompts::sha256_hex;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider transport error: {0}")]
    Transport(String),
    #[error("provider timed out after {0:?}")]
    Timeout(Duration),
    #[error("provider returned a malformed response: {0}")]
    BadResponse(String),
    #[error("no canned reply for prompt {0}")]
    MissingFixture(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams { temperature: 0.0, max_tokens: 512 }
    }
}

pub trait TextCompletion: Send + Sync {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, ProviderError>;
}

impl<T: TextCompletion + ?Sized> TextCompletion for Box<T> {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, ProviderError> {
        (**self).complete(prompt, params)
    }
}

impl<T: TextCompletion + ?Sized> TextCompletion for &T {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, ProviderError> {
        (**self).complete(prompt, params)
    }
}

/// JSON over HTTP: POST `{prompt, temperature, max_tokens}`, reply `{text}`.
pub struct HttpProvider {
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
    timeout: Duration,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

impl HttpProvider {
    pub fn new(url: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        HttpProvider { url: url.into(), token, agent, timeout }
    }
}

impl TextCompletion for HttpProvider {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, ProviderError> {
        let mut req = self.agent.post(&self.url);
        if let Some(t) = &self.token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        let body = CompletionRequest { prompt, temperature: params.temperature, max_tokens: params.max_tokens };
        match req.send_json(&body) {
            Ok(resp) => resp
                .into_json::<CompletionResponse>()
                .map(|r| r.text)
                .map_err(|e| ProviderError::BadResponse(e.to_string())),
            Err(ureq::Error::Transport(t)) if t.kind() == ureq::ErrorKind::Io => {
                Err(ProviderError::Timeout(self.timeout))
            }
            Err(e) => Err(ProviderError::Transport(e.to_string())),
        }
    }
}

/// Canned replies stored as `<sha256 of prompt>.txt` in one directory.
#[derive(Debug, Clone)]
pub struct FixtureProvider {
    dir: PathBuf,
}

impl FixtureProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureProvider { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, prompt: &str) -> PathBuf {
        self.dir.join(format!("{}.txt", sha256_hex(prompt)))
    }

    pub fn record(&self, prompt: &str, reply: &str) -> std::io::Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(prompt);
        fs::write(&path, reply)?;
        Ok(path)
    }
}

impl TextCompletion for FixtureProvider {
    fn complete(&self, prompt: &str, _params: &GenerationParams) -> Result<String, ProviderError> {
        let path = self.path_for(prompt);
        match fs::read_to_string(&path) {
            Ok(s) => Ok(s),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(ProviderError::MissingFixture(sha256_hex(prompt)))
            }
            Err(e) => Err(ProviderError::Transport(format!("{}: {e}", path.display()))),
        }
    }
}

/// Tries each provider in turn; the last error is returned if all fail.
pub struct ChainProvider {
    providers: Vec<Box<dyn TextCompletion>>,
}

impl ChainProvider {
    pub fn new(providers: Vec<Box<dyn TextCompletion>>) -> Self {
        assert!(!providers.is_empty(), "empty provider chain");
        ChainProvider { providers }
    }
}

impl TextCompletion for ChainProvider {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, ProviderError> {
        let mut last = None;
        for p in &self.providers {
            match p.complete(prompt, params) {
                Ok(r) => return Ok(r),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("non-empty chain"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fails;
    impl TextCompletion for Fails {
        fn complete(&self, _: &str, _: &GenerationParams) -> Result<String, ProviderError> {
            Err(ProviderError::Transport("down".into()))
        }
    }

    #[test]
    fn fixture_round_trip_and_chain() {
        let dir = tempfile::tempdir().unwrap();
        let fx = FixtureProvider::new(dir.path());
        fx.record("hello", "world").unwrap();
        let params = GenerationParams::default();
        assert_eq!(fx.complete("hello", &params).unwrap(), "world");
        assert!(matches!(fx.complete("other", &params), Err(ProviderError::MissingFixture(_))));

        let chain = ChainProvider::new(vec![Box::new(Fails), Box::new(fx)]);
        assert_eq!(chain.complete("hello", &params).unwrap(), "world");
        assert!(matches!(chain.complete("x", &params), Err(ProviderError::MissingFixture(_))));
    }

    #[test]
    fn unreachable_endpoint_is_a_transport_error() {
        let p = HttpProvider::new("http://127.0.0.1:9/complete", None, Duration::from_millis(200));
        assert!(p.complete("x", &GenerationParams::default()).is_err());
    }
}
