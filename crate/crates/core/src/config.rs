//! Layered configuration: defaults, then a TOML file, then environment
//! variables, then command-line overrides.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::evalbench::EvalConfig;
use crate::nlu::{ChainProvider, FixtureProvider, HeuristicProvider, HttpProvider, TextCompletion};
use crate::pddl::DEFAULT_MAX_GROUND_ACTIONS;
use crate::planner::SearchConfig;

pub const ENV_PROVIDER_URL: &str = "HIVE_PROVIDER_URL";
pub const ENV_PROVIDER_TOKEN: &str = "HIVE_PROVIDER_TOKEN";
pub const ENV_OFFLINE: &str = "HIVE_OFFLINE";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("invalid value for {key}: {value}")]
    Env { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub url: Option<String>,
    pub token: Option<String>,
    pub offline: bool,
    /// Directory of recorded replies, consulted first in offline mode.
    pub fixtures: Option<PathBuf>,
    pub timeout_s: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig { url: None, token: None, offline: false, fixtures: None, timeout_s: 60 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CkgConfig {
    pub path: Option<PathBuf>,
    /// Spec store; defaults to `<graph stem>.specs.jsonl` next to the graph.
    pub specs: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PddlConfig {
    /// Directory of `*.pddl` domain files.
    pub domains: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub max_width: usize,
    pub max_expansions: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let s = SearchConfig::default();
        PlannerConfig { max_width: s.max_width, max_expansions: s.max_expansions }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundConfig {
    pub max_actions: usize,
}

impl Default for GroundConfig {
    fn default() -> Self {
        GroundConfig { max_actions: DEFAULT_MAX_GROUND_ACTIONS }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistryConfig {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub provider: ProviderConfig,
    pub ckg: CkgConfig,
    pub pddl: PddlConfig,
    pub planner: PlannerConfig,
    pub ground: GroundConfig,
    pub eval: EvalConfig,
    pub registry: RegistryConfig,
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" | "" => Ok(false),
        _ => Err(ConfigError::Env { key: key.into(), value: v.into() }),
    }
}

fn rebase(p: &mut Option<PathBuf>, base: &Path) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl Config {
    /// Reads a TOML file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let err = |message: String| ConfigError::File { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut c: Config = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        rebase(&mut c.provider.fixtures, base);
        rebase(&mut c.ckg.path, base);
        rebase(&mut c.ckg.specs, base);
        rebase(&mut c.pddl.domains, base);
        rebase(&mut c.registry.path, base);
        Ok(c)
    }

    /// Applies the `HIVE_*` variables read through `get`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = get(ENV_PROVIDER_URL) {
            self.provider.url = Some(v);
        }
        if let Some(v) = get(ENV_PROVIDER_TOKEN) {
            self.provider.token = Some(v);
        }
        if let Some(v) = get(ENV_OFFLINE) {
            self.provider.offline = parse_bool(ENV_OFFLINE, &v)?;
        }
        Ok(())
    }

    /// File (if any) over defaults, then the process environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut c = match file {
            Some(p) => Config::from_file(p)?,
            None => Config::default(),
        };
        c.apply_env(|k| std::env::var(k).ok())?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.provider.offline {
            match &self.provider.fixtures {
                None => return Err(ConfigError::Invalid("offline mode needs provider.fixtures".into())),
                Some(d) if !d.is_dir() => {
                    return Err(ConfigError::Invalid(format!("provider.fixtures {} is not a directory", d.display())))
                }
                Some(_) => {}
            }
        } else if self.provider.url.is_none() {
            return Err(ConfigError::Invalid("no provider.url and offline mode is off".into()));
        }
        if !(1..=2).contains(&self.planner.max_width) {
            return Err(ConfigError::Invalid(format!(
                "planner.max_width must be 1 or 2, got {}",
                self.planner.max_width
            )));
        }
        Ok(())
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            max_width: self.planner.max_width,
            max_expansions: self.planner.max_expansions,
            ..SearchConfig::default()
        }
    }

    pub fn specs_path(&self) -> Option<PathBuf> {
        self.ckg.specs.clone().or_else(|| self.ckg.path.as_deref().map(specs_path_for))
    }

    /// Recorded replies first, then the keyword heuristics, when offline;
    /// otherwise the HTTP endpoint.
    pub fn provider(&self) -> Result<Box<dyn TextCompletion>, ConfigError> {
        self.validate()?;
        if self.provider.offline {
            let dir = self.provider.fixtures.clone().expect("validated");
            return Ok(Box::new(ChainProvider::new(vec![
                Box::new(FixtureProvider::new(dir)),
                Box::new(HeuristicProvider),
            ])));
        }
        let url = self.provider.url.clone().expect("validated");
        Ok(Box::new(HttpProvider::new(url, self.provider.token.clone(), Duration::from_secs(self.provider.timeout_s))))
    }

    /// Effective configuration with the token masked, for reports.
    pub fn echo(&self) -> serde_json::Value {
        let mut c = self.clone();
        if c.provider.token.is_some() {
            c.provider.token = Some("***".into());
        }
        serde_json::to_value(&c).expect("config serializes")
    }
}

/// `graph.jsonl` -> `graph.specs.jsonl`, in the same directory.
pub fn specs_path_for(graph: &Path) -> PathBuf {
    let stem = graph.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "graph".into());
    graph.with_file_name(format!("{stem}.specs.jsonl"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn precedence_file_then_env() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("replies")).unwrap();
        let file = dir.path().join("hive.toml");
        std::fs::write(
            &file,
            "[provider]\nurl = \"http://file\"\nfixtures = \"replies\"\n[planner]\nmax_width = 1\n[ckg]\npath = \"g.jsonl\"\n",
        )
        .unwrap();
        let mut c = Config::from_file(&file).unwrap();
        assert_eq!(c.provider.url.as_deref(), Some("http://file"));
        assert_eq!(c.planner.max_width, 1);
        assert_eq!(c.planner.max_expansions, PlannerConfig::default().max_expansions);
        assert_eq!(c.provider.fixtures, Some(dir.path().join("replies")));
        assert_eq!(c.specs_path(), Some(dir.path().join("g.specs.jsonl")));

        let env: BTreeMap<&str, &str> = [(ENV_PROVIDER_URL, "http://env"), (ENV_OFFLINE, "1")].into();
        c.apply_env(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(c.provider.url.as_deref(), Some("http://env"));
        assert!(c.provider.offline);
        c.validate().unwrap();
    }

    #[test]
    fn offline_needs_fixture_dir() {
        let mut c = Config::default();
        c.provider.offline = true;
        assert!(c.validate().is_err());
        c.provider.offline = false;
        assert!(c.validate().is_err());
        c.provider.url = Some("http://x".into());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_bad_env() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("bad.toml");
        std::fs::write(&file, "[planner]\nwidth = 2\n").unwrap();
        assert!(Config::from_file(&file).is_err());
        assert!(Config::default().apply_env(|_| Some("maybe".into())).is_err());
    }

    #[test]
    fn echo_masks_token() {
        let mut c = Config::default();
        c.provider.token = Some("secret".into());
        assert_eq!(c.echo()["provider"]["token"], "***");
    }
}
