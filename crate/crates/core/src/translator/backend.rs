use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompt::PromptText;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    LiveHttp,
    Replay,
    FallbackRule,
}

/// Source of completions. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn complete(&self, prompt: &PromptText) -> Result<String>;
}

/// Recorded completions keyed by prompt hash (or by prompt tag as a fallback
/// key). Each key holds a list consumed in order.
#[derive(Debug, Default)]
pub struct ReplayBackend {
    entries: HashMap<String, Vec<String>>,
    cursors: Mutex<HashMap<String, usize>>,
}

impl ReplayBackend {
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Self {
        ReplayBackend {
            entries: entries.into_iter().collect(),
            cursors: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: BTreeMap<String, Vec<String>> =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Ok(Self::new(entries))
    }

    /// Forgets consumption state, so the fixture replays from the start.
    pub fn rewind(&self) {
        self.cursors.lock().unwrap().clear();
    }

    pub fn has_key(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }
}

impl Backend for ReplayBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn complete(&self, prompt: &PromptText) -> Result<String> {
        let hash = prompt.hash();
        let key = if self.entries.contains_key(&hash) {
            hash
        } else if self.entries.contains_key(&prompt.tag) {
            prompt.tag.clone()
        } else {
            return Err(Error::FixtureMiss {
                key: format!("{hash} ({})", prompt.tag),
            });
        };
        let list = &self.entries[&key];
        let mut cursors = self.cursors.lock().unwrap();
        let cursor = cursors.entry(key.clone()).or_insert(0);
        let out = list.get(*cursor).cloned().ok_or_else(|| Error::FixtureMiss {
            key: format!("{key} (exhausted after {} completions)", list.len()),
        })?;
        *cursor += 1;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    120
}

pub const API_KEY_ENV: &str = "MIGRATEKIT_API_KEY";

/// Chat-completion style HTTP endpoint.
pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .new_agent();
        HttpBackend {
            api_key: std::env::var(API_KEY_ENV).ok(),
            config,
            agent,
        }
    }
}

impl Backend for HttpBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::LiveHttp
    }

    fn complete(&self, prompt: &PromptText) -> Result<String> {
        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [{ "role": "user", "content": prompt.text }],
        });
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", self.config.endpoint)))?;
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::BackendUnavailable(format!("malformed response: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::BackendUnavailable("response has no completion text".into()))
    }
}

/// Answers every request for a function with a precomputed rule-based
/// translation, keyed by function id.
#[derive(Debug, Default)]
pub struct FallbackRuleBackend {
    by_id: HashMap<String, String>,
}

impl FallbackRuleBackend {
    pub fn new(by_id: HashMap<String, String>) -> Self {
        FallbackRuleBackend { by_id }
    }
}

impl Backend for FallbackRuleBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::FallbackRule
    }

    fn complete(&self, prompt: &PromptText) -> Result<String> {
        let id = tag_id(&prompt.tag);
        self.by_id
            .get(id)
            .map(|t| format!("```rust\n{t}\n```"))
            .ok_or_else(|| Error::FixtureMiss {
                key: prompt.tag.clone(),
            })
    }
}

/// The function id carried by a prompt tag.
pub fn tag_id(tag: &str) -> &str {
    let rest = tag.split_once(':').map(|x| x.1).unwrap_or(tag);
    match rest.rsplit_once(':') {
        // `repair:<id>:<round>`; ids themselves contain `::`
        Some((id, round)) if round.chars().all(|c| c.is_ascii_digit()) && !id.ends_with(':') => id,
        _ => rest,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt(text: &str, tag: &str) -> PromptText {
        PromptText {
            text: text.into(),
            tag: tag.into(),
        }
    }

    #[test]
    fn replay_consumes_in_order() {
        let p = prompt("hello", "translate:a.c::f");
        let b = ReplayBackend::new(BTreeMap::from([(p.hash(), vec!["one".into(), "two".into()])]));
        assert_eq!(b.complete(&p).unwrap(), "one");
        assert_eq!(b.complete(&p).unwrap(), "two");
        assert!(matches!(b.complete(&p), Err(Error::FixtureMiss { .. })));
        b.rewind();
        assert_eq!(b.complete(&p).unwrap(), "one");
    }

    #[test]
    fn replay_falls_back_to_tag() {
        let b = ReplayBackend::new(BTreeMap::from([("repair:a.c::f:1".into(), vec!["x".into()])]));
        assert_eq!(b.complete(&prompt("anything", "repair:a.c::f:1")).unwrap(), "x");
        assert!(b.complete(&prompt("anything", "repair:a.c::f:2")).is_err());
    }

    #[test]
    fn tag_ids() {
        assert_eq!(tag_id("translate:src/a.c::f"), "src/a.c::f");
        assert_eq!(tag_id("repair:src/a.c::f:2"), "src/a.c::f");
    }
}
