//! Prompt rendering, completion post-processing and the syntax-retry loop.

pub mod backend;
pub mod laziness;
pub mod prompt;

use serde::{Deserialize, Serialize};

pub use backend::{Backend, BackendKind, FallbackRuleBackend, HttpBackend, HttpConfig, ReplayBackend};
pub use laziness::{detect_laziness, Evidence, LazinessConfig, LazinessVerdict};
pub use prompt::{default_rules, render_translation_prompt, PromptText};

use crate::context_prober::TranslationUnit;
use crate::error::{Error, Result};
use crate::rust_syntax::{check_syntax, extract_code_block, rename_fn, split_items, ItemKind, SyntaxIssue};

pub const DEFAULT_RETRY_CAP: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranslationStatus {
    SyntaxOk,
    SyntaxFailed,
    LazyFlagged,
}

impl TranslationStatus {
    /// Whether the text is usable by later stages (it parses).
    pub fn parses(self) -> bool {
        !matches!(self, TranslationStatus::SyntaxFailed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatedFunction {
    pub core_id: String,
    pub name: String,
    /// The core function item only.
    pub rust_text: String,
    pub attempts: usize,
    pub laziness: LazinessVerdict,
    pub status: TranslationStatus,
    pub prompt_hash: String,
    /// Raw extracted code of every attempt, in order.
    pub attempt_texts: Vec<String>,
    /// Issues of the last failing attempt, if any.
    pub issues: Vec<SyntaxIssue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslateConfig {
    pub retry_cap: usize,
    pub rules: Vec<String>,
    pub laziness: LazinessConfig,
}

impl Default for TranslateConfig {
    fn default() -> Self {
        TranslateConfig {
            retry_cap: DEFAULT_RETRY_CAP,
            rules: default_rules(),
            laziness: LazinessConfig::default(),
        }
    }
}

/// Keeps only the function item for `name` from `code`, renaming it when the
/// completion changed the name. Fails when there is no function item at all.
pub fn extract_core_fn(code: &str, name: &str) -> std::result::Result<String, SyntaxIssue> {
    let issues = check_syntax(code);
    if let Some(first) = issues.into_iter().next() {
        return Err(first);
    }
    let items = split_items(code).map_err(|e| SyntaxIssue {
        line: 1,
        column: 1,
        message: e.to_string(),
    })?;
    let fns: Vec<_> = items.iter().filter(|i| i.kind == ItemKind::Fn).collect();
    let chosen = fns
        .iter()
        .find(|i| i.name == name)
        .or_else(|| fns.iter().find(|i| i.name.eq_ignore_ascii_case(name)))
        .or(fns.first())
        .ok_or_else(|| SyntaxIssue {
            line: 1,
            column: 1,
            message: "completion contains no function item".into(),
        })?;
    if chosen.name == name {
        Ok(chosen.text.clone())
    } else {
        rename_fn(&chosen.text, name).map_err(|e| SyntaxIssue {
            line: 1,
            column: 1,
            message: e.to_string(),
        })
    }
}

/// Asks the backend until a completion parses or the retry cap is reached.
pub fn translate(unit: &TranslationUnit, backend: &dyn Backend, cfg: &TranslateConfig) -> Result<TranslatedFunction> {
    if cfg.retry_cap == 0 {
        return Err(Error::Config("retry cap must be at least 1".into()));
    }
    let prompt = render_translation_prompt(unit, &cfg.rules);
    let name = &unit.core.name;
    let mut attempt_texts = Vec::new();
    let mut last_issues = Vec::new();
    for attempt in 1..=cfg.retry_cap {
        let completion = backend.complete(&prompt)?;
        let code = extract_code_block(&completion).to_string();
        attempt_texts.push(code.clone());
        match extract_core_fn(&code, name) {
            Ok(rust_text) => {
                let laziness = detect_laziness(&unit.core.body_text, &rust_text, &cfg.laziness);
                let status = if laziness.lazy {
                    TranslationStatus::LazyFlagged
                } else {
                    TranslationStatus::SyntaxOk
                };
                log::debug!("{}: attempt {attempt} parsed ({status:?})", unit.core.id);
                return Ok(TranslatedFunction {
                    core_id: unit.core.id.clone(),
                    name: name.clone(),
                    rust_text,
                    attempts: attempt,
                    laziness,
                    status,
                    prompt_hash: prompt.hash(),
                    attempt_texts,
                    issues: Vec::new(),
                });
            }
            Err(issue) => {
                log::debug!("{}: attempt {attempt} rejected: {}", unit.core.id, issue.message);
                last_issues = vec![issue];
            }
        }
    }
    Ok(TranslatedFunction {
        core_id: unit.core.id.clone(),
        name: name.clone(),
        rust_text: attempt_texts.last().cloned().unwrap_or_default(),
        attempts: cfg.retry_cap,
        laziness: LazinessVerdict::not_lazy(),
        status: TranslationStatus::SyntaxFailed,
        prompt_hash: prompt.hash(),
        attempt_texts,
        issues: last_issues,
    })
}
