//! Compiler-feedback repair of units that do not compile after probing, with
//! a rule-based fallback once the round cap is spent.

pub mod naive;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rust_prober::{probe_from, Diagnostic, ItemProvenance, ProbeEnv, ProbeStatus, ResolvedUnit, UnitItem};
use crate::rust_syntax::{extract_code_block, rename_fn, same_tokens, split_items, ItemKind};
use crate::translator::prompt::{fenced, rules_section};
use crate::translator::{Backend, PromptText};

pub use naive::{naive_fallbacks, NaiveTranspiler};

pub const DEFAULT_REPAIR_CAP: usize = 3;
/// At most this many diagnostics are quoted in one repair prompt.
pub const MAX_PROMPT_DIAGNOSTICS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttemptOutcome {
    Compiles,
    StillFailing,
    RejectedNoncoreEdit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairAttempt {
    pub round: usize,
    pub input_diagnostics: Vec<Diagnostic>,
    /// Text of the repaired core as returned (the raw code block when it
    /// could not be read as a function).
    pub repaired_core: String,
    pub outcome: AttemptOutcome,
    pub prompt_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalStatus {
    Repaired,
    FallbackApplied,
    ManualRequired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairOutcome {
    pub core_id: String,
    pub final_status: FinalStatus,
    pub attempts: Vec<RepairAttempt>,
    pub final_unit: ResolvedUnit,
}

impl RepairOutcome {
    /// The first round (0 = no repair needed) after which the unit compiled
    /// through repair; `None` for fallback and manual outcomes.
    pub fn compiled_at_round(&self) -> Option<usize> {
        match self.final_status {
            FinalStatus::Repaired => Some(self.attempts.len()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairConfig {
    pub cap: usize,
    pub rules: Vec<String>,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            cap: DEFAULT_REPAIR_CAP,
            rules: crate::translator::default_rules(),
        }
    }
}

pub fn render_repair_prompt(
    unit: &ResolvedUnit,
    diagnostics: &[Diagnostic],
    round: usize,
    rules: &[String],
) -> PromptText {
    let name = &unit.name;
    let context: Vec<&str> = unit.context().iter().map(|i| i.text.trim_end()).collect();
    let errors: Vec<&str> = diagnostics
        .iter()
        .take(MAX_PROMPT_DIAGNOSTICS)
        .map(|d| d.rendered.trim_end())
        .collect();

    let mut text = String::new();
    text.push_str(&format!(
        "The Rust function `{name}` below was converted from C and does not compile. \
         Fix it using the compiler output.\n\n"
    ));
    text.push_str("## Existing definitions\n\n");
    text.push_str("These items are already part of the crate and must stay as they are.\n\n");
    text.push_str(&fenced("rust", &context.join("\n\n")));
    text.push_str("\n## Function to fix\n\n");
    text.push_str(&fenced("rust", unit.core().text.trim_end()));
    text.push_str("\n## Compiler output\n\n");
    text.push_str(&fenced("text", &errors.join("\n")));
    if diagnostics.len() > MAX_PROMPT_DIAGNOSTICS {
        text.push_str(&format!(
            "\n({} further errors omitted.)\n",
            diagnostics.len() - MAX_PROMPT_DIAGNOSTICS
        ));
    }
    text.push_str("\n## Repair guidelines\n\n");
    for g in [
        format!("Change only the body or signature of `{name}`; keep its name."),
        "Do not add, remove or modify any other item. Refer to the existing definitions instead.".to_string(),
        "Keep the behaviour of the original code.".to_string(),
        "Answer with exactly one fenced ```rust code block holding the corrected function.".to_string(),
    ] {
        text.push_str(&format!("- {g}\n"));
    }
    text.push('\n');
    text.push_str(&rules_section(rules));
    PromptText {
        text,
        tag: format!("repair:{}:{round}", unit.core_id),
    }
}

/// Outcome of reading one repair completion.
enum Reply {
    Core(String),
    NoncoreEdit(String),
    Unusable(String),
}

fn read_reply(unit: &ResolvedUnit, completion: &str) -> Reply {
    let code = extract_code_block(completion).to_string();
    let Ok(items) = split_items(&code) else {
        return Reply::Unusable(code);
    };
    let context = unit.context();
    let mut core = None;
    let mut strays = Vec::new();
    for it in items {
        if it.kind == ItemKind::Fn && it.name == unit.name {
            core = Some(it.text);
            continue;
        }
        match context.iter().find(|c| c.name == it.name) {
            Some(c) if same_tokens(&c.text, &it.text) => {}
            Some(_) => return Reply::NoncoreEdit(code),
            None => strays.push(it),
        }
    }
    if core.is_none() && strays.len() == 1 && strays[0].kind == ItemKind::Fn {
        let it = strays.remove(0);
        return match rename_fn(&it.text, &unit.name) {
            Ok(t) => Reply::Core(t),
            Err(_) => Reply::Unusable(code),
        };
    }
    match core {
        Some(_) if !strays.is_empty() => Reply::NoncoreEdit(code),
        Some(c) => Reply::Core(c),
        None => Reply::Unusable(code),
    }
}

/// Runs up to `cfg.cap` repair rounds. A round's completion must replace the
/// core function only; completions touching other items are rejected and
/// still use up the round. After the cap, `fallback` (an unsafe Rust item for
/// the same function) is substituted when available.
pub fn repair(
    unit: &ResolvedUnit,
    backend: &dyn Backend,
    env: &ProbeEnv,
    cfg: &RepairConfig,
    fallback: Option<&str>,
    label: &str,
) -> Result<RepairOutcome> {
    if cfg.cap == 0 {
        return Err(Error::Config("repair cap must be at least 1".into()));
    }
    if unit.status == ProbeStatus::Compiles {
        return Ok(RepairOutcome {
            core_id: unit.core_id.clone(),
            final_status: FinalStatus::Repaired,
            attempts: Vec::new(),
            final_unit: unit.clone(),
        });
    }
    let mut current = unit.clone();
    let mut attempts = Vec::new();
    for round in 1..=cfg.cap {
        let prompt = render_repair_prompt(&current, &current.diagnostics, round, &cfg.rules);
        let completion = backend.complete(&prompt)?;
        let input_diagnostics = current.diagnostics.clone();
        let (outcome, repaired_core) = match read_reply(&current, &completion) {
            Reply::NoncoreEdit(code) => (AttemptOutcome::RejectedNoncoreEdit, code),
            Reply::Unusable(code) => (AttemptOutcome::StillFailing, code),
            Reply::Core(text) => {
                let core = UnitItem::parse(&text, ItemProvenance::Translated)?;
                let next = probe_from(&unit.core_id, current.context().to_vec(), core, unit.lazy, env, label)?;
                let outcome = if next.status == ProbeStatus::Compiles {
                    AttemptOutcome::Compiles
                } else {
                    AttemptOutcome::StillFailing
                };
                current = next;
                (outcome, text)
            }
        };
        log::debug!("{}: repair round {round}: {outcome:?}", unit.core_id);
        attempts.push(RepairAttempt {
            round,
            input_diagnostics,
            repaired_core,
            outcome,
            prompt_hash: prompt.hash(),
        });
        if outcome == AttemptOutcome::Compiles {
            return Ok(RepairOutcome {
                core_id: unit.core_id.clone(),
                final_status: FinalStatus::Repaired,
                attempts,
                final_unit: current,
            });
        }
    }
    let final_status;
    if let Some(text) = fallback {
        let core = fallback_item(text, &unit.name)?;
        current = probe_from(&unit.core_id, current.context().to_vec(), core, false, env, label)?;
        final_status = FinalStatus::FallbackApplied;
    } else {
        final_status = FinalStatus::ManualRequired;
    }
    Ok(RepairOutcome {
        core_id: unit.core_id.clone(),
        final_status,
        attempts,
        final_unit: current,
    })
}

/// Whether a function item is unsafe-marked: an `unsafe fn`, or a body that
/// consists of a single `unsafe` block.
pub fn is_unsafe_marked(text: &str) -> bool {
    let Ok(f) = syn::parse_str::<syn::ItemFn>(text) else {
        return false;
    };
    if f.sig.unsafety.is_some() {
        return true;
    }
    matches!(f.block.stmts.as_slice(), [syn::Stmt::Expr(syn::Expr::Unsafe(_), _)])
}

/// Normalizes a stored fallback item: renamed to `name` and wrapped in an
/// `unsafe` block when it is not unsafe-marked already.
pub fn fallback_item(text: &str, name: &str) -> Result<UnitItem> {
    let renamed = rename_fn(text.trim(), name)?;
    let text = if is_unsafe_marked(&renamed) {
        renamed
    } else {
        use syn::spanned::Spanned;
        let f: syn::ItemFn = syn::parse_str(&renamed).map_err(|e| Error::ParseFailed(e.to_string()))?;
        let sig_end = f.block.span().byte_range().start;
        let inner = renamed[sig_end + 1..renamed.len() - 1].trim();
        format!(
            "{} {{\n    unsafe {{\n        {inner}\n    }}\n}}",
            renamed[..sig_end].trim_end()
        )
    };
    let mut item = UnitItem::parse(&text, ItemProvenance::Fallback)?;
    item.provenance = ItemProvenance::Fallback;
    Ok(item)
}

/// Looks up `id` in the fallback store.
pub fn apply_fallback(id: &str, name: &str, store: &BTreeMap<String, String>) -> Result<UnitItem> {
    let text = store.get(id).ok_or_else(|| Error::FallbackMissing(id.to_string()))?;
    fallback_item(text, name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rust_prober::DiagSpan;

    fn unit() -> ResolvedUnit {
        ResolvedUnit {
            core_id: "a.c::f".into(),
            name: "f".into(),
            items: vec![
                UnitItem::parse("pub const N: i32 = 3;", ItemProvenance::Catalog).unwrap(),
                UnitItem::parse("pub fn f() -> i32 { M }", ItemProvenance::Translated).unwrap(),
            ],
            diagnostics: vec![Diagnostic::new(
                "E0425",
                "cannot find value `M` in this scope",
                Some(DiagSpan {
                    file: "src/lib.rs".into(),
                    line_start: 4,
                    column_start: 21,
                    line_end: 4,
                    column_end: 22,
                    text: "M".into(),
                }),
                "error[E0425]: cannot find value `M` in this scope\n",
            )],
            iterations_used: 2,
            status: ProbeStatus::UnresolvedRemaining,
            unresolved: vec!["M".into()],
            lazy: false,
        }
    }

    #[test]
    fn prompt_is_deterministic_and_quotes_errors() {
        let u = unit();
        let a = render_repair_prompt(&u, &u.diagnostics, 1, &[]);
        let b = render_repair_prompt(&u, &u.diagnostics, 1, &[]);
        assert_eq!(a, b);
        assert!(a.text.contains("error[E0425]: cannot find value `M` in this scope"));
        assert!(a.text.contains("pub const N: i32 = 3;"));
        assert_eq!(a.tag, "repair:a.c::f:1");
    }

    #[test]
    fn reply_classification() {
        let u = unit();
        assert!(matches!(
            read_reply(&u, "```rust\npub fn f() -> i32 { N }\n```"),
            Reply::Core(_)
        ));
        assert!(matches!(
            read_reply(&u, "pub const N: i32 = 3;\npub fn f() -> i32 { N }"),
            Reply::Core(_)
        ));
        assert!(matches!(
            read_reply(&u, "pub const N: i32 = 4;\npub fn f() -> i32 { N }"),
            Reply::NoncoreEdit(_)
        ));
        assert!(matches!(
            read_reply(&u, "pub const M: i32 = 4;\npub fn f() -> i32 { M }"),
            Reply::NoncoreEdit(_)
        ));
        assert!(matches!(read_reply(&u, "pub fn g() -> i32 { N }"), Reply::Core(t) if t.contains("fn f")));
        assert!(matches!(read_reply(&u, "fn ("), Reply::Unusable(_)));
    }

    #[test]
    fn fallback_wrapping() {
        let it = fallback_item("fn g(x: i32) -> i32 { let y = x; y }", "f").unwrap();
        assert!(is_unsafe_marked(&it.text), "{}", it.text);
        assert_eq!(it.name, "f");
        assert_eq!(it.provenance, ItemProvenance::Fallback);
        let kept = "pub fn f() { unsafe { } }";
        assert_eq!(fallback_item(kept, "f").unwrap().text, kept);
        assert!(matches!(
            apply_fallback("x", "f", &BTreeMap::new()),
            Err(Error::FallbackMissing(_))
        ));
    }
}
