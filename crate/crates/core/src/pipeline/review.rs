//! Line-oriented review session over the fused module.
//!
//! Commands: `list`, `show <name>`, `edit <name>` (followed by the new item
//! text and a line holding a single `.`), `quit`. An edit is kept only when
//! the edited module compiles cleanly or with fewer errors than before.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::state::{CONFLICTS, REVIEW};
use super::{Pipeline, Stage};
use crate::error::{Error, Result};
use crate::fusor::{ModuleStatus, RustModule};
use crate::metrics::compute_mml;
use crate::rust_prober::{Compiler, Diagnostic, ItemProvenance, UnitItem};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualEdit {
    pub name: String,
    pub before: String,
    pub after: String,
    /// Lines changed by the edit.
    pub mml: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewLog {
    pub edits: Vec<ManualEdit>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReviewSummary {
    pub accepted: usize,
    pub rejected: usize,
    /// Issues still open when the session ended.
    pub open: Vec<String>,
}

fn fn_name_of(id: &str) -> &str {
    id.rsplit("::").next().unwrap_or(id)
}

/// Open issues of the module, one line each.
pub fn open_issues(module: &RustModule) -> Vec<String> {
    let mut out = Vec::new();
    for c in &module.conflicts {
        out.push(format!(
            "conflict `{}`: kept from {}, other from {}",
            c.name, c.kept_from, c.other_from
        ));
    }
    for id in &module.residue {
        out.push(format!("manual `{}`: {id} did not compile", fn_name_of(id)));
    }
    for d in &module.diagnostics {
        out.push(format!(
            "error {}: {}",
            if d.code.is_empty() { "-" } else { &d.code },
            d.message
        ));
    }
    out
}

/// Puts `item` in place of the module item with the same name and clears the
/// issues attached to that name. Returns the replaced text.
fn replace_item(module: &mut RustModule, item: UnitItem) -> Option<String> {
    let slot = module.items.iter_mut().find(|i| i.name == item.name)?;
    let before = std::mem::replace(slot, item);
    let name = before.name.clone();
    module.provenance.insert(name.clone(), ItemProvenance::Manual);
    module.conflicts.retain(|c| c.name != name);
    module.residue.retain(|id| fn_name_of(id) != name);
    Some(before.text)
}

fn set_diagnostics(module: &mut RustModule, diagnostics: Vec<Diagnostic>) {
    module.status = if diagnostics.is_empty() && module.conflicts.is_empty() {
        ModuleStatus::Compiles
    } else {
        ModuleStatus::Fails
    };
    module.diagnostics = diagnostics;
}

/// Re-applies logged edits to a freshly fused module. An edit applies only
/// where the item still has the text it was made against.
pub fn reapply(module: &mut RustModule, log: &ReviewLog, compiler: &dyn Compiler) -> Result<usize> {
    let mut applied = 0;
    for e in &log.edits {
        if module.item(&e.name).is_some_and(|i| i.text == e.before) {
            let item = UnitItem::parse(&e.after, ItemProvenance::Manual)?;
            replace_item(module, item);
            applied += 1;
        } else {
            log::warn!("review edit of `{}` no longer applies; its item changed", e.name);
        }
    }
    if applied > 0 {
        let diags = compiler.check(&module.texts(), "module")?;
        set_diagnostics(module, diags);
    }
    Ok(applied)
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<review output>", e)
}

impl Pipeline {
    /// Runs a review session reading commands from `input`.
    pub fn review(&self, input: impl BufRead, mut out: impl Write) -> Result<ReviewSummary> {
        let mut state = self.ws.load_state()?;
        let mut module = self.load_fused(&state)?;
        let log_path = self.ws.path(REVIEW);
        let mut log: ReviewLog = if log_path.exists() {
            self.ws.read_json(&log_path)?
        } else {
            ReviewLog::default()
        };
        let mut summary = ReviewSummary::default();
        let print_issues = |module: &RustModule, out: &mut dyn Write| -> Result<()> {
            let issues = open_issues(module);
            if issues.is_empty() {
                writeln!(out, "no open issues").map_err(out_err)
            } else {
                issues.iter().try_for_each(|i| writeln!(out, "{i}").map_err(out_err))
            }
        };
        if open_issues(&module).is_empty() {
            writeln!(out, "nothing to review").map_err(out_err)?;
            return Ok(summary);
        }
        print_issues(&module, &mut out)?;

        let mut lines = input.lines();
        while let Some(line) = lines.next() {
            let line = line.map_err(|e| Error::io("<review input>", e))?;
            let (cmd, arg) = line
                .trim()
                .split_once(' ')
                .map_or((line.trim(), ""), |(c, a)| (c, a.trim()));
            match cmd {
                "" => {}
                "quit" | "q" => break,
                "list" => print_issues(&module, &mut out)?,
                "show" => match module.item(arg) {
                    Some(i) => writeln!(out, "{}", i.text).map_err(out_err)?,
                    None => writeln!(out, "no item named `{arg}`").map_err(out_err)?,
                },
                "edit" => {
                    let mut text = String::new();
                    for l in lines.by_ref() {
                        let l = l.map_err(|e| Error::io("<review input>", e))?;
                        if l.trim_end() == "." {
                            break;
                        }
                        text.push_str(&l);
                        text.push('\n');
                    }
                    match self.try_edit(&mut module, arg, &text)? {
                        Ok(edit) => {
                            writeln!(out, "accepted edit of `{arg}` ({} lines changed)", edit.mml).map_err(out_err)?;
                            log.edits.push(edit);
                            self.write_module(&mut state, &module)?;
                            self.ws.write_json(&log_path, &log)?;
                            state.advance(Stage::Review);
                            self.ws.save_state(&state)?;
                            summary.accepted += 1;
                        }
                        Err(reason) => {
                            writeln!(out, "rejected edit of `{arg}`: {reason}").map_err(out_err)?;
                            summary.rejected += 1;
                        }
                    }
                }
                other => writeln!(out, "unknown command `{other}`").map_err(out_err)?,
            }
        }
        self.ws.write_json(&self.ws.path(CONFLICTS), &module.conflicts)?;
        summary.open = open_issues(&module);
        Ok(summary)
    }

    /// Applies an edit to `module` when it passes the compile gate; the outer
    /// error is fatal, the inner one is the rejection reason.
    fn try_edit(
        &self,
        module: &mut RustModule,
        name: &str,
        text: &str,
    ) -> Result<std::result::Result<ManualEdit, String>> {
        let Some(current) = module.item(name) else {
            return Ok(Err(format!("no item named `{name}`")));
        };
        let item = match UnitItem::parse(text, ItemProvenance::Manual) {
            Ok(i) if i.name == name => i,
            Ok(i) => return Ok(Err(format!("the new text defines `{}`", i.name))),
            Err(e) => return Ok(Err(e.to_string())),
        };
        let before_text = current.text.clone();
        let before = self.compiler().check(&module.texts(), "review")?;
        let mut candidate = module.clone();
        replace_item(&mut candidate, item.clone());
        let after = self.compiler().check(&candidate.texts(), "review")?;
        if !after.is_empty() && after.len() >= before.len() {
            let shown: Vec<String> = after.iter().map(|d| format!("  {} {}", d.code, d.message)).collect();
            return Ok(Err(format!(
                "module has {} errors after the edit ({} before):\n{}",
                after.len(),
                before.len(),
                shown.join("\n")
            )));
        }
        set_diagnostics(&mut candidate, after);
        *module = candidate;
        Ok(Ok(ManualEdit {
            name: name.to_string(),
            mml: compute_mml(&before_text, &item.text),
            before: before_text,
            after: item.text,
        }))
    }
}
