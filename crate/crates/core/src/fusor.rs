//! Leaves-first merging of per-function units into one module.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rust_prober::{Compiler, Diagnostic, ItemProvenance, ProbeStatus, ResolvedUnit, UnitItem};
use crate::rust_syntax::{same_tokens, ItemKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepStatus {
    Compiles,
    Fails,
    NotChecked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionStep {
    pub step: usize,
    pub core_id: String,
    /// Item names this step added to the module.
    pub added: Vec<String>,
    /// Item names of the unit that were already present.
    pub deduplicated: Vec<String>,
    pub status: StepStatus,
    pub error_count: usize,
    /// The unit reached fusion without compiling on its own.
    pub manual_required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub name: String,
    /// Unit whose copy is currently in the module.
    pub kept_from: String,
    pub kept_text: String,
    pub other_from: String,
    pub other_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModuleStatus {
    Compiles,
    Fails,
    NotChecked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RustModule {
    pub items: Vec<UnitItem>,
    pub provenance: BTreeMap<String, ItemProvenance>,
    pub fusion_log: Vec<FusionStep>,
    pub conflicts: Vec<Conflict>,
    pub status: ModuleStatus,
    /// Diagnostics of the final compile.
    pub diagnostics: Vec<Diagnostic>,
    /// Ids of units that entered fusion without compiling.
    pub residue: Vec<String>,
}

impl RustModule {
    pub fn texts(&self) -> Vec<String> {
        self.items.iter().map(|i| i.text.clone()).collect()
    }

    /// The module source: items separated by blank lines.
    pub fn render(&self) -> String {
        render_items(&self.items)
    }

    pub fn item(&self, name: &str) -> Option<&UnitItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

pub fn render_items(items: &[UnitItem]) -> String {
    let mut s = String::new();
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        s.push_str(item.text.trim_end());
        s.push('\n');
    }
    s
}

/// An item together with the unit it came from and whether it is that
/// unit's own core function.
#[derive(Debug, Clone)]
struct Placed {
    item: UnitItem,
    from: String,
    authoritative: bool,
}

#[derive(Debug, Default)]
struct Accumulator {
    context: Vec<Placed>,
    functions: Vec<Placed>,
}

enum Merge {
    Added,
    Kept,
    Conflict(Conflict),
}

fn is_function(item: &UnitItem) -> bool {
    item.kind == ItemKind::Fn
}

impl Accumulator {
    /// (in the function list, index) of the item called `name`.
    fn find(&self, name: &str) -> Option<(bool, usize)> {
        if let Some(i) = self.context.iter().position(|p| p.item.name == name) {
            return Some((false, i));
        }
        self.functions
            .iter()
            .position(|p| p.item.name == name)
            .map(|i| (true, i))
    }

    fn get(&self, loc: (bool, usize)) -> &Placed {
        if loc.0 {
            &self.functions[loc.1]
        } else {
            &self.context[loc.1]
        }
    }

    /// Puts `new` in place of the item at `loc`, moving it to the function
    /// list when a declaration is replaced by a definition.
    fn replace(&mut self, loc: (bool, usize), new: Placed) {
        match (loc.0, is_function(&new.item)) {
            (true, _) => self.functions[loc.1] = new,
            (false, false) => self.context[loc.1] = new,
            (false, true) => {
                self.context.remove(loc.1);
                self.functions.push(new);
            }
        }
    }

    fn insert(&mut self, new: Placed) -> Merge {
        let Some(loc) = self.find(&new.item.name) else {
            if is_function(&new.item) {
                self.functions.push(new);
            } else {
                self.context.push(new);
            }
            return Merge::Added;
        };
        let old = self.get(loc).clone();
        if old.item.text == new.item.text || same_tokens(&old.item.text, &new.item.text) {
            if new.authoritative && !old.authoritative {
                let mut kept = old;
                kept.authoritative = true;
                kept.from = new.from;
                self.replace(loc, kept);
            }
            return Merge::Kept;
        }
        // A unit's own core is the reference version of that function.
        if new.authoritative != old.authoritative {
            if new.authoritative {
                self.replace(loc, new);
            }
            return Merge::Kept;
        }
        let (old_fn, new_fn) = (is_function(&old.item), is_function(&new.item));
        let (op, np) = (old.item.provenance, new.item.provenance);
        let catalog = ItemProvenance::Catalog;
        match (old_fn, new_fn) {
            // Functions prefer translated code over catalog declarations.
            (false, true) if op == catalog => {
                self.replace(loc, new);
                Merge::Kept
            }
            (true, false) if np == catalog => Merge::Kept,
            // Types and other context items prefer the catalog copy.
            (false, false) if op == catalog && np != catalog => Merge::Kept,
            (false, false) if np == catalog && op != catalog => {
                self.replace(loc, new);
                Merge::Kept
            }
            _ => Merge::Conflict(Conflict {
                name: new.item.name.clone(),
                kept_from: old.from,
                kept_text: old.item.text,
                other_from: new.from,
                other_text: new.item.text,
            }),
        }
    }

    fn items(&self) -> Vec<UnitItem> {
        self.context
            .iter()
            .chain(&self.functions)
            .map(|p| p.item.clone())
            .collect()
    }
}

fn absorb(acc: &mut Accumulator, unit: &ResolvedUnit) -> (Vec<String>, Vec<String>, Vec<Conflict>) {
    let (mut added, mut dedup, mut conflicts) = (Vec::new(), Vec::new(), Vec::new());
    let n = unit.items.len();
    for (i, item) in unit.items.iter().enumerate() {
        let placed = Placed {
            item: item.clone(),
            from: unit.core_id.clone(),
            authoritative: i + 1 == n,
        };
        match acc.insert(placed) {
            Merge::Added => added.push(item.name.clone()),
            Merge::Kept => dedup.push(item.name.clone()),
            Merge::Conflict(c) => conflicts.push(c),
        }
    }
    (added, dedup, conflicts)
}

/// Merges `child` (a callee, earlier in leaves-first order) into `parent`.
/// Shared items appear once; the result's core is the parent's core.
pub fn fuse_step(parent: &ResolvedUnit, child: &ResolvedUnit) -> Result<ResolvedUnit> {
    let mut acc = Accumulator::default();
    for u in [child, parent] {
        let (_, _, conflicts) = absorb(&mut acc, u);
        if let Some(c) = conflicts.into_iter().next() {
            return Err(Error::ConflictingDefinition { name: c.name });
        }
    }
    let mut items = acc.items();
    // Keep the parent's core last so the merged value is still a unit of it.
    if let Some(pos) = items.iter().position(|i| i.name == parent.name && is_function(i)) {
        let core = items.remove(pos);
        items.push(core);
    }
    let mut diagnostics = parent.diagnostics.clone();
    diagnostics.extend(child.diagnostics.iter().cloned());
    let status = if parent.status == ProbeStatus::Compiles && child.status == ProbeStatus::Compiles {
        ProbeStatus::Compiles
    } else {
        ProbeStatus::CompileError
    };
    let mut unresolved: BTreeSet<String> = parent.unresolved.iter().cloned().collect();
    unresolved.extend(child.unresolved.iter().cloned());
    Ok(ResolvedUnit {
        core_id: parent.core_id.clone(),
        name: parent.name.clone(),
        items,
        diagnostics,
        iterations_used: parent.iterations_used.max(child.iterations_used),
        status,
        unresolved: unresolved.into_iter().collect(),
        lazy: parent.lazy || child.lazy,
    })
}

/// Folds all units into one module in schedule order (leaves first).
/// Units listed in `manual_required` are carried verbatim and logged red.
pub fn fuse_module(
    schedule: &[Vec<String>],
    units: &BTreeMap<String, ResolvedUnit>,
    manual_required: &BTreeSet<String>,
    compiler: Option<&dyn Compiler>,
    label: &str,
) -> Result<RustModule> {
    let mut acc = Accumulator::default();
    let mut log = Vec::new();
    let mut conflicts = Vec::new();
    let mut last_diags = Vec::new();
    let mut checked = false;
    for id in schedule.iter().flatten() {
        let unit = units
            .get(id)
            .ok_or_else(|| Error::Config(format!("no unit for scheduled function {id}")))?;
        let (added, deduplicated, cs) = absorb(&mut acc, unit);
        for c in &cs {
            log::warn!(
                "conflicting definitions of `{}` from {} and {}",
                c.name,
                c.kept_from,
                c.other_from
            );
        }
        conflicts.extend(cs);
        let (status, error_count) = match compiler {
            Some(c) => {
                let texts: Vec<String> = acc.items().into_iter().map(|i| i.text).collect();
                last_diags = c.check(&texts, label)?;
                checked = true;
                if last_diags.is_empty() {
                    (StepStatus::Compiles, 0)
                } else {
                    (StepStatus::Fails, last_diags.len())
                }
            }
            None => (StepStatus::NotChecked, 0),
        };
        log.push(FusionStep {
            step: log.len() + 1,
            core_id: id.clone(),
            added,
            deduplicated,
            status,
            error_count,
            manual_required: manual_required.contains(id),
        });
    }
    let items = acc.items();
    let provenance = items.iter().map(|i| (i.name.clone(), i.provenance)).collect();
    let status = if !checked {
        ModuleStatus::NotChecked
    } else if last_diags.is_empty() && conflicts.is_empty() {
        ModuleStatus::Compiles
    } else {
        ModuleStatus::Fails
    };
    Ok(RustModule {
        items,
        provenance,
        fusion_log: log,
        conflicts,
        status,
        diagnostics: last_diags,
        residue: schedule
            .iter()
            .flatten()
            .filter(|id| manual_required.contains(*id))
            .cloned()
            .collect(),
    })
}
